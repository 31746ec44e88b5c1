//! Acceptance suite. One test per criterion; each prints a PASS line
//! (visible with `--nocapture`) after its assertions hold.
//!
//! Criteria:
//! 1. golden report CSV, byte-for-byte, in under a second
//! 2. golden Type=Formula filter
//! 3. golden update-frequency map
//! 4. stale-sum detection with the recomputed total
//! 5. macro lint finding sets and the parsed header record
//! 6. single-cell diff and identity diffs over the corpus
//! 7. property suites (doc round-trip x1000, translation invariance
//!    x500, score linearity, coverage monotonicity) in under 60 s
//! 8. cross-loader equivalence over the corpus

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use assert_cmd::Command;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use sheetdoc::classify::{compute_coverage, CoverageStatus};
use sheetdoc::diff::{diff_workbooks, ChangeKind};
use sheetdoc::doc_comment::{parse_doc_comment, serialize_doc_record};
use sheetdoc::formula::parse_formula;
use sheetdoc::ingest::{load_fixture, load_workbook, load_xlsx};
use sheetdoc::inventory::{check_stale_sums, scan_workbook, WeightTable, STALE_SUM_TOLERANCE};
use sheetdoc::model::{CellAddress, Workbook};
use sheetdoc::vba::{lint_macros, parse_macro_headers, MacroLintRule};

fn testdata() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../testdata")
}

fn fixture(name: &str) -> PathBuf {
    testdata().join("fixtures").join(name)
}

fn golden(name: &str) -> String {
    fs::read_to_string(testdata().join("golden").join(name)).unwrap()
}

fn sheetdoc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sheetdoc"))
}

fn corpus_fixtures() -> Vec<PathBuf> {
    let mut fixtures: Vec<PathBuf> = fs::read_dir(testdata().join("fixtures"))
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "fixture"))
        .collect();
    fixtures.sort();
    fixtures
}

#[test]
fn criterion_1_golden_report() {
    let start = Instant::now();
    let assert = sheetdoc()
        .arg("report")
        .arg(fixture("receipts.fixture"))
        .assert()
        .code(0);
    let elapsed = start.elapsed();
    let stdout = String::from_utf8_lossy(&assert.get_output().stdout).into_owned();
    assert_eq!(
        stdout,
        golden("receipts_report.csv"),
        "report CSV is not byte-identical"
    );
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "report took {elapsed:?}, budget is 1 s"
    );

    // The same fixture is fully documented: doc-check is clean.
    sheetdoc()
        .arg("doc-check")
        .arg(fixture("receipts.fixture"))
        .assert()
        .code(0);
    println!(
        "criterion 1 PASS: golden 3-row report reproduced byte-for-byte in {:?}",
        elapsed
    );
}

#[test]
fn criterion_2_golden_filter() {
    let assert = sheetdoc()
        .args(["report", "--filter", "type=Formula"])
        .arg(fixture("receipts_modified.fixture"))
        .assert()
        .code(0);
    let stdout = String::from_utf8_lossy(&assert.get_output().stdout).into_owned();
    assert_eq!(stdout, golden("receipts_modified_formula_rows.csv"));
    assert_eq!(
        stdout.lines().count(),
        3,
        "header plus exactly the two formula rows"
    );
    println!("criterion 2 PASS: Type=Formula filter yields exactly the two formula rows");
}

#[test]
fn criterion_3_golden_update_map() {
    let assert = sheetdoc()
        .args(["map", "--field", "update"])
        .arg(fixture("receipts.fixture"))
        .assert()
        .code(0);
    let stdout = String::from_utf8_lossy(&assert.get_output().stdout).into_owned();
    assert_eq!(stdout, golden("receipts_update_map.csv"));

    // Shape check against the figure: NA at row 1, Daily at rows 2-10,
    // Weekly at row 12.
    let lines: Vec<&str> = stdout.lines().skip(1).collect();
    assert_eq!(lines[0], "Sheet1,A1,NA");
    for (idx, row) in (2..=10).enumerate() {
        assert_eq!(lines[1 + idx], format!("Sheet1,A{row},Daily"));
    }
    assert_eq!(lines[10], "Sheet1,A12,Weekly");
    println!("criterion 3 PASS: update map shows NA / Daily x9 / Weekly");
}

#[test]
fn criterion_4_stale_sum_detection() {
    let wb = load_fixture(&fixture("amounts_v2.fixture"))
        .unwrap()
        .workbook;
    let stale = check_stale_sums(&wb);
    assert_eq!(stale.len(), 1, "the edited total must be flagged");
    let hit = &stale[0];
    assert_eq!(hit.location.to_string(), "Sheet1!A7");
    assert_eq!(hit.cached, 5750.0);
    assert!(
        (hit.recomputed - 5850.0).abs() <= STALE_SUM_TOLERANCE,
        "recomputed {} should be 5850 within {STALE_SUM_TOLERANCE}",
        hit.recomputed
    );

    // The pre-edit version is not stale.
    let old = load_fixture(&fixture("amounts_v1.fixture"))
        .unwrap()
        .workbook;
    assert!(check_stale_sums(&old).is_empty());

    // And the metric feeds the scanned row.
    let record = scan_workbook(&wb, &WeightTable::default());
    assert_eq!(record.stale_sums, 1);
    println!("criterion 4 PASS: cached 5750 flagged stale, recomputed 5850");
}

#[test]
fn criterion_5_macro_lint() {
    let wb = load_workbook(&fixture("macro_book.fixture"))
        .unwrap()
        .workbook;
    assert_eq!(wb.vba_modules.len(), 2);

    let per_module = |name: &str| -> Vec<MacroLintRule> {
        let module = wb.vba_modules.iter().find(|m| m.name == name).unwrap();
        let mut rules: Vec<MacroLintRule> = lint_macros(std::slice::from_ref(module))
            .iter()
            .map(|f| f.rule)
            .collect();
        rules.sort();
        rules
    };

    assert_eq!(
        per_module("SheetEvents"),
        vec![
            MacroLintRule::ManualCalculation,
            MacroLintRule::UndocumentedProcedure
        ],
        "the manual-calculation listing yields exactly these two findings"
    );
    assert_eq!(
        per_module("Saver"),
        vec![MacroLintRule::HardcodedSavePath],
        "the documented SaveAs listing yields exactly the hardcoded path finding"
    );

    let saver = wb.vba_modules.iter().find(|m| m.name == "Saver").unwrap();
    let headers = parse_macro_headers(saver);
    let record = headers[0]
        .record
        .as_ref()
        .expect("documented procedure parses");
    assert_eq!(record.author, "Ken Jones");

    // Through the CLI: findings exist, exit code 1.
    sheetdoc()
        .arg("macro-check")
        .arg(fixture("macro_book.fixture"))
        .assert()
        .code(1);
    println!("criterion 5 PASS: lint sets match and the header parses with author Ken Jones");
}

#[test]
fn criterion_6_diff() {
    let assert = sheetdoc()
        .args([
            "diff",
            "--who",
            "Raymond Payette",
            "--when",
            "2/13/2006 9:45 PM",
        ])
        .arg(fixture("amounts_v1.fixture"))
        .arg(fixture("amounts_v2.fixture"))
        .assert()
        .code(0);
    let stdout = String::from_utf8_lossy(&assert.get_output().stdout).into_owned();
    assert_eq!(stdout, golden("amounts_diff.csv"));

    let old = load_fixture(&fixture("amounts_v1.fixture"))
        .unwrap()
        .workbook;
    let new = load_fixture(&fixture("amounts_v2.fixture"))
        .unwrap()
        .workbook;
    let when = chrono::NaiveDate::from_ymd_opt(2006, 2, 13)
        .unwrap()
        .and_hms_opt(21, 45, 0)
        .unwrap();
    let records = diff_workbooks(&old, &new, "Raymond Payette", when, false);
    assert_eq!(records.len(), 1, "exactly one change");
    assert_eq!(records[0].change, ChangeKind::CellChange);
    assert_eq!(records[0].range, "R5C1");
    assert_eq!(records[0].old_value.as_deref(), Some("1150"));
    assert_eq!(records[0].new_value.as_deref(), Some("1250"));

    // Identity diff over every corpus workbook, both modes.
    for path in corpus_fixtures() {
        let wb = load_workbook(&path).unwrap().workbook;
        assert!(
            diff_workbooks(&wb, &wb, "x", when, false).is_empty(),
            "{path:?}"
        );
        assert!(
            diff_workbooks(&wb, &wb, "x", when, true).is_empty(),
            "{path:?}"
        );
    }
    println!("criterion 6 PASS: single CellChange at R5C1; identity diffs empty over the corpus");
}

#[test]
fn criterion_7_property_suites() {
    let start = Instant::now();

    doc_round_trip_properties(1000);
    translation_invariance_properties(500);
    score_linearity_properties(200);
    coverage_monotonicity_properties(200);

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "property suites took {elapsed:?}, budget is 60 s"
    );
    println!(
        "criterion 7 PASS: 1000x doc round-trip, 500x translation invariance, \
         200x score linearity, 200x coverage monotonicity in {elapsed:?}"
    );
}

fn doc_round_trip_properties(cases: u32) {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    let types = [
        "Title & Label",
        "Data",
        "Data (Validated)",
        "Formula",
        "Link",
        "Macro",
    ];
    let strategy = (
        "[A-Za-z][A-Za-z .]{0,12}[A-Za-z]",
        "[A-Za-z][A-Za-z ,$0-9]{0,20}[a-z.]",
        0usize..6,
        proptest::option::of("[A-Za-z][A-Za-z ]{0,8}"),
        proptest::option::of("[A-Za-z][A-Za-z ]{0,8}"),
        proptest::option::of(("[A-Z]", 1u32..=40, 1u32..=12)),
        proptest::collection::vec("[A-Za-z0-9 $,]{1,12}", 0..4),
        proptest::option::of(("[A-Za-z][A-Za-z .]{0,10}[A-Za-z]", 1u32..=28)),
    );
    runner
        .run(
            &strategy,
            |(author, purpose, type_idx, source, update, range, notes, checked)| {
                let mut body = format!(
                    "Author: {author}\nDate: 2/20/2006\nTime: 10:43 AM\nPurpose: {purpose}\nType: {}",
                    types[type_idx]
                );
                if type_idx != 0 {
                    if let Some(source) = &source {
                        body.push_str(&format!("\nSource: {source}"));
                    }
                }
                if let Some((col, row, height)) = &range {
                    body.push_str(&format!("\nRange: {col}{row}:{col}{}", row + height));
                }
                body.push_str("\nFormat: Currency");
                if let Some((reviewer, day)) = &checked {
                    body.push_str(&format!("\nChecked by: {reviewer}\nDate: 2/{day}/2006"));
                }
                if type_idx != 0 {
                    if let Some(update) = &update {
                        body.push_str(&format!("\nUpdate: {update}"));
                    }
                }
                for note in &notes {
                    body.push_str(&format!("\n{note}"));
                }

                let record = parse_doc_comment(&body)
                    .ok_or_else(|| TestCaseError::fail("generated body did not parse"))?;
                let serialized = serialize_doc_record(&record)
                    .map_err(|e| TestCaseError::fail(format!("serialize failed: {e}")))?;
                let reparsed = parse_doc_comment(&serialized)
                    .ok_or_else(|| TestCaseError::fail("serialized record did not reparse"))?;
                prop_assert_eq!(&reparsed, &record, "round trip diverged for {}", serialized);
                Ok(())
            },
        )
        .unwrap();
}

fn translation_invariance_properties(cases: u32) {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (
        proptest::collection::vec((1u32..=100, 1u32..=26), 1..4),
        (200u32..=300, 40u32..=60),
        (0i64..=400, 0i64..=10),
        0usize..3,
    );
    runner
        .run(
            &strategy,
            |(refs, (anchor_row, anchor_col), (dr, dc), op_idx)| {
                let op = ["+", "-", "*"][op_idx];
                // Build the formula and its translated copy by shifting the
                // written positions directly; the shift is the oracle.
                let base_text: Vec<String> = refs
                    .iter()
                    .map(|(r, c)| CellAddress::new(*r, *c).render_a1())
                    .collect();
                let shifted_text: Vec<String> = refs
                    .iter()
                    .map(|(r, c)| {
                        CellAddress::new((*r as i64 + dr) as u32, (*c as i64 + dc) as u32)
                            .render_a1()
                    })
                    .collect();
                let base = format!("={}+1", base_text.join(op));
                let shifted = format!("={}+1", shifted_text.join(op));

                let anchor = CellAddress::new(anchor_row, anchor_col);
                let shifted_anchor = CellAddress::new(
                    (anchor_row as i64 + dr) as u32,
                    (anchor_col as i64 + dc) as u32,
                );

                let base_nf = parse_formula(&base).unwrap().relative_normal_form(anchor);
                let shifted_nf = parse_formula(&shifted)
                    .unwrap()
                    .relative_normal_form(shifted_anchor);
                prop_assert_eq!(
                    base_nf,
                    shifted_nf,
                    "normal forms diverged for {} vs {}",
                    base,
                    shifted
                );
                Ok(())
            },
        )
        .unwrap();
}

fn score_linearity_properties(cases: u32) {
    let wb = load_fixture(&fixture("kitchen.fixture")).unwrap().workbook;
    let base = scan_workbook(&wb, &WeightTable::default());
    assert!(
        base.score > 0.0,
        "the kitchen fixture must carry risk factors"
    );

    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&(0.0f64..=8.0), |factor| {
            let scaled = scan_workbook(&wb, &WeightTable::default().scaled(factor));
            let expected = base.score * factor;
            prop_assert!(
                (scaled.score - expected).abs() <= 1e-9 * expected.abs().max(1.0),
                "score {} != {} * {}",
                scaled.score,
                base.score,
                factor
            );
            Ok(())
        })
        .unwrap();
    let zeroed = scan_workbook(&wb, &WeightTable::default().scaled(0.0));
    assert_eq!(zeroed.score, 0.0);
}

fn coverage_monotonicity_properties(cases: u32) {
    // A fully populated 6x4 grid; records cover random sub-ranges.
    let mut text = String::from("SHEET S\n");
    for row in 1..=6 {
        for col in 1..=4u32 {
            let addr = CellAddress::new(row, col).render_a1();
            text.push_str(&format!("CELL {addr} TYPE num VALUE {}\n", row * col));
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.fixture");
    fs::write(&path, text).unwrap();
    let wb: Workbook = load_fixture(&path).unwrap().workbook;

    let record_strategy = proptest::collection::vec(
        (
            (1u32..=6, 1u32..=4),
            (1u32..=6, 1u32..=4),
            (1u32..=6, 1u32..=4),
        ),
        1..6,
    );
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&record_strategy, |specs| {
            let records: Vec<_> = specs
                .iter()
                .enumerate()
                .map(|(idx, ((or_, oc), (r1, c1), (r2, c2)))| {
                    let range = sheetdoc::model::CellRange::new(
                        CellAddress::new(*r1, *c1),
                        CellAddress::new(*r2, *c2),
                    );
                    let body = format!(
                        "Author: A{idx}\nDate: 2/20/2006\nPurpose: p\nType: Data\nSource: S\nRange: {}",
                        range.render()
                    );
                    parse_doc_comment(&body).unwrap().with_origin(
                        sheetdoc::doc_comment::DocOrigin::Cell {
                            sheet: "S".to_string(),
                            address: CellAddress::new(*or_, *oc),
                        },
                    )
                })
                .collect();

            let mut documented_before: std::collections::BTreeSet<CellAddress> =
                Default::default();
            for prefix in 1..=records.len() {
                let coverage = compute_coverage(&wb, &records[..prefix]);
                let documented_now: std::collections::BTreeSet<CellAddress> = coverage
                    .sheets
                    .get("S")
                    .unwrap()
                    .iter()
                    .filter(|(_, cov)| cov.status == CoverageStatus::Documented)
                    .map(|(addr, _)| *addr)
                    .collect();
                prop_assert!(
                    documented_before.is_subset(&documented_now),
                    "a documented cell became undocumented after adding a record"
                );
                documented_before = documented_now;
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn criterion_8_cross_loader_equivalence() {
    let tmp = tempfile::tempdir().unwrap();
    let fixtures = corpus_fixtures();
    assert!(!fixtures.is_empty());
    for fixture_path in &fixtures {
        let text = fs::read_to_string(fixture_path).unwrap();
        let bytes = sheetdoc_testkit::fixture_to_xlsx(&text).unwrap();
        let stem = fixture_path.file_stem().unwrap().to_string_lossy();
        let xlsx_path = tmp.path().join(format!("{stem}.xlsx"));
        fs::write(&xlsx_path, bytes).unwrap();

        // Carry the macro sidecar along when the fixture has one.
        let sidecar = sheetdoc::ingest::vba_sidecar_dir(fixture_path).unwrap();
        if sidecar.is_dir() {
            let target = sheetdoc::ingest::vba_sidecar_dir(&xlsx_path).unwrap();
            fs::create_dir_all(&target).unwrap();
            for entry in fs::read_dir(&sidecar).unwrap().filter_map(|e| e.ok()) {
                fs::copy(entry.path(), target.join(entry.file_name())).unwrap();
            }
        }

        let from_text = load_fixture(fixture_path).unwrap().workbook;
        let from_xlsx = load_xlsx(&xlsx_path).unwrap().workbook;
        assert!(
            from_text.content_eq(&from_xlsx),
            "loaders disagree on {fixture_path:?}:\n{}\nvs\n{}",
            from_text.content_lines().join("\n"),
            from_xlsx.content_lines().join("\n")
        );
    }
    println!(
        "criterion 8 PASS: {} corpus fixtures load identically from text and xlsx",
        fixtures.len()
    );
}
