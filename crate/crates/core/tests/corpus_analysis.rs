//! Corpus-level analysis checks: precedent soundness, the coverage
//! demonstration on the receipts fixture, and attribute-map agreement.

use std::path::{Path, PathBuf};

use sheetdoc::classify::{build_precedent_graph, compute_coverage, CellLocation, CoverageStatus};
use sheetdoc::ingest::load_workbook;
use sheetdoc::model::{CellAddress, CellRange, DefinedNameTarget, Workbook};
use sheetdoc::reports::collect_records;

fn corpus_fixtures() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../testdata/fixtures");
    let mut fixtures: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "fixture"))
        .collect();
    fixtures.sort();
    fixtures
}

fn load(path: &Path) -> Workbook {
    load_workbook(path).unwrap().workbook
}

/// Every precedent edge's range must be visible in the dependent's
/// formula text, either literally or through one level of defined-name
/// expansion.
#[test]
fn precedent_graph_is_sound_over_the_corpus() {
    for path in corpus_fixtures() {
        let wb = load(&path);
        let graph = build_precedent_graph(&wb);
        assert!(
            graph.observations.is_empty(),
            "{path:?}: {:?}",
            graph.observations
        );
        for edge in &graph.edges {
            let sheet = wb.sheet(&edge.dependent.sheet).unwrap();
            let formula = sheet
                .cell(edge.dependent.address)
                .and_then(|c| c.formula_text())
                .unwrap();
            let range_text = edge.precedent.render();
            let direct = formula.contains(&range_text);
            let via_name = wb.defined_names.iter().any(|(name, target)| {
                formula
                    .to_ascii_lowercase()
                    .contains(&name.to_ascii_lowercase())
                    && matches!(
                        target,
                        DefinedNameTarget::Range { sheet, range }
                            if *sheet == edge.precedent_sheet && *range == edge.precedent
                    )
            });
            assert!(
                direct || via_name,
                "{path:?}: edge {edge:?} not visible in formula {formula:?}"
            );
        }
    }
}

#[test]
fn receipts_precedents_show_full_documentation() {
    let wb = load(
        &corpus_fixtures()
            .into_iter()
            .find(|p| p.ends_with("receipts.fixture"))
            .unwrap(),
    );

    // The total's precedents are exactly the nine data cells.
    let graph = build_precedent_graph(&wb);
    let total = CellLocation {
        sheet: "Sheet1".to_string(),
        address: CellAddress::parse_a1("A12").unwrap(),
    };
    let precedents = graph.transitive_precedents(&total);
    let expected: std::collections::BTreeSet<CellLocation> = CellRange::parse("A2:A10")
        .unwrap()
        .iter()
        .map(|address| CellLocation {
            sheet: "Sheet1".to_string(),
            address,
        })
        .collect();
    assert_eq!(precedents, expected);

    // All eleven non-empty cells are documented by the three records.
    let collection = collect_records(&wb, &wb.vba_modules);
    assert_eq!(collection.records.len(), 3);
    let coverage = compute_coverage(&wb, &collection.records);
    assert_eq!(coverage.documented_cells(), 11);
    assert_eq!(coverage.undocumented_cells(), 0);
    let a11 = coverage.status("Sheet1", CellAddress::parse_a1("A11").unwrap());
    assert!(
        a11.is_none_or(|c| c.status == CoverageStatus::NotApplicableEmpty),
        "the blank row stays out of the documented set"
    );
}

#[test]
fn corpus_analyses_are_deterministic() {
    for path in corpus_fixtures() {
        let a = load(&path);
        let b = load(&path);
        assert!(a.content_eq(&b));
        let records_a = collect_records(&a, &a.vba_modules);
        let records_b = collect_records(&b, &b.vba_modules);
        assert_eq!(records_a.records, records_b.records);
        assert_eq!(
            compute_coverage(&a, &records_a.records),
            compute_coverage(&b, &records_b.records)
        );
        assert_eq!(
            build_precedent_graph(&a).edges,
            build_precedent_graph(&b).edges
        );
    }
}
