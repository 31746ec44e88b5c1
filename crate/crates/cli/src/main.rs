//! Command-line workbook documentation auditor.
//!
//! Data goes to stdout, diagnostics to stderr. Exit codes: 0 clean,
//! 1 findings at warning severity or above, 2 unreadable or malformed
//! input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use sheetdoc::classify::{compute_coverage, CoverageStatus};
use sheetdoc::diff::{diff_workbooks, render_change_table};
use sheetdoc::doc_comment::{parse_date, parse_time, DocFinding, DocOrigin, Severity};
use sheetdoc::ingest::{load_workbook, IngestReport};
use sheetdoc::inventory::{
    find_text, scan_workbook, InventoryRecord, ManifestEntry, ManifestStore, WeightTable,
};
use sheetdoc::reports::{
    build_attribute_map, build_doc_table, collect_records, filter_sort, render_attribute_map,
    render_doc_table, OutputFormat,
};
use sheetdoc::vba::lint_macros;

#[derive(Parser)]
#[command(name = "sheetdoc", version, about = "Workbook documentation auditor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FormatArg {
    /// Output format: csv, md or json
    #[arg(long, default_value = "csv", value_parser = OutputFormat::from_str)]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the per-file metric row and risk score
    Scan {
        /// Workbook files (.xlsx or fixture text)
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// JSON weight table for the risk score
        #[arg(long, env = "SHEETDOC_WEIGHTS")]
        weights: Option<PathBuf>,
        /// Concurrent file scans (defaults to available parallelism)
        #[arg(long)]
        jobs: Option<usize>,
        /// Count cells containing this text (fills the Find/Where columns)
        #[arg(long)]
        grep: Option<String>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Validate documentation comments, macros and coverage
    DocCheck {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Build the standardized documentation table
    Report {
        input: PathBuf,
        /// Exact-match filter, e.g. --filter type=Formula
        #[arg(long)]
        filter: Option<String>,
        /// Sort keys in order, e.g. --sort date,time
        #[arg(long)]
        sort: Option<String>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Map one record field over the documented cells
    Map {
        input: PathBuf,
        /// Record field to map (e.g. update, author, type)
        #[arg(long)]
        field: String,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Diff two workbook versions into change records
    Diff {
        old: PathBuf,
        new: PathBuf,
        /// Align rows by content before comparing
        #[arg(long)]
        align_rows: bool,
        /// Author recorded in the change table
        #[arg(long, default_value = "unknown")]
        who: String,
        /// Timestamp recorded in the change table (ISO or M/D/YYYY H:MM AM)
        #[arg(long)]
        when: Option<String>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Lint macro modules only
    MacroCheck {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Record a file version in the inventory manifest
    Manifest {
        input: PathBuf,
        /// Manifest store file (JSON lines, append-only)
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        author: Option<String>,
        #[arg(long)]
        purpose: Option<String>,
        /// Lifecycle type: Current/Active/Standby/Archive/Backup
        #[arg(long = "type")]
        lifecycle: Option<String>,
        /// Security: Secret/Confidential/Private/Colleagues/Entity/Public
        #[arg(long)]
        security: Option<String>,
        /// Access: Unique/Restricted/Unrestricted
        #[arg(long)]
        access: Option<String>,
        /// Reason of change: Creation/Modification/Update/Addition/Deletion
        #[arg(long)]
        reason: Option<String>,
        #[command(flatten)]
        format: FormatArg,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path) -> Result<IngestReport> {
    let report = load_workbook(path).with_context(|| format!("loading {}", path.display()))?;
    for obs in &report.observations {
        eprintln!("note: {}: {obs}", path.display());
    }
    Ok(report)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Scan {
            inputs,
            weights,
            jobs,
            grep,
            format,
        } => scan(inputs, weights, jobs, grep, format.format),
        Command::DocCheck { inputs, format } => doc_check(inputs, format.format, false),
        Command::MacroCheck { inputs, format } => doc_check(inputs, format.format, true),
        Command::Report {
            input,
            filter,
            sort,
            format,
        } => report(&input, filter.as_deref(), sort.as_deref(), format.format),
        Command::Map {
            input,
            field,
            format,
        } => map(&input, &field, format.format),
        Command::Diff {
            old,
            new,
            align_rows,
            who,
            when,
            format,
        } => diff(&old, &new, align_rows, &who, when.as_deref(), format.format),
        Command::Manifest {
            input,
            store,
            author,
            purpose,
            lifecycle,
            security,
            access,
            reason,
            format,
        } => manifest(
            &input,
            &store,
            author,
            purpose,
            lifecycle,
            security,
            access,
            reason,
            format.format,
        ),
    }
}

// ---------------------------------------------------------------------
// scan

fn scan(
    inputs: Vec<PathBuf>,
    weights_path: Option<PathBuf>,
    jobs: Option<usize>,
    grep: Option<String>,
    format: OutputFormat,
) -> Result<u8> {
    let weights = match &weights_path {
        Some(path) => WeightTable::load(path)?,
        None => WeightTable::default(),
    };

    let jobs = jobs
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|p| p.get())
                .unwrap_or(1)
        })
        .clamp(1, inputs.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<InventoryRecord>)>> = Mutex::new(Vec::new());

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = inputs.get(idx) else { break };
                let result = load(path).map(|loaded| {
                    let mut record = scan_workbook(&loaded.workbook, &weights);
                    record.observations.extend(loaded.observations);
                    if let Some(pattern) = &grep {
                        let found = find_text(&loaded.workbook, pattern);
                        record.find_count = Some(found.count);
                        record.find_where = found.where_location.map(|l| l.to_string());
                    }
                    record
                });
                results.lock().unwrap().push((idx, result));
            });
        }
    });

    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(idx, _)| *idx);
    let mut records = Vec::new();
    for (_, result) in results {
        records.push(result?);
    }
    // Output is ordered by path regardless of input or completion order.
    records.sort_by(|a, b| a.full_path.cmp(&b.full_path));

    match format {
        OutputFormat::Json => {
            println!("{}", serde_json::to_string_pretty(&records)?);
        }
        OutputFormat::Csv | OutputFormat::Markdown => {
            let with_find = grep.is_some();
            let header = inventory_columns(with_find);
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| inventory_row(r, with_find))
                .collect();
            print_table(&header, &rows, format);
        }
    }
    Ok(0)
}

fn inventory_columns(with_find: bool) -> Vec<String> {
    let mut cols: Vec<String> = [
        "FullPath",
        "Filename",
        "ScanTime",
        "Size",
        "Created",
        "Accessed",
        "Modified",
        "Attributes",
        "Observations",
        "FileFormat",
        "Contents",
        "Author",
        "Manager",
        "NoLinks",
        "LinkedFiles",
        "Names",
        "Worksheets",
        "CodeLines",
        "Validation",
        "Comments",
        "Constants",
        "Numbers",
        "Formulas",
        "Errors",
        "ErrorVal",
        "TextDate",
        "TextNum",
        "Inconsis",
        "OmitsCells",
        "ULFormula",
        "EmptyRef",
        "UnusualWS",
        "StaleSums",
        "Score",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    if with_find {
        cols.push("Find".to_string());
        cols.push("Where".to_string());
    }
    cols.push("Unavailable".to_string());
    cols
}

fn inventory_row(record: &InventoryRecord, with_find: bool) -> Vec<String> {
    let dt = sheetdoc::inventory::render_optional_datetime;
    let unusual: Vec<String> = record
        .unusual_ws
        .iter()
        .map(|(sheet, flags)| format!("{sheet}: {}", flags.join(", ")))
        .collect();
    let mut row = vec![
        record.full_path.clone(),
        record.filename.clone(),
        sheetdoc::model::render_datetime(record.scan_time),
        record.size.to_string(),
        dt(&record.created),
        dt(&record.accessed),
        dt(&record.modified),
        record.attributes.clone(),
        record.observations.join("; "),
        record.file_format.clone(),
        record.contents.clone().unwrap_or_default(),
        record.author.clone().unwrap_or_default(),
        record.manager.clone().unwrap_or_default(),
        record.n_links.to_string(),
        record.linked_files.join("; "),
        record.names.to_string(),
        record.worksheets.to_string(),
        record.code_lines.to_string(),
        record.validation_cells.to_string(),
        record.comment_cells.to_string(),
        record.constant_cells.to_string(),
        record.numeric_cells.to_string(),
        record.formula_cells.to_string(),
        record.error_formulas.to_string(),
        record.error_values.to_string(),
        record.text_date.to_string(),
        record.text_num.to_string(),
        record.inconsistent_formulas.to_string(),
        record.omits_cells.to_string(),
        record.unlocked_formulas.to_string(),
        record.empty_ref_formulas.to_string(),
        unusual.join("; "),
        record.stale_sums.to_string(),
        sheetdoc::inventory::render_score(record.score),
    ];
    if with_find {
        row.push(record.find_count.map(|c| c.to_string()).unwrap_or_default());
        row.push(record.find_where.clone().unwrap_or_default());
    }
    row.push(record.unavailable.join("; "));
    row
}

// ---------------------------------------------------------------------
// doc-check / macro-check

fn doc_check(inputs: Vec<PathBuf>, format: OutputFormat, macros_only: bool) -> Result<u8> {
    let mut findings: Vec<DocFinding> = Vec::new();
    for input in &inputs {
        let loaded = load(input)?;
        let wb = &loaded.workbook;
        if !macros_only {
            let collection = collect_records(wb, &wb.vba_modules);
            for record in &collection.records {
                let cell = match &record.origin {
                    Some(DocOrigin::Cell { sheet, address }) => {
                        wb.sheet(sheet).and_then(|s| s.cell(*address))
                    }
                    _ => None,
                };
                findings.extend(sheetdoc::doc_comment::validate_doc_record(record, cell));
            }
            // Coverage gaps are informational: they show where
            // documentation is missing without failing the run.
            let coverage = compute_coverage(wb, &collection.records);
            for (sheet, cells) in &coverage.sheets {
                for (addr, cov) in cells {
                    if cov.status == CoverageStatus::Undocumented {
                        findings.push(DocFinding {
                            severity: Severity::Info,
                            code: "undocumented-cell".to_string(),
                            location: DocOrigin::Cell {
                                sheet: sheet.clone(),
                                address: *addr,
                            },
                            message: "cell is not covered by any documentation record".to_string(),
                        });
                    }
                }
            }
        }
        for lint in lint_macros(&wb.vba_modules) {
            findings.push(DocFinding {
                severity: Severity::Warning,
                code: lint.rule.code().to_string(),
                location: DocOrigin::Macro {
                    module: lint.module.clone(),
                    procedure: lint.procedure.clone(),
                },
                message: format!("line {}: {}", lint.line, lint.message),
            });
        }
    }

    print_findings(&findings, format)?;
    if findings.iter().any(|f| f.severity >= Severity::Warning) {
        Ok(1)
    } else {
        Ok(0)
    }
}

fn print_findings(findings: &[DocFinding], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(findings)?),
        OutputFormat::Csv | OutputFormat::Markdown => {
            let header: Vec<String> = ["Severity", "Code", "Location", "Message"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let rows: Vec<Vec<String>> = findings
                .iter()
                .map(|f| {
                    vec![
                        f.severity.label().to_string(),
                        f.code.clone(),
                        f.location.to_string(),
                        f.message.clone(),
                    ]
                })
                .collect();
            print_table(&header, &rows, format);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// report / map

fn report(
    input: &Path,
    filter: Option<&str>,
    sort: Option<&str>,
    format: OutputFormat,
) -> Result<u8> {
    let loaded = load(input)?;
    let table = build_doc_table(&loaded.workbook, &loaded.workbook.vba_modules);
    let filter = match filter {
        Some(spec) => {
            let (field, value) = spec
                .split_once('=')
                .ok_or_else(|| anyhow!("--filter takes field=value, got {spec:?}"))?;
            Some((field, value))
        }
        None => None,
    };
    let sort_keys: Vec<&str> = sort.map(|s| s.split(',').collect()).unwrap_or_default();
    let table = filter_sort(&table, filter, &sort_keys)?;
    if table.unstructured_comments > 0 {
        eprintln!(
            "note: {} unstructured comment(s) not tabulated",
            table.unstructured_comments
        );
    }
    print!("{}", render_doc_table(&table, format));
    Ok(0)
}

fn map(input: &Path, field: &str, format: OutputFormat) -> Result<u8> {
    let loaded = load(input)?;
    let collection = collect_records(&loaded.workbook, &loaded.workbook.vba_modules);
    let map = build_attribute_map(&loaded.workbook, &collection.records, field)?;
    print!("{}", render_attribute_map(&map, format));
    Ok(0)
}

// ---------------------------------------------------------------------
// diff

fn diff(
    old: &Path,
    new: &Path,
    align_rows: bool,
    who: &str,
    when: Option<&str>,
    format: OutputFormat,
) -> Result<u8> {
    let when = match when {
        Some(text) => {
            parse_when(text).ok_or_else(|| anyhow!("cannot parse --when value {text:?}"))?
        }
        None => chrono::Local::now().naive_local(),
    };
    let old_wb = load(old)?.workbook;
    let new_wb = load(new)?.workbook;
    let records = diff_workbooks(&old_wb, &new_wb, who, when, align_rows);
    print!("{}", render_change_table(&records, when, format));
    Ok(0)
}

fn parse_when(text: &str) -> Option<chrono::NaiveDateTime> {
    for pattern in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(text, pattern) {
            return Some(dt);
        }
    }
    // M/D/YYYY H:MM AM style: date token, then the rest is the time.
    let mut parts = text.splitn(2, ' ');
    let date = parse_date(parts.next()?)?;
    match parts.next() {
        Some(rest) => Some(date.and_time(parse_time(rest)?)),
        None => Some(date.and_time(chrono::NaiveTime::MIN)),
    }
}

// ---------------------------------------------------------------------
// manifest

#[allow(clippy::too_many_arguments)]
fn manifest(
    input: &Path,
    store_path: &Path,
    author: Option<String>,
    purpose: Option<String>,
    lifecycle: Option<String>,
    security: Option<String>,
    access: Option<String>,
    reason: Option<String>,
    format: OutputFormat,
) -> Result<u8> {
    let loaded = load(input)?;
    let mut entry = ManifestEntry::from_workbook(&loaded.workbook);
    if author.is_some() {
        entry.author = author;
    }
    entry.purpose = purpose;
    entry.lifecycle = lifecycle.as_deref().map(str::parse).transpose()?;
    entry.security = security.as_deref().map(str::parse).transpose()?;
    entry.access = access.as_deref().map(str::parse).transpose()?;
    entry.reason_of_change = reason.as_deref().map(str::parse).transpose()?;

    ManifestStore::append_line(store_path, &entry)?;
    let store = ManifestStore::load(store_path)?;

    match format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&store.entries)?),
        OutputFormat::Csv | OutputFormat::Markdown => {
            let header: Vec<String> = [
                "PathAndName",
                "Timestamp",
                "Attribute",
                "Size",
                "Author",
                "Purpose",
                "Type",
                "Security",
                "Access",
                "ReasonOfChange",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            let rows: Vec<Vec<String>> = store
                .entries
                .iter()
                .map(|e| {
                    vec![
                        e.path_and_name.clone(),
                        sheetdoc::model::render_datetime(e.timestamp),
                        e.attribute.to_string(),
                        e.size.to_string(),
                        e.author.clone().unwrap_or_default(),
                        e.purpose.clone().unwrap_or_default(),
                        e.lifecycle.map(|v| v.to_string()).unwrap_or_default(),
                        e.security.map(|v| v.to_string()).unwrap_or_default(),
                        e.access.map(|v| v.to_string()).unwrap_or_default(),
                        e.reason_of_change
                            .map(|v| v.to_string())
                            .unwrap_or_default(),
                    ]
                })
                .collect();
            print_table(&header, &rows, format);
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------
// table printing

fn print_table(header: &[String], rows: &[Vec<String>], format: OutputFormat) {
    match format {
        OutputFormat::Csv => {
            println!("{}", csv_row(header));
            for row in rows {
                println!("{}", csv_row(row));
            }
        }
        OutputFormat::Markdown => {
            println!("| {} |", header.join(" | "));
            println!("|{}", " --- |".repeat(header.len()));
            for row in rows {
                let escaped: Vec<String> = row.iter().map(|v| v.replace('|', "\\|")).collect();
                println!("| {} |", escaped.join(" | "));
            }
        }
        OutputFormat::Json => unreachable!("json paths serialize directly"),
    }
}

fn csv_row(values: &[String]) -> String {
    values
        .iter()
        .map(|v| {
            if v.contains(',') || v.contains('"') || v.contains('\n') {
                format!("\"{}\"", v.replace('"', "\"\""))
            } else {
                v.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}
