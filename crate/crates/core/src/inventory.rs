//! Per-file metric row, additive risk score, and the file manifest.
//!
//! The metric row counts what is statically observable in the file:
//! cells/formulas/comments/validation, formulas evaluating to errors,
//! text cells that look like dates or numbers, region-inconsistent
//! formulas, formulas that omit an adjacent numeric cell, unlocked
//! formulas, references to empty cells, and stale cached SUM totals.
//! The score is a weighted sum over the risk metrics; live-application
//! facts (routing slips, add-in state, signatures, Lotus settings,
//! multi-user editing) are reported as unavailable, never guessed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::CellLocation;
use crate::formula::{parse_formula, Expr, FormulaAst};
use crate::model::{
    attributes_text, render_number, CellAddress, CellContent, CellRange, Scalar, Sheet,
    SheetVisibility, Workbook,
};

#[derive(Debug, Error)]
pub enum InventoryError {
    #[error("invalid {field} value {value:?} (expected one of {expected})")]
    InvalidEnumValue {
        field: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad weight table: {0}")]
    BadWeightTable(String),
    #[error("manifest line {line} is not a valid entry: {detail}")]
    BadManifestLine { line: usize, detail: String },
}

/// Metric names that participate in the risk score.
pub const RISK_METRICS: [&str; 9] = [
    "error_formulas",
    "error_values",
    "inconsistent_formulas",
    "omits_cells",
    "unlocked_formulas",
    "empty_ref_formulas",
    "text_date",
    "text_num",
    "stale_sums",
];

/// Columns that cannot be derived from static file content.
pub const UNAVAILABLE_METRICS: [&str; 7] = [
    "NeedRecalc",
    "RoutingSlip",
    "AddInState",
    "DigitalSignature",
    "LotusSettings",
    "MultiUserEditing",
    "Backup",
];

/// Weight per risk metric. Defaults to 1.0 for each risk metric,
/// making the score a plain count of risk factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable(pub BTreeMap<String, f64>);

impl Default for WeightTable {
    fn default() -> Self {
        WeightTable(RISK_METRICS.iter().map(|m| (m.to_string(), 1.0)).collect())
    }
}

impl WeightTable {
    pub fn weight(&self, metric: &str) -> f64 {
        self.0.get(metric).copied().unwrap_or(0.0)
    }

    pub fn load(path: &Path) -> Result<Self, InventoryError> {
        let text = std::fs::read_to_string(path).map_err(|source| InventoryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let map: BTreeMap<String, f64> = serde_json::from_str(&text)
            .map_err(|e| InventoryError::BadWeightTable(e.to_string()))?;
        for (key, value) in &map {
            if !RISK_METRICS.contains(&key.as_str()) {
                return Err(InventoryError::BadWeightTable(format!(
                    "unknown metric {key:?}"
                )));
            }
            if *value < 0.0 {
                return Err(InventoryError::BadWeightTable(format!(
                    "metric {key:?} has a negative weight"
                )));
            }
        }
        Ok(WeightTable(map))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        WeightTable(
            self.0
                .iter()
                .map(|(k, v)| (k.clone(), v * factor))
                .collect(),
        )
    }
}

/// The per-file metric row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InventoryRecord {
    pub full_path: String,
    pub filename: String,
    pub scan_time: NaiveDateTime,
    pub size: u64,
    pub created: Option<NaiveDateTime>,
    pub accessed: Option<NaiveDateTime>,
    pub modified: Option<NaiveDateTime>,
    pub attributes: String,
    pub observations: Vec<String>,
    pub file_format: String,
    /// Cached value of A1 on the first sheet, for identification.
    pub contents: Option<String>,
    pub author: Option<String>,
    pub manager: Option<String>,
    pub n_links: usize,
    pub linked_files: Vec<String>,
    pub names: usize,
    pub worksheets: usize,
    pub code_lines: usize,
    pub validation_cells: usize,
    pub comment_cells: usize,
    pub constant_cells: usize,
    pub numeric_cells: usize,
    pub formula_cells: usize,
    pub error_formulas: usize,
    pub error_values: usize,
    pub text_date: usize,
    pub text_num: usize,
    pub inconsistent_formulas: usize,
    pub omits_cells: usize,
    pub unlocked_formulas: usize,
    pub empty_ref_formulas: usize,
    pub unusual_ws: BTreeMap<String, Vec<String>>,
    pub stale_sums: usize,
    pub score: f64,
    /// Text-search results when a scan pattern was supplied.
    pub find_count: Option<usize>,
    pub find_where: Option<String>,
    pub unavailable: Vec<String>,
}

/// Compute the full metric row for one loaded workbook.
pub fn scan_workbook(wb: &Workbook, weights: &WeightTable) -> InventoryRecord {
    let mut validation_cells = 0;
    let mut comment_cells = 0;
    let mut constant_cells = 0;
    let mut numeric_cells = 0;
    let mut formula_cells = 0;
    let mut error_formulas = 0;
    let mut error_values = 0;
    let mut unlocked_formulas = 0;

    for sheet in &wb.sheets {
        for cell in sheet.cells() {
            if cell.has_validation {
                validation_cells += 1;
            }
            if cell.comment.is_some() {
                comment_cells += 1;
            }
            match &cell.content {
                CellContent::Text(_) | CellContent::Date(_) => constant_cells += 1,
                CellContent::Number(_) => {
                    constant_cells += 1;
                    numeric_cells += 1;
                }
                CellContent::Formula(_) => {
                    formula_cells += 1;
                    if !cell.locked {
                        unlocked_formulas += 1;
                    }
                    if cell.cached_value.as_ref().is_some_and(Scalar::is_error) {
                        error_formulas += 1;
                    }
                }
                CellContent::Empty => {}
            }
            if cell.cached_value.as_ref().is_some_and(Scalar::is_error) {
                error_values += 1;
            }
        }
    }

    let consistency = count_inconsistent(wb);
    let omits = count_omits(wb);
    let lookalikes = count_text_lookalikes(wb);
    let empty_refs = count_empty_refs(wb);
    let stale = check_stale_sums(wb);

    let mut unusual_ws = BTreeMap::new();
    for sheet in &wb.sheets {
        let mut flags: Vec<String> = sheet.flags.iter().map(|f| f.label().to_string()).collect();
        if sheet.protected {
            flags.push("Protected".to_string());
        }
        if sheet.visibility != SheetVisibility::Visible {
            flags.push("Hidden / Very Hidden".to_string());
        }
        if !flags.is_empty() {
            flags.sort();
            unusual_ws.insert(sheet.name.clone(), flags);
        }
    }

    let contents = wb
        .sheets
        .first()
        .and_then(|s| s.cell(CellAddress::new(1, 1)))
        .map(|c| match &c.cached_value {
            Some(v) => v.canonical_text(),
            None => c.content.canonical_text(),
        });

    let mut record = InventoryRecord {
        full_path: wb.source_path.clone(),
        filename: wb.filename(),
        scan_time: chrono::Utc::now().naive_utc(),
        size: wb.file_meta.size_bytes,
        created: wb.file_meta.created,
        accessed: wb.file_meta.accessed,
        modified: wb.file_meta.modified,
        attributes: attributes_text(&wb.file_meta.attributes),
        observations: Vec::new(),
        file_format: wb.file_meta.file_format.clone(),
        contents,
        author: wb.file_meta.author_property.clone(),
        manager: wb.file_meta.manager_property.clone(),
        n_links: wb.external_links.len(),
        linked_files: wb.external_links.clone(),
        names: wb.defined_names.len(),
        worksheets: wb.sheets.len(),
        code_lines: wb.vba_modules.iter().map(|m| m.line_count()).sum(),
        validation_cells,
        comment_cells,
        constant_cells,
        numeric_cells,
        formula_cells,
        error_formulas,
        error_values,
        text_date: lookalikes.dates.len(),
        text_num: lookalikes.numbers.len(),
        inconsistent_formulas: consistency.hits.len(),
        omits_cells: omits.len(),
        unlocked_formulas,
        empty_ref_formulas: empty_refs.len(),
        unusual_ws,
        stale_sums: stale.len(),
        score: 0.0,
        find_count: None,
        find_where: None,
        unavailable: UNAVAILABLE_METRICS.iter().map(|m| m.to_string()).collect(),
    };
    record.observations = consistency.observations;
    record.score = score_of(&record, weights);
    record
}

fn score_of(record: &InventoryRecord, weights: &WeightTable) -> f64 {
    let metrics: [(&str, usize); 9] = [
        ("error_formulas", record.error_formulas),
        ("error_values", record.error_values),
        ("inconsistent_formulas", record.inconsistent_formulas),
        ("omits_cells", record.omits_cells),
        ("unlocked_formulas", record.unlocked_formulas),
        ("empty_ref_formulas", record.empty_ref_formulas),
        ("text_date", record.text_date),
        ("text_num", record.text_num),
        ("stale_sums", record.stale_sums),
    ];
    metrics
        .iter()
        .map(|(name, count)| weights.weight(name) * *count as f64)
        .sum()
}

// ---------------------------------------------------------------------
// Region consistency

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConsistencyReport {
    pub hits: Vec<CellLocation>,
    pub observations: Vec<String>,
}

/// Count formulas inconsistent with the region they are in.
///
/// A region is a maximal run of at least three contiguous formula cells
/// along a column (and, independently, along a row). Within a region the
/// strict-majority relative normal form is the reference; every formula
/// differing from it counts once. A region with no strict majority
/// counts nothing and leaves an observation.
pub fn count_inconsistent(wb: &Workbook) -> ConsistencyReport {
    let mut report = ConsistencyReport::default();
    let mut flagged: BTreeSet<CellLocation> = BTreeSet::new();

    for sheet in &wb.sheets {
        // Normal forms of every formula cell that parses.
        let mut normal_forms: BTreeMap<CellAddress, String> = BTreeMap::new();
        for cell in sheet.cells() {
            if let Some(text) = cell.formula_text() {
                match parse_formula(text) {
                    Ok(ast) => {
                        normal_forms.insert(cell.address, ast.relative_normal_form(cell.address));
                    }
                    Err(e) => report.observations.push(format!(
                        "{}!{}: formula skipped: {e}",
                        sheet.name,
                        cell.address.render_a1()
                    )),
                }
            }
        }

        let columns: BTreeSet<u32> = normal_forms.keys().map(|a| a.col).collect();
        for col in columns {
            let mut rows: Vec<u32> = normal_forms
                .keys()
                .filter(|a| a.col == col)
                .map(|a| a.row)
                .collect();
            rows.sort_unstable();
            for run in contiguous_runs(&rows) {
                let addrs: Vec<CellAddress> =
                    run.iter().map(|row| CellAddress::new(*row, col)).collect();
                judge_region(
                    sheet,
                    &addrs,
                    &normal_forms,
                    &mut flagged,
                    &mut report.observations,
                );
            }
        }
        let rows: BTreeSet<u32> = normal_forms.keys().map(|a| a.row).collect();
        for row in rows {
            let mut cols: Vec<u32> = normal_forms
                .keys()
                .filter(|a| a.row == row)
                .map(|a| a.col)
                .collect();
            cols.sort_unstable();
            for run in contiguous_runs(&cols) {
                let addrs: Vec<CellAddress> =
                    run.iter().map(|col| CellAddress::new(row, *col)).collect();
                judge_region(
                    sheet,
                    &addrs,
                    &normal_forms,
                    &mut flagged,
                    &mut report.observations,
                );
            }
        }
    }

    report.hits = flagged.into_iter().collect();
    report
}

const REGION_MIN: usize = 3;

fn contiguous_runs(sorted: &[u32]) -> Vec<Vec<u32>> {
    let mut runs = Vec::new();
    let mut current: Vec<u32> = Vec::new();
    for &v in sorted {
        if current.last().is_some_and(|&last| v == last + 1) || current.is_empty() {
            current.push(v);
        } else {
            runs.push(std::mem::take(&mut current));
            current.push(v);
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs.retain(|r| r.len() >= REGION_MIN);
    runs
}

fn judge_region(
    sheet: &Sheet,
    addrs: &[CellAddress],
    normal_forms: &BTreeMap<CellAddress, String>,
    flagged: &mut BTreeSet<CellLocation>,
    observations: &mut Vec<String>,
) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for addr in addrs {
        *counts.entry(normal_forms[addr].as_str()).or_default() += 1;
    }
    let majority = counts
        .iter()
        .find(|(_, &n)| n * 2 > addrs.len())
        .map(|(form, _)| *form);
    match majority {
        Some(reference) => {
            for addr in addrs {
                if normal_forms[addr] != reference {
                    flagged.insert(CellLocation {
                        sheet: sheet.name.clone(),
                        address: *addr,
                    });
                }
            }
        }
        None => observations.push(format!(
            "{}!{}:{}: formula region has no majority form",
            sheet.name,
            addrs.first().unwrap().render_a1(),
            addrs.last().unwrap().render_a1()
        )),
    }
}

// ---------------------------------------------------------------------
// Omitted adjacent cells

/// Count formulas that omit nearby cells: a single-column or single-row
/// range argument whose immediately adjacent cell, on the side toward
/// the formula, is a numeric constant not referenced anywhere in the
/// formula.
pub fn count_omits(wb: &Workbook) -> Vec<CellLocation> {
    let mut hits = Vec::new();
    for sheet in &wb.sheets {
        for cell in sheet.cells() {
            let Some(text) = cell.formula_text() else {
                continue;
            };
            let Ok(ast) = parse_formula(text) else {
                continue;
            };
            let Ok(refs) = ast.extract_references(cell.address) else {
                continue;
            };
            let same_sheet: Vec<CellRange> = refs
                .internal
                .iter()
                .filter(|(s, _)| s.is_none() || s.as_deref() == Some(sheet.name.as_str()))
                .map(|(_, r)| *r)
                .collect();
            let mut omits = false;
            for (qualifier, range) in ast.range_references(cell.address) {
                if qualifier.is_external() || qualifier.sheet.is_some() {
                    continue;
                }
                let Some(adjacent) = adjacent_toward(&range, cell.address) else {
                    continue;
                };
                let is_omitted_numeric = sheet
                    .cell(adjacent)
                    .is_some_and(|c| matches!(c.content, CellContent::Number(_)))
                    && !same_sheet.iter().any(|r| r.contains(adjacent));
                if is_omitted_numeric {
                    omits = true;
                    break;
                }
            }
            if omits {
                hits.push(CellLocation {
                    sheet: sheet.name.clone(),
                    address: cell.address,
                });
            }
        }
    }
    hits
}

fn adjacent_toward(range: &CellRange, formula: CellAddress) -> Option<CellAddress> {
    if range.is_single_column() && formula.col == range.start.col {
        if formula.row > range.end.row {
            return Some(CellAddress::new(range.end.row + 1, range.start.col));
        }
        if formula.row < range.start.row && range.start.row > 1 {
            return Some(CellAddress::new(range.start.row - 1, range.start.col));
        }
    }
    if range.is_single_row() && formula.row == range.start.row {
        if formula.col > range.end.col {
            return Some(CellAddress::new(range.start.row, range.end.col + 1));
        }
        if formula.col < range.start.col && range.start.col > 1 {
            return Some(CellAddress::new(range.start.row, range.start.col - 1));
        }
    }
    None
}

// ---------------------------------------------------------------------
// Text lookalikes

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TextLookalikes {
    pub dates: Vec<CellLocation>,
    pub numbers: Vec<CellLocation>,
}

/// Text constants that resemble dates or numbers. A cell matching both
/// counts as a date only.
pub fn count_text_lookalikes(wb: &Workbook) -> TextLookalikes {
    let mut result = TextLookalikes::default();
    for sheet in &wb.sheets {
        for cell in sheet.cells() {
            let CellContent::Text(text) = &cell.content else {
                continue;
            };
            let location = CellLocation {
                sheet: sheet.name.clone(),
                address: cell.address,
            };
            if looks_like_date(text) {
                result.dates.push(location);
            } else if looks_like_number(text) {
                result.numbers.push(location);
            }
        }
    }
    result
}

pub(crate) fn looks_like_number(text: &str) -> bool {
    let mut t = text.trim();
    if t.is_empty() {
        return false;
    }
    for currency in ['$', '€', '£', '¥'] {
        if let Some(rest) = t.strip_prefix(currency) {
            t = rest.trim_start();
            break;
        }
    }
    let t = t.strip_prefix('-').unwrap_or(t);
    if t.is_empty() {
        return false;
    }
    let (int_part, frac_part) = match t.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (t, None),
    };
    if let Some(frac) = frac_part {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return false;
        }
    }
    if int_part.is_empty() {
        return frac_part.is_some();
    }
    if int_part.contains(',') {
        let groups: Vec<&str> = int_part.split(',').collect();
        if groups[0].is_empty() || groups[0].len() > 3 {
            return false;
        }
        if !groups[0].bytes().all(|b| b.is_ascii_digit()) {
            return false;
        }
        return groups[1..]
            .iter()
            .all(|g| g.len() == 3 && g.bytes().all(|b| b.is_ascii_digit()));
    }
    int_part.bytes().all(|b| b.is_ascii_digit())
}

pub(crate) fn looks_like_date(text: &str) -> bool {
    let t = text.trim();
    if crate::doc_comment::parse_date(t).is_some() {
        return true;
    }
    // D-Mon-Y: 20-Feb-2006, 1-Jan-06.
    let parts: Vec<&str> = t.split('-').collect();
    if parts.len() == 3 {
        let day_ok =
            parts[0].len() <= 2 && parts[0].parse::<u32>().is_ok_and(|d| (1..=31).contains(&d));
        let months = [
            "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
        ];
        let mon_ok = months.contains(&parts[1].to_ascii_lowercase().as_str());
        let year_ok = matches!(parts[2].len(), 2 | 4) && parts[2].parse::<u32>().is_ok();
        if day_ok && mon_ok && year_ok {
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------
// Empty references

/// Count formulas referencing empty cells: any single-cell reference, or
/// any corner of a referenced range, resolving to an empty cell.
pub fn count_empty_refs(wb: &Workbook) -> Vec<CellLocation> {
    let mut hits = Vec::new();
    for sheet in &wb.sheets {
        for cell in sheet.cells() {
            let Some(text) = cell.formula_text() else {
                continue;
            };
            let Ok(ast) = parse_formula(text) else {
                continue;
            };
            let Ok(refs) = ast.extract_references(cell.address) else {
                continue;
            };
            let mut empty = false;
            for (ref_sheet, range) in &refs.internal {
                let target = match ref_sheet {
                    None => Some(sheet),
                    Some(name) => wb.sheet(name),
                };
                let Some(target) = target else { continue };
                let corners = [
                    range.start,
                    range.end,
                    CellAddress::new(range.start.row, range.end.col),
                    CellAddress::new(range.end.row, range.start.col),
                ];
                if corners.iter().any(|c| target.is_empty_at(*c)) {
                    empty = true;
                    break;
                }
            }
            if empty {
                hits.push(CellLocation {
                    sheet: sheet.name.clone(),
                    address: cell.address,
                });
            }
        }
    }
    hits
}

// ---------------------------------------------------------------------
// Stale sums

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaleSum {
    pub location: CellLocation,
    pub cached: f64,
    pub recomputed: f64,
}

/// Tolerance absorbing currency rounding in cached totals.
pub const STALE_SUM_TOLERANCE: f64 = 0.005;

/// Recompute SUM formulas of the exact shape `SUM(<one contiguous range
/// of numeric constants>)` and flag those whose cached value disagrees
/// beyond the tolerance. The file-observable symptom of manual
/// calculation mode.
pub fn check_stale_sums(wb: &Workbook) -> Vec<StaleSum> {
    let mut hits = Vec::new();
    for sheet in &wb.sheets {
        for cell in sheet.cells() {
            let Some(text) = cell.formula_text() else {
                continue;
            };
            let Some(cached) = cell.cached_value.as_ref() else {
                continue;
            };
            let Scalar::Number(cached) = cached else {
                continue;
            };
            let Ok(ast) = parse_formula(text) else {
                continue;
            };
            if !is_sum_over_single_range(&ast) {
                continue;
            }
            let ranges = ast.range_references(cell.address);
            let Some((qualifier, range)) = ranges.first() else {
                continue;
            };
            if qualifier.is_external() || qualifier.sheet.is_some() {
                continue;
            }
            let range = *range;

            let mut total = 0.0;
            let mut all_numeric = true;
            for addr in range.iter() {
                match sheet.cell(addr).map(|c| &c.content) {
                    Some(CellContent::Number(n)) => total += n,
                    _ => {
                        all_numeric = false;
                        break;
                    }
                }
            }
            if !all_numeric {
                continue;
            }
            if (total - cached).abs() > STALE_SUM_TOLERANCE {
                hits.push(StaleSum {
                    location: CellLocation {
                        sheet: sheet.name.clone(),
                        address: cell.address,
                    },
                    cached: *cached,
                    recomputed: total,
                });
            }
        }
    }
    hits
}

fn is_sum_over_single_range(ast: &FormulaAst) -> bool {
    match &ast.root {
        Expr::Call { name, args } if name.eq_ignore_ascii_case("SUM") && args.len() == 1 => {
            matches!(
                &args[0],
                Expr::Range { qualifier, .. }
                    if !qualifier.is_external() && qualifier.sheet.is_none()
            )
        }
        _ => false,
    }
}

// ---------------------------------------------------------------------
// Text search (the Find/Where columns)

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FindResult {
    pub count: usize,
    /// Location of the matching cell with the longest formula.
    pub where_location: Option<CellLocation>,
}

pub fn find_text(wb: &Workbook, pattern: &str) -> FindResult {
    let needle = pattern.to_lowercase();
    let mut count = 0;
    let mut best: Option<(usize, CellLocation)> = None;
    for sheet in &wb.sheets {
        for cell in sheet.cells() {
            let haystack = match &cell.content {
                CellContent::Formula(f) => f.clone(),
                other => other.canonical_text(),
            };
            if haystack.to_lowercase().contains(&needle) {
                count += 1;
                let formula_len = cell.formula_text().map(str::len).unwrap_or(0);
                let location = CellLocation {
                    sheet: sheet.name.clone(),
                    address: cell.address,
                };
                if best.as_ref().is_none_or(|(len, _)| formula_len > *len) {
                    best = Some((formula_len, location));
                }
            }
        }
    }
    FindResult {
        count,
        where_location: best.map(|(_, loc)| loc),
    }
}

// ---------------------------------------------------------------------
// Manifest

macro_rules! manifest_enum {
    ($name:ident, $field:literal, $expected:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn as_str(&self) -> &'static str {
                match self {
                    $(Self::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = InventoryError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $(
                    if s.eq_ignore_ascii_case($text) {
                        return Ok(Self::$variant);
                    }
                )+
                Err(InventoryError::InvalidEnumValue {
                    field: $field,
                    value: s.to_string(),
                    expected: $expected,
                })
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

manifest_enum!(ManifestAttribute, "attribute", "read-write/read-only/archive/hide", {
    ReadWrite => "read-write",
    ReadOnly => "read-only",
    Archive => "archive",
    Hide => "hide",
});

manifest_enum!(LifecycleType, "type", "Current/Active/Standby/Archive/Backup", {
    Current => "Current",
    Active => "Active",
    Standby => "Standby",
    Archive => "Archive",
    Backup => "Backup",
});

manifest_enum!(SecurityClass, "security", "Secret/Confidential/Private/Colleagues/Entity/Public", {
    Secret => "Secret",
    Confidential => "Confidential",
    Private => "Private",
    Colleagues => "Colleagues",
    Entity => "Entity",
    Public => "Public",
});

manifest_enum!(AccessClass, "access", "Unique/Restricted/Unrestricted", {
    Unique => "Unique",
    Restricted => "Restricted",
    Unrestricted => "Unrestricted",
});

manifest_enum!(ChangeReason, "reason", "Creation/Modification/Update/Addition/Deletion", {
    Creation => "Creation",
    Modification => "Modification",
    Update => "Update",
    Addition => "Addition",
    Deletion => "Deletion",
});

/// One manifest row. Computed fields come from the file; manual fields
/// are supplied by the author and survive upserts unless re-supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path_and_name: String,
    pub timestamp: NaiveDateTime,
    pub attribute: ManifestAttribute,
    pub size: u64,
    pub author: Option<String>,
    pub purpose: Option<String>,
    pub lifecycle: Option<LifecycleType>,
    pub security: Option<SecurityClass>,
    pub access: Option<AccessClass>,
    pub reason_of_change: Option<ChangeReason>,
}

impl ManifestEntry {
    pub fn from_workbook(wb: &Workbook) -> Self {
        let attribute = if wb
            .file_meta
            .attributes
            .contains(&crate::model::FileAttribute::ReadOnly)
        {
            ManifestAttribute::ReadOnly
        } else if wb
            .file_meta
            .attributes
            .contains(&crate::model::FileAttribute::Hidden)
        {
            ManifestAttribute::Hide
        } else if wb
            .file_meta
            .attributes
            .contains(&crate::model::FileAttribute::Archive)
        {
            ManifestAttribute::Archive
        } else {
            ManifestAttribute::ReadWrite
        };
        ManifestEntry {
            path_and_name: wb.source_path.clone(),
            timestamp: wb
                .file_meta
                .modified
                .unwrap_or_else(|| chrono::Utc::now().naive_utc()),
            attribute,
            size: wb.file_meta.size_bytes,
            author: wb.file_meta.author_property.clone(),
            purpose: None,
            lifecycle: None,
            security: None,
            access: None,
            reason_of_change: None,
        }
    }

    fn key(&self) -> (String, NaiveDateTime) {
        (self.path_and_name.clone(), self.timestamp)
    }
}

/// The folded view of the append-only manifest file (JSON lines, one
/// entry per line; re-upserts of the same path+timestamp merge).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ManifestStore {
    pub entries: Vec<ManifestEntry>,
}

impl ManifestStore {
    pub fn load(path: &Path) -> Result<Self, InventoryError> {
        let mut store = ManifestStore::default();
        let text = match std::fs::read_to_string(path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(store),
            Err(source) => {
                return Err(InventoryError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry =
                serde_json::from_str(line).map_err(|e| InventoryError::BadManifestLine {
                    line: idx + 1,
                    detail: e.to_string(),
                })?;
            store.upsert(entry);
        }
        Ok(store)
    }

    /// Merge an entry: same path+timestamp refreshes computed fields and
    /// replaces only the manual fields that are supplied; a new key is
    /// appended. History is never removed.
    pub fn upsert(&mut self, entry: ManifestEntry) {
        match self.entries.iter_mut().find(|e| e.key() == entry.key()) {
            Some(existing) => {
                existing.attribute = entry.attribute;
                existing.size = entry.size;
                merge(&mut existing.author, entry.author);
                merge(&mut existing.purpose, entry.purpose);
                merge(&mut existing.lifecycle, entry.lifecycle);
                merge(&mut existing.security, entry.security);
                merge(&mut existing.access, entry.access);
                merge(&mut existing.reason_of_change, entry.reason_of_change);
            }
            None => self.entries.push(entry),
        }
    }

    /// Append one raw entry line to the store file.
    pub fn append_line(path: &Path, entry: &ManifestEntry) -> Result<(), InventoryError> {
        let io_err = |source| InventoryError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        let line = serde_json::to_string(entry).expect("manifest entries serialize");
        writeln!(file, "{line}").map_err(io_err)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn merge<T>(slot: &mut Option<T>, incoming: Option<T>) {
    if incoming.is_some() {
        *slot = incoming;
    }
}

pub fn render_optional_datetime(value: &Option<NaiveDateTime>) -> String {
    value.map(crate::model::render_datetime).unwrap_or_default()
}

pub fn render_score(score: f64) -> String {
    render_number(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_fixture;
    use crate::model::Cell;

    fn wb(text: &str) -> Workbook {
        parse_fixture(text, "test.fixture").unwrap()
    }

    const RECEIPTS: &str = "\
SHEET Sheet1
CELL A1 TYPE text VALUE Items
CELL A2 TYPE num VALUE 1385.45 FORMAT Currency VALIDATED
CELL A3 TYPE num VALUE 1545.65 FORMAT Currency VALIDATED
CELL A4 TYPE num VALUE 1325.30 FORMAT Currency VALIDATED
CELL A5 TYPE num VALUE 1995.00 FORMAT Currency VALIDATED
CELL A6 TYPE num VALUE 2055.90 FORMAT Currency VALIDATED
CELL A7 TYPE num VALUE 2585.25 FORMAT Currency VALIDATED
CELL A8 TYPE num VALUE 1695.50 FORMAT Currency VALIDATED
CELL A9 TYPE num VALUE 1660.75 FORMAT Currency VALIDATED
CELL A10 TYPE num VALUE 1998.10 FORMAT Currency VALIDATED
CELL A12 TYPE formula VALUE 16246.90 FORMULA =SUM(A2:A10) FORMAT Currency-rounded
COMMENT A1 <<<
c1
>>>
COMMENT A2 <<<
c2
>>>
COMMENT A12 <<<
c3
>>>
";

    #[test]
    fn receipts_fixture_counts() {
        // Manual count oracle over the fixture: one text cell, nine
        // numeric cells, one SUM formula, three comments.
        let record = scan_workbook(&wb(RECEIPTS), &WeightTable::default());
        assert_eq!(record.worksheets, 1);
        assert_eq!(record.constant_cells, 10);
        assert_eq!(record.numeric_cells, 9);
        assert_eq!(record.formula_cells, 1);
        assert_eq!(record.comment_cells, 3);
        assert_eq!(record.validation_cells, 9);
        assert_eq!(record.names, 0);
        assert_eq!(record.n_links, 0);
        assert_eq!(record.error_formulas, 0);
        assert_eq!(record.stale_sums, 0);
        assert_eq!(record.omits_cells, 0);
        assert_eq!(record.empty_ref_formulas, 0);
        assert_eq!(record.contents.as_deref(), Some("Items"));
        // The formula is unlocked in this fixture, which is the only
        // risk factor.
        assert_eq!(record.score, 1.0);
    }

    #[test]
    fn empty_workbook_scores_zero() {
        let record = scan_workbook(&wb("SHEET S\n"), &WeightTable::default());
        assert_eq!(record.constant_cells, 0);
        assert_eq!(record.formula_cells, 0);
        assert_eq!(record.score, 0.0);
    }

    #[test]
    fn error_formula_counts_in_both_error_metrics() {
        let record = scan_workbook(
            &wb("SHEET S\nCELL A1 TYPE formula VALUE #DIV/0! FORMULA =1/0 LOCKED\n"),
            &WeightTable::default(),
        );
        assert_eq!(record.error_formulas, 1);
        assert_eq!(record.error_values, 1);
        assert!(record.error_values >= record.error_formulas);
        assert_eq!(record.score, 2.0);
    }

    #[test]
    fn score_linearity() {
        let workbook = wb("SHEET S\nCELL A1 TYPE formula VALUE #DIV/0! FORMULA =1/0\nCELL B1 TYPE text VALUE 1,385.45\n");
        let base = scan_workbook(&workbook, &WeightTable::default());
        let doubled = scan_workbook(&workbook, &WeightTable::default().scaled(2.0));
        let zeroed = scan_workbook(&workbook, &WeightTable::default().scaled(0.0));
        assert!(base.score > 0.0);
        assert_eq!(doubled.score, base.score * 2.0);
        assert_eq!(zeroed.score, 0.0);
    }

    #[test]
    fn inconsistent_region_flags_the_odd_formula() {
        // Brute-force normal-form comparison over the four-cell region:
        // three copies of "row*2" and one "row*3".
        let workbook = wb("\
SHEET S
CELL A2 TYPE num VALUE 1
CELL A3 TYPE num VALUE 2
CELL A4 TYPE num VALUE 3
CELL A5 TYPE num VALUE 4
CELL B2 TYPE formula VALUE 2 FORMULA =A2*2
CELL B3 TYPE formula VALUE 4 FORMULA =A3*2
CELL B4 TYPE formula VALUE 6 FORMULA =A4*2
CELL B5 TYPE formula VALUE 12 FORMULA =A5*3
");
        let report = count_inconsistent(&workbook);
        assert_eq!(report.hits.len(), 1);
        assert_eq!(report.hits[0].address, CellAddress::parse_a1("B5").unwrap());
        assert!(report.observations.is_empty());
    }

    #[test]
    fn uniform_translated_column_is_consistent() {
        let workbook = wb("\
SHEET S
CELL B2 TYPE formula VALUE 0 FORMULA =A2*2
CELL B3 TYPE formula VALUE 0 FORMULA =A3*2
CELL B4 TYPE formula VALUE 0 FORMULA =A4*2
CELL B5 TYPE formula VALUE 0 FORMULA =A5*2
");
        assert!(count_inconsistent(&workbook).hits.is_empty());
    }

    #[test]
    fn two_cell_regions_are_below_threshold() {
        let workbook = wb("\
SHEET S
CELL B2 TYPE formula VALUE 0 FORMULA =A2*2
CELL B3 TYPE formula VALUE 0 FORMULA =A3*9
");
        let report = count_inconsistent(&workbook);
        assert!(report.hits.is_empty());
        assert!(report.observations.is_empty());
    }

    #[test]
    fn tied_region_counts_nothing_and_observes() {
        let workbook = wb("\
SHEET S
CELL B2 TYPE formula VALUE 0 FORMULA =A2*2
CELL B3 TYPE formula VALUE 0 FORMULA =A3*2
CELL B4 TYPE formula VALUE 0 FORMULA =A4*9
CELL B5 TYPE formula VALUE 0 FORMULA =A5*9
");
        let report = count_inconsistent(&workbook);
        assert!(report.hits.is_empty());
        assert_eq!(report.observations.len(), 1);
    }

    #[test]
    fn row_regions_are_checked_too() {
        let workbook = wb("\
SHEET S
CELL B2 TYPE formula VALUE 0 FORMULA =B1*2
CELL C2 TYPE formula VALUE 0 FORMULA =C1*2
CELL D2 TYPE formula VALUE 0 FORMULA =D1*2
CELL E2 TYPE formula VALUE 0 FORMULA =E1*9
");
        let report = count_inconsistent(&workbook);
        assert_eq!(report.hits.len(), 1);
        assert_eq!(report.hits[0].address, CellAddress::parse_a1("E2").unwrap());
    }

    #[test]
    fn omits_adjacent_numeric_cell() {
        // Brute-force adjacency check: A5 is numeric, adjacent to
        // A1:A4 on the side toward A6, and not referenced.
        let workbook = wb("\
SHEET S
CELL A1 TYPE num VALUE 1
CELL A2 TYPE num VALUE 2
CELL A3 TYPE num VALUE 3
CELL A4 TYPE num VALUE 4
CELL A5 TYPE num VALUE 5
CELL A6 TYPE formula VALUE 10 FORMULA =SUM(A1:A4)
");
        let hits = count_omits(&workbook);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].address, CellAddress::parse_a1("A6").unwrap());
    }

    #[test]
    fn receipts_sum_omits_nothing() {
        // Adjacent A11 is empty and A1 is text, so nothing is omitted.
        assert!(count_omits(&wb(RECEIPTS)).is_empty());
    }

    #[test]
    fn no_range_arguments_no_omissions() {
        let workbook =
            wb("SHEET S\nCELL A1 TYPE num VALUE 1\nCELL A2 TYPE formula VALUE 2 FORMULA =A1*2\n");
        assert!(count_omits(&workbook).is_empty());
    }

    #[test]
    fn referenced_adjacent_cell_is_not_omitted() {
        let workbook = wb("\
SHEET S
CELL A1 TYPE num VALUE 1
CELL A2 TYPE num VALUE 2
CELL A3 TYPE num VALUE 3
CELL A4 TYPE formula VALUE 6 FORMULA =SUM(A1:A2)+A3
");
        assert!(count_omits(&workbook).is_empty());
    }

    #[test]
    fn text_lookalikes() {
        let workbook = wb("\
SHEET S
CELL A1 TYPE text VALUE 1,385.45
CELL A2 TYPE text VALUE 2/20/2006
CELL A3 TYPE text VALUE Items
CELL A4 TYPE text VALUE 20-Feb-2006
CELL A5 TYPE text VALUE $42
CELL A6 TYPE text VALUE 12,34.5
");
        let result = count_text_lookalikes(&workbook);
        assert_eq!(result.numbers.len(), 2, "{:?}", result.numbers);
        assert_eq!(result.dates.len(), 2, "{:?}", result.dates);
    }

    #[test]
    fn number_pattern_details() {
        assert!(looks_like_number("1,385.45"));
        assert!(looks_like_number("$10,000"));
        assert!(looks_like_number("-3.5"));
        assert!(looks_like_number(".5"));
        assert!(!looks_like_number("Items"));
        assert!(!looks_like_number("1,23.0"));
        assert!(!looks_like_number("1.2.3"));
        assert!(!looks_like_number(""));
        assert!(!looks_like_number("$"));
    }

    #[test]
    fn date_wins_over_number_when_both_match() {
        // A bare date like 2/20/2006 never parses as a number, but a
        // hyphenated form could look like subtraction; the date rule is
        // checked first by count_text_lookalikes.
        let workbook = wb("SHEET S\nCELL A1 TYPE text VALUE 2/20/2006\n");
        let result = count_text_lookalikes(&workbook);
        assert_eq!(result.dates.len(), 1);
        assert!(result.numbers.is_empty());
    }

    #[test]
    fn empty_reference_detection() {
        let workbook = wb("SHEET S\nCELL A1 TYPE formula VALUE 1 FORMULA =B1+1\n");
        assert_eq!(count_empty_refs(&workbook).len(), 1);

        assert!(count_empty_refs(&wb(RECEIPTS)).is_empty());

        // Corner rule: A11 is an empty corner of A2:A11.
        let stretched = RECEIPTS.replace("FORMULA =SUM(A2:A10)", "FORMULA =SUM(A2:A11)");
        assert_eq!(count_empty_refs(&wb(&stretched)).len(), 1);
    }

    const STALE: &str = "\
SHEET Sheet1
CELL A1 TYPE text VALUE Amount
CELL A2 TYPE num VALUE 1000
CELL A3 TYPE num VALUE 1250
CELL A4 TYPE num VALUE 1350
CELL A5 TYPE num VALUE 1250
CELL A6 TYPE num VALUE 1000
CELL A7 TYPE formula VALUE 5750 FORMULA =SUM(A2:A6)
";

    #[test]
    fn stale_sum_detected_with_recomputed_total() {
        // Summation oracle: 1000+1250+1350+1250+1000 = 5850.
        let oracle: f64 = [1000.0, 1250.0, 1350.0, 1250.0, 1000.0].iter().sum();
        assert_eq!(oracle, 5850.0);
        let hits = check_stale_sums(&wb(STALE));
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].cached, 5750.0);
        assert!((hits[0].recomputed - 5850.0).abs() <= STALE_SUM_TOLERANCE);
    }

    #[test]
    fn fresh_sum_not_stale() {
        let fresh = STALE.replace("VALUE 5750", "VALUE 5850");
        assert!(check_stale_sums(&wb(&fresh)).is_empty());
        assert!(check_stale_sums(&wb("SHEET S\n")).is_empty());
    }

    #[test]
    fn mixed_or_non_sum_ranges_are_skipped() {
        // A3 is text inside the summed range.
        let workbook = wb("\
SHEET S
CELL A1 TYPE num VALUE 1
CELL A2 TYPE num VALUE 2
CELL A3 TYPE text VALUE x
CELL A4 TYPE formula VALUE 99 FORMULA =SUM(A1:A3)
CELL B4 TYPE formula VALUE 99 FORMULA =SUM(A1:A2)*2
");
        assert!(check_stale_sums(&workbook).is_empty());
    }

    #[test]
    fn find_text_counts_and_locates_longest_formula() {
        let workbook = wb("\
SHEET S
CELL A1 TYPE text VALUE Total receipts
CELL A2 TYPE formula VALUE 1 FORMULA =SUM(B1:B2)
CELL A3 TYPE formula VALUE 1 FORMULA =SUM(B1:B2)+SUM(B3:B4)
");
        let result = find_text(&workbook, "sum");
        assert_eq!(result.count, 2);
        assert_eq!(
            result.where_location.as_ref().map(|l| l.address),
            Some(CellAddress::parse_a1("A3").unwrap())
        );
        assert_eq!(find_text(&workbook, "receipts").count, 1);
        assert_eq!(find_text(&workbook, "zzz").count, 0);
    }

    #[test]
    fn counts_are_bounded_by_total_cells() {
        let workbook = wb(RECEIPTS);
        let total: usize = workbook.sheets.iter().map(|s| s.cell_count()).sum();
        let record = scan_workbook(&workbook, &WeightTable::default());
        for count in [
            record.validation_cells,
            record.comment_cells,
            record.constant_cells,
            record.numeric_cells,
            record.formula_cells,
            record.error_formulas,
            record.error_values,
            record.text_date,
            record.text_num,
            record.inconsistent_formulas,
            record.omits_cells,
            record.unlocked_formulas,
            record.empty_ref_formulas,
            record.stale_sums,
        ] {
            assert!(count <= total);
        }
    }

    #[test]
    fn weight_table_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.json");
        std::fs::write(&path, "{\"error_formulas\": 2.5, \"stale_sums\": 0}").unwrap();
        let table = WeightTable::load(&path).unwrap();
        assert_eq!(table.weight("error_formulas"), 2.5);
        assert_eq!(table.weight("stale_sums"), 0.0);
        assert_eq!(table.weight("text_num"), 0.0);

        std::fs::write(&path, "{\"bogus\": 1}").unwrap();
        assert!(WeightTable::load(&path).is_err());
        std::fs::write(&path, "{\"error_formulas\": -1}").unwrap();
        assert!(WeightTable::load(&path).is_err());
    }

    fn entry(path: &str, ts: &str) -> ManifestEntry {
        ManifestEntry {
            path_and_name: path.to_string(),
            timestamp: chrono::NaiveDateTime::parse_from_str(ts, "%Y-%m-%dT%H:%M:%S").unwrap(),
            attribute: ManifestAttribute::ReadWrite,
            size: 100,
            author: None,
            purpose: None,
            lifecycle: None,
            security: None,
            access: None,
            reason_of_change: None,
        }
    }

    #[test]
    fn manifest_appends_and_merges() {
        let mut store = ManifestStore::default();
        let mut first = entry("C:\\MyFile.xls", "2006-02-20T10:00:00");
        first.reason_of_change = Some(ChangeReason::Creation);
        store.upsert(first.clone());
        assert_eq!(store.len(), 1);

        // A later version is a new key: history is retained.
        let mut second = entry("C:\\MyFile.xls", "2006-02-22T09:00:00");
        second.reason_of_change = Some(ChangeReason::Modification);
        store.upsert(second);
        assert_eq!(store.len(), 2);

        // Re-upserting the first key refreshes computed fields and only
        // supplied manual fields.
        let mut refresh = entry("C:\\MyFile.xls", "2006-02-20T10:00:00");
        refresh.size = 200;
        refresh.purpose = Some("Daily receipts".to_string());
        store.upsert(refresh);
        assert_eq!(store.len(), 2);
        let merged = &store.entries[0];
        assert_eq!(merged.size, 200);
        assert_eq!(merged.purpose.as_deref(), Some("Daily receipts"));
        assert_eq!(merged.reason_of_change, Some(ChangeReason::Creation));
    }

    #[test]
    fn manifest_enum_parsing_is_closed() {
        assert_eq!(
            "Secret".parse::<SecurityClass>().unwrap(),
            SecurityClass::Secret
        );
        assert_eq!(
            "secret".parse::<SecurityClass>().unwrap(),
            SecurityClass::Secret
        );
        let err = "TopSecret".parse::<SecurityClass>().unwrap_err();
        assert!(matches!(
            err,
            InventoryError::InvalidEnumValue {
                field: "security",
                ..
            }
        ));
        assert!("Current".parse::<LifecycleType>().is_ok());
        assert!("Forever".parse::<LifecycleType>().is_err());
        assert!("Creation".parse::<ChangeReason>().is_ok());
        assert!("Unrestricted".parse::<AccessClass>().is_ok());
        assert!("read-only".parse::<ManifestAttribute>().is_ok());
    }

    #[test]
    fn manifest_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        let mut first = entry("a.xlsx", "2006-02-20T10:00:00");
        first.purpose = Some("p".to_string());
        ManifestStore::append_line(&path, &first).unwrap();
        let mut refresh = entry("a.xlsx", "2006-02-20T10:00:00");
        refresh.size = 999;
        ManifestStore::append_line(&path, &refresh).unwrap();
        ManifestStore::append_line(&path, &entry("b.xlsx", "2006-02-21T10:00:00")).unwrap();

        // Three lines on disk, two folded entries; the merge keeps the
        // earlier manual purpose.
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        let store = ManifestStore::load(&path).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.entries[0].size, 999);
        assert_eq!(store.entries[0].purpose.as_deref(), Some("p"));

        assert!(ManifestStore::load(&dir.path().join("missing.jsonl"))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn unusual_ws_flags_include_protection_and_visibility() {
        let mut workbook = wb("SHEET S\nCELL A1 TYPE num VALUE 1\n");
        workbook.sheets[0].protected = true;
        workbook.sheets[0].visibility = SheetVisibility::VeryHidden;
        let record = scan_workbook(&workbook, &WeightTable::default());
        let flags = record.unusual_ws.get("S").unwrap();
        assert!(flags.contains(&"Protected".to_string()));
        assert!(flags.contains(&"Hidden / Very Hidden".to_string()));
    }

    #[test]
    fn cell_with_cached_error_but_no_formula_counts_once() {
        let mut workbook = wb("SHEET S\n");
        let mut cell = Cell::new(
            CellAddress::parse_a1("A1").unwrap(),
            CellContent::Text("#REF!".to_string()),
        );
        cell.cached_value = Some(Scalar::Error(crate::model::ErrorCode::Ref));
        workbook.sheets[0].insert(cell);
        let record = scan_workbook(&workbook, &WeightTable::default());
        assert_eq!(record.error_values, 1);
        assert_eq!(record.error_formulas, 0);
    }
}
