//! The structured documentation comment schema.
//!
//! A structured comment is a block of `Key: value` lines covering the
//! eleven report columns (Author, Date, Time, Purpose, Type, Source,
//! Range, Format, Checked by, a second Date for the reviewer, Update),
//! optionally followed by free-text note lines. Parsing is total: a body
//! without a recognized `Author:` line is simply not structured.

use std::fmt;

use chrono::{NaiveDate, NaiveTime};
use serde::Serialize;
use thiserror::Error;

use crate::classify::{classify_cell, CellType};
use crate::model::{Cell, CellAddress, CellRange};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DocError {
    #[error("record violates an invariant: {0}")]
    InvariantViolation(String),
}

/// The declared type of the documented cell or macro.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DocCellType {
    TitleLabel,
    Data,
    DataValidated,
    Formula,
    Link,
    Macro,
}

impl DocCellType {
    pub fn display_name(&self) -> &'static str {
        match self {
            DocCellType::TitleLabel => "Title & Label",
            DocCellType::Data => "Data",
            DocCellType::DataValidated => "Data (Validated)",
            DocCellType::Formula => "Formula",
            DocCellType::Link => "Link",
            DocCellType::Macro => "Macro",
        }
    }

    /// Single-letter code used in map renderings instead of cell colors.
    pub fn code(&self) -> char {
        match self {
            DocCellType::TitleLabel => 'T',
            DocCellType::Data | DocCellType::DataValidated => 'D',
            DocCellType::Formula => 'F',
            DocCellType::Link => 'L',
            DocCellType::Macro => 'M',
        }
    }

    /// Closed synonym map, case-insensitive.
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "title & label" => Some(DocCellType::TitleLabel),
            "data" => Some(DocCellType::Data),
            "data (validated)" => Some(DocCellType::DataValidated),
            "formula" => Some(DocCellType::Formula),
            "link" => Some(DocCellType::Link),
            "macro" => Some(DocCellType::Macro),
            _ => None,
        }
    }
}

/// Where a record came from: a commented cell or a macro header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum DocOrigin {
    Cell { sheet: String, address: CellAddress },
    Macro { module: String, procedure: String },
}

impl fmt::Display for DocOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocOrigin::Cell { sheet, address } => write!(f, "{}!{}", sheet, address.render_a1()),
            DocOrigin::Macro { module, procedure } => write!(f, "{module}::{procedure}"),
        }
    }
}

/// One parsed structured documentation comment.
///
/// Date and time fields keep the original text alongside the parsed
/// value so tables can re-render the author's exact spelling.
/// `source`, `range` and `update` use `None` for an explicit or implied
/// "NA". `range_note` holds range text that is neither a range nor NA
/// (e.g. "Entire Workbook" in macro headers).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DocRecord {
    pub author: String,
    pub date: Option<NaiveDate>,
    pub date_raw: Option<String>,
    pub time: Option<NaiveTime>,
    pub time_raw: Option<String>,
    pub purpose: String,
    pub cell_type: Option<DocCellType>,
    pub source: Option<String>,
    pub range: Option<CellRange>,
    pub range_note: Option<String>,
    pub format: String,
    pub checked_by: Option<String>,
    pub checked_date: Option<NaiveDate>,
    pub checked_date_raw: Option<String>,
    pub update: Option<String>,
    pub notes: Vec<String>,
    pub origin: Option<DocOrigin>,
    /// Keys (other than Date) that appeared more than once in the body.
    pub duplicate_keys: Vec<String>,
    /// Raw `Type:` value when it did not match the synonym map.
    pub unknown_type: Option<String>,
}

impl DocRecord {
    pub fn with_origin(mut self, origin: DocOrigin) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn date_text(&self) -> String {
        match (&self.date_raw, &self.date) {
            (Some(raw), _) => raw.clone(),
            (None, Some(d)) => render_date(*d),
            (None, None) => String::new(),
        }
    }

    pub fn time_text(&self) -> String {
        match (&self.time_raw, &self.time) {
            (Some(raw), _) => raw.clone(),
            (None, Some(t)) => render_time(*t),
            (None, None) => String::new(),
        }
    }

    pub fn checked_date_text(&self) -> String {
        match (&self.checked_date_raw, &self.checked_date) {
            (Some(raw), _) => raw.clone(),
            (None, Some(d)) => render_date(*d),
            (None, None) => String::new(),
        }
    }

    pub fn range_text(&self) -> String {
        if let Some(range) = &self.range {
            range.render()
        } else if let Some(note) = &self.range_note {
            note.clone()
        } else {
            "NA".to_string()
        }
    }

    /// The cells this record documents on its origin sheet: the declared
    /// range plus the commented cell itself.
    pub fn covered_cells(&self) -> Vec<CellAddress> {
        let mut cells: Vec<CellAddress> = match &self.range {
            Some(range) => range.iter().collect(),
            None => Vec::new(),
        };
        if let Some(DocOrigin::Cell { address, .. }) = &self.origin {
            if !cells.contains(address) {
                cells.push(*address);
            }
        }
        cells
    }
}

/// Table date rendering, month and day unpadded: `2/20/2006`.
pub fn render_date(d: NaiveDate) -> String {
    d.format("%-m/%-d/%Y").to_string()
}

/// Table time rendering: `10:43 AM`.
pub fn render_time(t: NaiveTime) -> String {
    t.format("%-I:%M %p").to_string()
}

/// Accepts M/D/YYYY (padded or not) and ISO 8601.
pub fn parse_date(text: &str) -> Option<NaiveDate> {
    let text = text.trim();
    let slash: Vec<&str> = text.split('/').collect();
    if slash.len() == 3 {
        let month: u32 = slash[0].trim().parse().ok()?;
        let day: u32 = slash[1].trim().parse().ok()?;
        let year: i32 = slash[2].trim().parse().ok()?;
        let year = if year < 100 { 2000 + year } else { year };
        return NaiveDate::from_ymd_opt(year, month, day);
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d").ok()
}

/// Accepts `10:43 AM`, `9:45PM` and 24-hour `HH:MM[:SS]`.
pub fn parse_time(text: &str) -> Option<NaiveTime> {
    let text = text.trim();
    let upper = text.to_ascii_uppercase();
    let (clock, meridiem) = if let Some(stripped) = upper.strip_suffix("AM") {
        (stripped.trim().to_string(), Some(false))
    } else if let Some(stripped) = upper.strip_suffix("PM") {
        (stripped.trim().to_string(), Some(true))
    } else {
        (upper, None)
    };
    let mut parts = clock.split(':');
    let hour: u32 = parts.next()?.trim().parse().ok()?;
    let minute: u32 = parts.next()?.trim().parse().ok()?;
    let second: u32 = match parts.next() {
        Some(s) => s.trim().parse().ok()?,
        None => 0,
    };
    let hour = match meridiem {
        Some(true) if hour < 12 => hour + 12,
        Some(false) if hour == 12 => 0,
        _ => hour,
    };
    NaiveTime::from_hms_opt(hour, minute, second)
}

fn is_na(text: &str) -> bool {
    let t = text.trim();
    t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("n/a")
}

const KEYS: [&str; 10] = [
    "author",
    "date",
    "time",
    "purpose",
    "type",
    "source",
    "range",
    "format",
    "checked by",
    "update",
];

fn split_key_line(line: &str) -> Option<(&'static str, &str)> {
    let (key, value) = line.split_once(':')?;
    let key_norm = key.trim().to_ascii_lowercase();
    KEYS.iter()
        .find(|k| **k == key_norm)
        .map(|k| (*k, value.trim()))
}

/// Parse a comment body. Returns `None` for unstructured bodies (no
/// recognized `Author:` line) — never an error.
///
/// Recognized `Key: value` lines bind in any order; a `Date:` line binds
/// to the reviewer date when it appears after `Checked by:`, to the
/// author date otherwise. Everything unrecognized becomes a note line.
pub fn parse_doc_comment(body: &str) -> Option<DocRecord> {
    let mut rec = DocRecord::default();
    let mut seen_author = false;

    for raw_line in body.split('\n') {
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.trim().is_empty() {
            continue;
        }
        let Some((key, value)) = split_key_line(line) else {
            rec.notes.push(line.to_string());
            continue;
        };
        match key {
            "author" => {
                if seen_author {
                    rec.duplicate_keys.push("Author".to_string());
                }
                if !value.is_empty() {
                    rec.author = value.to_string();
                    seen_author = true;
                } else if !seen_author {
                    // An empty Author: line does not make the body structured.
                    rec.notes.push(line.to_string());
                }
            }
            "date" => {
                if rec.checked_by.is_some() {
                    rec.checked_date = parse_date(value);
                    rec.checked_date_raw = Some(value.to_string());
                } else {
                    rec.date = parse_date(value);
                    rec.date_raw = Some(value.to_string());
                }
            }
            "time" => {
                duplicate(&mut rec.duplicate_keys, rec.time_raw.is_some(), "Time");
                rec.time = parse_time(value);
                rec.time_raw = Some(value.to_string());
            }
            "purpose" => {
                duplicate(&mut rec.duplicate_keys, !rec.purpose.is_empty(), "Purpose");
                rec.purpose = value.to_string();
            }
            "type" => {
                duplicate(
                    &mut rec.duplicate_keys,
                    rec.cell_type.is_some() || rec.unknown_type.is_some(),
                    "Type",
                );
                match DocCellType::parse(value) {
                    Some(t) => {
                        rec.cell_type = Some(t);
                        rec.unknown_type = None;
                    }
                    None => {
                        rec.cell_type = None;
                        rec.unknown_type = Some(value.to_string());
                        rec.notes.push(line.to_string());
                    }
                }
            }
            "source" => {
                duplicate(&mut rec.duplicate_keys, rec.source.is_some(), "Source");
                rec.source = if is_na(value) {
                    None
                } else {
                    Some(value.to_string())
                };
            }
            "range" => {
                duplicate(
                    &mut rec.duplicate_keys,
                    rec.range.is_some() || rec.range_note.is_some(),
                    "Range",
                );
                if is_na(value) {
                    rec.range = None;
                    rec.range_note = None;
                } else {
                    match CellRange::parse(value) {
                        Ok(range) => {
                            rec.range = Some(range);
                            rec.range_note = None;
                        }
                        Err(_) => {
                            rec.range = None;
                            rec.range_note = Some(value.to_string());
                        }
                    }
                }
            }
            "format" => {
                duplicate(&mut rec.duplicate_keys, !rec.format.is_empty(), "Format");
                rec.format = value.to_string();
            }
            "checked by" => {
                duplicate(
                    &mut rec.duplicate_keys,
                    rec.checked_by.is_some(),
                    "Checked by",
                );
                rec.checked_by = if value.is_empty() {
                    None
                } else {
                    Some(value.to_string())
                };
            }
            "update" => {
                duplicate(&mut rec.duplicate_keys, rec.update.is_some(), "Update");
                rec.update = if is_na(value) {
                    None
                } else {
                    Some(value.to_string())
                };
            }
            _ => unreachable!(),
        }
    }

    if seen_author {
        Some(rec)
    } else {
        None
    }
}

fn duplicate(dups: &mut Vec<String>, already_set: bool, key: &str) {
    if already_set {
        dups.push(key.to_string());
    }
}

/// Render a record back to comment text, keys in report-column order.
/// NA fields render as `NA`; absent optional fields are omitted.
pub fn serialize_doc_record(rec: &DocRecord) -> Result<String, DocError> {
    check_invariants(rec)?;
    let mut lines = Vec::new();
    lines.push(format!("Author: {}", rec.author));
    let date = rec.date_text();
    if !date.is_empty() {
        lines.push(format!("Date: {date}"));
    }
    let time = rec.time_text();
    if !time.is_empty() {
        lines.push(format!("Time: {time}"));
    }
    lines.push(format!("Purpose: {}", rec.purpose));
    if let Some(t) = rec.cell_type {
        lines.push(format!("Type: {}", t.display_name()));
    }
    lines.push(format!("Source: {}", rec.source.as_deref().unwrap_or("NA")));
    lines.push(format!("Range: {}", rec.range_text()));
    if !rec.format.is_empty() {
        lines.push(format!("Format: {}", rec.format));
    }
    if let Some(checked_by) = &rec.checked_by {
        lines.push(format!("Checked by: {checked_by}"));
        let checked = rec.checked_date_text();
        if !checked.is_empty() {
            lines.push(format!("Date: {checked}"));
        }
    }
    lines.push(format!("Update: {}", rec.update.as_deref().unwrap_or("NA")));
    for note in &rec.notes {
        lines.push(note.clone());
    }
    Ok(lines.join("\n"))
}

fn check_invariants(rec: &DocRecord) -> Result<(), DocError> {
    if rec.author.trim().is_empty() {
        return Err(DocError::InvariantViolation("author is empty".into()));
    }
    if rec.purpose.trim().is_empty() {
        return Err(DocError::InvariantViolation("purpose is empty".into()));
    }
    if rec.cell_type == Some(DocCellType::TitleLabel) {
        if rec.source.is_some() {
            return Err(DocError::InvariantViolation(
                "a Title & Label record cannot have a Source".into(),
            ));
        }
        if rec.update.is_some() {
            return Err(DocError::InvariantViolation(
                "a Title & Label record is not Updated".into(),
            ));
        }
    }
    if (rec.checked_date.is_some() || rec.checked_date_raw.is_some()) && rec.checked_by.is_none() {
        return Err(DocError::InvariantViolation(
            "a reviewer date requires a Checked by".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl Severity {
    pub fn label(&self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocFinding {
    pub severity: Severity,
    pub code: String,
    pub location: DocOrigin,
    pub message: String,
}

/// Validate one record, optionally against the cell it documents.
/// Findings are the output; validation itself never fails.
pub fn validate_doc_record(rec: &DocRecord, cell: Option<&Cell>) -> Vec<DocFinding> {
    let location = rec.origin.clone().unwrap_or(DocOrigin::Macro {
        module: "(detached)".to_string(),
        procedure: String::new(),
    });
    let mut findings = Vec::new();
    let mut push = |severity, code: &str, message: String| {
        findings.push(DocFinding {
            severity,
            code: code.to_string(),
            location: location.clone(),
            message,
        });
    };

    if rec.date.is_none() {
        let detail = match &rec.date_raw {
            Some(raw) => format!("date {raw:?} is not a recognized date"),
            None => "no Date line".to_string(),
        };
        push(Severity::Error, "missing-date", detail);
    }
    if rec.purpose.trim().is_empty() {
        push(
            Severity::Error,
            "missing-purpose",
            "no Purpose line".to_string(),
        );
    }
    match (&rec.cell_type, &rec.unknown_type) {
        (None, Some(raw)) => push(
            Severity::Warning,
            "unknown-type",
            format!("type {raw:?} is not in the type vocabulary"),
        ),
        (None, None) => push(Severity::Error, "missing-type", "no Type line".to_string()),
        _ => {}
    }
    if matches!(
        rec.cell_type,
        Some(DocCellType::Data | DocCellType::DataValidated)
    ) && rec.source.is_none()
    {
        push(
            Severity::Error,
            "missing-source",
            "data records need a Source".to_string(),
        );
    }
    if rec.cell_type == Some(DocCellType::TitleLabel) {
        if let Some(source) = &rec.source {
            push(
                Severity::Error,
                "title-has-source",
                format!("a Title & Label does not have a Source (found {source:?})"),
            );
        }
        if let Some(update) = &rec.update {
            push(
                Severity::Error,
                "title-has-source",
                format!("a Title & Label is not Updated (found {update:?})"),
            );
        }
    }
    for key in &rec.duplicate_keys {
        push(
            Severity::Warning,
            "duplicate-key",
            format!("key {key} appears more than once"),
        );
    }

    if let (Some(cell), Some(declared)) = (cell, rec.cell_type) {
        if declared != DocCellType::Macro {
            if let Some(actual) = classify_cell(cell) {
                if !declared_matches(declared, actual) {
                    push(
                        Severity::Warning,
                        "type-mismatch",
                        format!(
                            "declared {} but the cell classifies as {}",
                            declared.display_name(),
                            actual.display_name()
                        ),
                    );
                }
            }
        }
    }

    // Range-contains-origin only applies where the range declares what
    // the record documents; formula and link records use Range for the
    // formula's source cells.
    if matches!(
        rec.cell_type,
        Some(DocCellType::TitleLabel | DocCellType::Data | DocCellType::DataValidated)
    ) {
        if let (Some(range), Some(DocOrigin::Cell { address, .. })) = (&rec.range, &rec.origin) {
            if !range.contains(*address) {
                push(
                    Severity::Warning,
                    "range-misses-origin",
                    format!(
                        "declared range {} does not contain the commented cell {}",
                        range.render(),
                        address.render_a1()
                    ),
                );
            }
        }
    }

    if rec.checked_by.is_none() {
        push(
            Severity::Info,
            "unreviewed",
            "no reviewer recorded".to_string(),
        );
    }

    findings
}

fn declared_matches(declared: DocCellType, actual: CellType) -> bool {
    matches!(
        (declared, actual),
        (DocCellType::TitleLabel, CellType::Title)
            | (
                DocCellType::Data | DocCellType::DataValidated,
                CellType::Data
            )
            | (DocCellType::Formula, CellType::Formula)
            | (DocCellType::Link, CellType::Link)
    )
}
