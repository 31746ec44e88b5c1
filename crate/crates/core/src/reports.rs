//! The standardized documentation table and attribute maps.
//!
//! The table has the fixed eleven columns Author, Date, Time, Purpose,
//! Type, Source, Range, Format, Checked by, Date, Update — one row per
//! structured record, cell records first (sheet and address order), then
//! macro records (module and procedure order). Unstructured comments are
//! counted in a summary, never silently dropped.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::classify::{compute_coverage, CoverageStatus};
use crate::doc_comment::{parse_doc_comment, DocCellType, DocOrigin, DocRecord};
use crate::model::{CellAddress, Workbook};
use crate::tabletext;
use crate::vba::{parse_macro_headers, MacroModule};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReportError {
    #[error("unknown field {0:?}")]
    UnknownField(String),
    #[error("unknown output format {0:?} (expected csv, md or json)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutputFormat {
    Csv,
    Markdown,
    Json,
}

impl FromStr for OutputFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "md" | "markdown" => Ok(OutputFormat::Markdown),
            "json" => Ok(OutputFormat::Json),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

pub const DOC_COLUMNS: [&str; 11] = [
    "Author",
    "Date",
    "Time",
    "Purpose",
    "Type",
    "Source",
    "Range",
    "Format",
    "Checked by",
    "Date",
    "Update",
];

/// One addressable record field. `Date` appears twice in the table; the
/// second column is addressed as `checked_date`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DocField {
    Author,
    Date,
    Time,
    Purpose,
    Type,
    Source,
    Range,
    Format,
    CheckedBy,
    CheckedDate,
    Update,
}

impl DocField {
    pub fn parse(name: &str) -> Result<Self, ReportError> {
        match name
            .trim()
            .to_ascii_lowercase()
            .replace([' ', '-'], "_")
            .as_str()
        {
            "author" => Ok(DocField::Author),
            "date" => Ok(DocField::Date),
            "time" => Ok(DocField::Time),
            "purpose" => Ok(DocField::Purpose),
            "type" => Ok(DocField::Type),
            "source" => Ok(DocField::Source),
            "range" => Ok(DocField::Range),
            "format" => Ok(DocField::Format),
            "checked_by" => Ok(DocField::CheckedBy),
            "checked_date" => Ok(DocField::CheckedDate),
            "update" => Ok(DocField::Update),
            _ => Err(ReportError::UnknownField(name.to_string())),
        }
    }

    pub fn column_name(&self) -> &'static str {
        match self {
            DocField::Author => "Author",
            DocField::Date => "Date",
            DocField::Time => "Time",
            DocField::Purpose => "Purpose",
            DocField::Type => "Type",
            DocField::Source => "Source",
            DocField::Range => "Range",
            DocField::Format => "Format",
            DocField::CheckedBy => "Checked by",
            DocField::CheckedDate => "Date",
            DocField::Update => "Update",
        }
    }

    /// Rendered table text of this field on a record.
    pub fn render(&self, rec: &DocRecord) -> String {
        match self {
            DocField::Author => rec.author.clone(),
            DocField::Date => rec.date_text(),
            DocField::Time => rec.time_text(),
            DocField::Purpose => rec.purpose.clone(),
            DocField::Type => rec
                .cell_type
                .map(|t| t.display_name().to_string())
                .unwrap_or_default(),
            DocField::Source => rec.source.clone().unwrap_or_else(|| "NA".to_string()),
            DocField::Range => rec.range_text(),
            DocField::Format => rec.format.clone(),
            DocField::CheckedBy => rec.checked_by.clone().unwrap_or_default(),
            DocField::CheckedDate => rec.checked_date_text(),
            DocField::Update => rec.update.clone().unwrap_or_else(|| "NA".to_string()),
        }
    }
}

/// Everything documented in one workbook: structured records from cell
/// comments and macro headers, plus the count of unstructured comments.
#[derive(Debug, Clone, Default)]
pub struct RecordCollection {
    pub records: Vec<DocRecord>,
    pub unstructured_comments: usize,
}

/// Collect structured records: cells first in sheet/address order, then
/// macros in module/procedure order. A comment or macro header that does
/// not parse as a record counts as unstructured.
pub fn collect_records(wb: &Workbook, macros: &[MacroModule]) -> RecordCollection {
    let mut collection = RecordCollection::default();
    for sheet in &wb.sheets {
        for cell in sheet.cells() {
            let Some(comment) = &cell.comment else {
                continue;
            };
            match parse_doc_comment(&comment.body) {
                Some(record) => collection.records.push(record.with_origin(DocOrigin::Cell {
                    sheet: sheet.name.clone(),
                    address: cell.address,
                })),
                None => collection.unstructured_comments += 1,
            }
        }
    }
    for module in macros {
        for header in parse_macro_headers(module) {
            match header.record {
                Some(record) => collection.records.push(record),
                None if !header.header_text.is_empty() => collection.unstructured_comments += 1,
                None => {}
            }
        }
    }
    collection
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DocTable {
    pub rows: Vec<DocRecord>,
    pub unstructured_comments: usize,
}

pub fn build_doc_table(wb: &Workbook, macros: &[MacroModule]) -> DocTable {
    let collection = collect_records(wb, macros);
    DocTable {
        rows: collection.records,
        unstructured_comments: collection.unstructured_comments,
    }
}

/// Stable sort and exact-match filter over rendered field text
/// (case-insensitive). Sort keys apply in order; date and time fields
/// compare chronologically.
pub fn filter_sort(
    table: &DocTable,
    filter: Option<(&str, &str)>,
    sort_keys: &[&str],
) -> Result<DocTable, ReportError> {
    let filter = match filter {
        Some((field, value)) => Some((DocField::parse(field)?, value.to_string())),
        None => None,
    };
    let keys: Vec<DocField> = sort_keys
        .iter()
        .map(|k| DocField::parse(k))
        .collect::<Result<_, _>>()?;

    let mut rows: Vec<DocRecord> = match &filter {
        Some((field, value)) => table
            .rows
            .iter()
            .filter(|rec| field.render(rec).eq_ignore_ascii_case(value))
            .cloned()
            .collect(),
        None => table.rows.clone(),
    };
    for key in keys.iter().rev() {
        rows.sort_by_key(|rec| sort_value(key, rec));
    }
    Ok(DocTable {
        rows,
        unstructured_comments: table.unstructured_comments,
    })
}

/// Chronological fields sort on the parsed value (ISO text), others on
/// rendered text.
fn sort_value(field: &DocField, rec: &DocRecord) -> String {
    match field {
        DocField::Date => rec.date.map(|d| d.to_string()).unwrap_or_default(),
        DocField::CheckedDate => rec.checked_date.map(|d| d.to_string()).unwrap_or_default(),
        DocField::Time => rec.time.map(|t| t.to_string()).unwrap_or_default(),
        other => other.render(rec).to_ascii_lowercase(),
    }
}

/// Grid of one record field over every documented cell. Values come from
/// the covering record; the Type field renders as single-letter codes in
/// place of the cell coloring.
#[derive(Debug, Clone, Serialize)]
pub struct AttributeMap {
    pub field: DocField,
    pub sheets: BTreeMap<String, BTreeMap<CellAddress, String>>,
}

pub fn build_attribute_map(
    wb: &Workbook,
    records: &[DocRecord],
    field: &str,
) -> Result<AttributeMap, ReportError> {
    let field = DocField::parse(field)?;
    let coverage = compute_coverage(wb, records);
    let mut sheets: BTreeMap<String, BTreeMap<CellAddress, String>> = BTreeMap::new();
    for (sheet, cells) in &coverage.sheets {
        let mut grid = BTreeMap::new();
        for (addr, cov) in cells {
            if cov.status != CoverageStatus::Documented {
                continue;
            }
            let Some(idx) = cov.covering else { continue };
            let rec = &records[idx];
            let value = match field {
                DocField::Type => rec
                    .cell_type
                    .map(|t| t.code().to_string())
                    .unwrap_or_default(),
                other => other.render(rec),
            };
            grid.insert(*addr, value);
        }
        sheets.insert(sheet.clone(), grid);
    }
    Ok(AttributeMap { field, sheets })
}

/// Render a documentation table. CSV and Markdown emit the fixed column
/// header plus one line per row; JSON carries the full records and the
/// unstructured-comment count.
pub fn render_doc_table(table: &DocTable, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::new();
            out.push_str(&tabletext::csv_row(
                &DOC_COLUMNS
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>(),
            ));
            out.push('\n');
            for rec in &table.rows {
                out.push_str(&tabletext::csv_row(&row_values(rec)));
                out.push('\n');
            }
            out
        }
        OutputFormat::Markdown => {
            let mut out = String::new();
            out.push_str(&tabletext::md_row(
                &DOC_COLUMNS
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>(),
            ));
            out.push('\n');
            out.push_str(&tabletext::md_separator(DOC_COLUMNS.len()));
            out.push('\n');
            for rec in &table.rows {
                out.push_str(&tabletext::md_row(&row_values(rec)));
                out.push('\n');
            }
            out
        }
        OutputFormat::Json => {
            let mut text = serde_json::to_string_pretty(table).expect("doc table serializes");
            text.push('\n');
            text
        }
    }
}

fn row_values(rec: &DocRecord) -> Vec<String> {
    [
        DocField::Author,
        DocField::Date,
        DocField::Time,
        DocField::Purpose,
        DocField::Type,
        DocField::Source,
        DocField::Range,
        DocField::Format,
        DocField::CheckedBy,
        DocField::CheckedDate,
        DocField::Update,
    ]
    .iter()
    .map(|f| f.render(rec))
    .collect()
}

/// Render an attribute map as Sheet,Cell,Value rows (or a JSON object
/// keyed by sheet and cell).
pub fn render_attribute_map(map: &AttributeMap, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv | OutputFormat::Markdown => {
            let header = vec![
                "Sheet".to_string(),
                "Cell".to_string(),
                map.field.column_name().to_string(),
            ];
            let mut rows: Vec<Vec<String>> = Vec::new();
            for (sheet, grid) in &map.sheets {
                for (addr, value) in grid {
                    rows.push(vec![sheet.clone(), addr.render_a1(), value.clone()]);
                }
            }
            let mut out = String::new();
            if format == OutputFormat::Csv {
                out.push_str(&tabletext::csv_row(&header));
                out.push('\n');
                for row in rows {
                    out.push_str(&tabletext::csv_row(&row));
                    out.push('\n');
                }
            } else {
                out.push_str(&tabletext::md_row(&header));
                out.push('\n');
                out.push_str(&tabletext::md_separator(header.len()));
                out.push('\n');
                for row in rows {
                    out.push_str(&tabletext::md_row(&row));
                    out.push('\n');
                }
            }
            out
        }
        OutputFormat::Json => {
            let by_sheet: BTreeMap<&String, BTreeMap<String, &String>> = map
                .sheets
                .iter()
                .map(|(sheet, grid)| {
                    (
                        sheet,
                        grid.iter().map(|(a, v)| (a.render_a1(), v)).collect(),
                    )
                })
                .collect();
            let mut text = serde_json::to_string_pretty(&serde_json::json!({
                "field": map.field.column_name(),
                "cells": by_sheet,
            }))
            .expect("attribute map serializes");
            text.push('\n');
            text
        }
    }
}

/// The documented-type letter code of a record, as used in map output.
pub fn type_code(record: &DocRecord) -> Option<char> {
    record.cell_type.map(|t: DocCellType| t.code())
}
