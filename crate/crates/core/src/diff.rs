//! Diff two versions of a workbook into change records.
//!
//! Sheets are matched by name. In positional mode every differing cell
//! becomes a CellChange (formula text is compared when either side is a
//! formula, cached values otherwise). With row alignment on, populated
//! rows are first aligned by longest-common-subsequence over row content
//! fingerprints; unmatched rows become RowInsert/RowDelete records and
//! matched rows are then compared positionally.

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::Serialize;

use crate::doc_comment::{render_date, render_time};
use crate::model::{Cell, CellAddress, CellContent, Sheet, Workbook};
use crate::reports::OutputFormat;
use crate::tabletext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChangeKind {
    CellChange,
    RowInsert,
    RowDelete,
    ColInsert,
    ColDelete,
    SheetAdded,
    SheetRemoved,
}

impl ChangeKind {
    pub fn label(&self) -> &'static str {
        match self {
            ChangeKind::CellChange => "Cell Change",
            ChangeKind::RowInsert => "Row Insert",
            ChangeKind::RowDelete => "Row Delete",
            ChangeKind::ColInsert => "Column Insert",
            ChangeKind::ColDelete => "Column Delete",
            ChangeKind::SheetAdded => "Sheet Added",
            ChangeKind::SheetRemoved => "Sheet Removed",
        }
    }
}

/// One row of the change table. `range` uses R1C1 text (`R5C1` for a
/// cell, `R5` for a whole row).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeRecord {
    pub action_number: u32,
    pub date: NaiveDate,
    pub time: NaiveTime,
    pub who: String,
    pub change: ChangeKind,
    pub sheet: String,
    pub range: String,
    pub new_value: Option<String>,
    pub old_value: Option<String>,
}

type Pending = Vec<(ChangeKind, String, String, Option<String>, Option<String>)>;

/// Diff `old` against `new`. The author and timestamp are caller-supplied;
/// the file formats do not record who changed what.
pub fn diff_workbooks(
    old: &Workbook,
    new: &Workbook,
    who: &str,
    when: NaiveDateTime,
    align_rows: bool,
) -> Vec<ChangeRecord> {
    let mut pending: Pending = Vec::new();

    for new_sheet in &new.sheets {
        match old.sheet(&new_sheet.name) {
            Some(old_sheet) => {
                if align_rows {
                    diff_sheet_aligned(old_sheet, new_sheet, &mut pending);
                } else {
                    diff_sheet_positional(old_sheet, new_sheet, &mut pending);
                }
            }
            None => {
                pending.push((
                    ChangeKind::SheetAdded,
                    new_sheet.name.clone(),
                    String::new(),
                    None,
                    None,
                ));
            }
        }
    }
    for old_sheet in &old.sheets {
        if new.sheet(&old_sheet.name).is_none() {
            pending.push((
                ChangeKind::SheetRemoved,
                old_sheet.name.clone(),
                String::new(),
                None,
                None,
            ));
        }
    }

    pending
        .into_iter()
        .enumerate()
        .map(
            |(idx, (change, sheet, range, new_value, old_value))| ChangeRecord {
                action_number: idx as u32 + 1,
                date: when.date(),
                time: when.time(),
                who: who.to_string(),
                change,
                sheet,
                range,
                new_value,
                old_value,
            },
        )
        .collect()
}

/// Comparison key for one cell: content kind tag plus the text that
/// matters (formula text when it is a formula, canonical value else).
fn compare_key(cell: Option<&Cell>) -> Option<(u8, String)> {
    let cell = cell?;
    let key = match &cell.content {
        CellContent::Empty => return None,
        CellContent::Formula(f) => (4u8, f.clone()),
        CellContent::Text(t) => (1, t.clone()),
        CellContent::Number(_) | CellContent::Date(_) => (2, cell.content.canonical_text()),
    };
    Some(key)
}

fn value_text(cell: Option<&Cell>) -> Option<String> {
    compare_key(cell).map(|(_, text)| text)
}

fn diff_sheet_positional(old: &Sheet, new: &Sheet, out: &mut Pending) {
    let mut addresses: Vec<CellAddress> = old.cells().map(|c| c.address).collect();
    addresses.extend(new.cells().map(|c| c.address));
    addresses.sort_unstable();
    addresses.dedup();

    for addr in addresses {
        let old_key = compare_key(old.cell(addr));
        let new_key = compare_key(new.cell(addr));
        if old_key != new_key {
            out.push((
                ChangeKind::CellChange,
                new.name.clone(),
                addr.render_r1c1(),
                value_text(new.cell(addr)),
                value_text(old.cell(addr)),
            ));
        }
    }
}

/// Fingerprint of one populated row: (kind, canonical text) per cell,
/// column-indexed. Stable under formatting noise.
fn row_fingerprint(sheet: &Sheet, row: u32) -> Vec<(u32, u8, String)> {
    sheet
        .cells()
        .filter(|c| c.address.row == row)
        .filter_map(|c| compare_key(Some(c)).map(|(kind, text)| (c.address.col, kind, text)))
        .collect()
}

fn populated_rows(sheet: &Sheet) -> Vec<u32> {
    let mut rows: Vec<u32> = sheet
        .cells()
        .filter(|c| !c.content.is_empty())
        .map(|c| c.address.row)
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows
}

fn diff_sheet_aligned(old: &Sheet, new: &Sheet, out: &mut Pending) {
    let old_rows = populated_rows(old);
    let new_rows = populated_rows(new);
    let old_fps: Vec<Vec<(u32, u8, String)>> =
        old_rows.iter().map(|r| row_fingerprint(old, *r)).collect();
    let new_fps: Vec<Vec<(u32, u8, String)>> =
        new_rows.iter().map(|r| row_fingerprint(new, *r)).collect();

    // LCS table over row fingerprints.
    let (n, m) = (old_fps.len(), new_fps.len());
    let mut lcs = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if old_fps[i] == new_fps[j] {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }

    // Walk the alignment front-to-back, preferring matches at the
    // earliest old row.
    let (mut i, mut j) = (0usize, 0usize);
    while i < n || j < m {
        if i < n && j < m && old_fps[i] == new_fps[j] && lcs[i][j] == lcs[i + 1][j + 1] + 1 {
            diff_row_pair(old, old_rows[i], new, new_rows[j], out);
            i += 1;
            j += 1;
        } else if j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j]) {
            emit_row_insert(new, new_rows[j], out);
            j += 1;
        } else {
            out.push((
                ChangeKind::RowDelete,
                old.name.clone(),
                format!("R{}", old_rows[i]),
                None,
                None,
            ));
            i += 1;
        }
    }
}

fn emit_row_insert(new: &Sheet, row: u32, out: &mut Pending) {
    out.push((
        ChangeKind::RowInsert,
        new.name.clone(),
        format!("R{row}"),
        None,
        None,
    ));
    let cells: Vec<&Cell> = new.cells().filter(|c| c.address.row == row).collect();
    for cell in cells {
        if let Some(text) = value_text(Some(cell)) {
            out.push((
                ChangeKind::CellChange,
                new.name.clone(),
                cell.address.render_r1c1(),
                Some(text),
                None,
            ));
        }
    }
}

/// Positional comparison of one aligned row pair. Ranges are reported in
/// the new sheet's coordinates.
fn diff_row_pair(old: &Sheet, old_row: u32, new: &Sheet, new_row: u32, out: &mut Pending) {
    let mut cols: Vec<u32> = old
        .cells()
        .filter(|c| c.address.row == old_row)
        .map(|c| c.address.col)
        .collect();
    cols.extend(
        new.cells()
            .filter(|c| c.address.row == new_row)
            .map(|c| c.address.col),
    );
    cols.sort_unstable();
    cols.dedup();
    for col in cols {
        let old_cell = old.cell(CellAddress::new(old_row, col));
        let new_cell = new.cell(CellAddress::new(new_row, col));
        if compare_key(old_cell) != compare_key(new_cell) {
            out.push((
                ChangeKind::CellChange,
                new.name.clone(),
                CellAddress::new(new_row, col).render_r1c1(),
                value_text(new_cell),
                value_text(old_cell),
            ));
        }
    }
}

pub const CHANGE_COLUMNS: [&str; 11] = [
    "Action Number",
    "Date",
    "Time",
    "Who",
    "Change",
    "Sheet",
    "Range",
    "New Value",
    "Old Value",
    "Action Type",
    "Losing Action",
];

/// Render the change table. The trailing history line carries the
/// supplied save timestamp; the last two columns exist only in shared
/// workbook sessions and stay blank here.
pub fn render_change_table(
    records: &[ChangeRecord],
    saved_at: NaiveDateTime,
    format: OutputFormat,
) -> String {
    let footer = format!(
        "The history ends with the changes saved on {} at {}.",
        render_date(saved_at.date()),
        render_time(saved_at.time())
    );
    let rows: Vec<Vec<String>> = records.iter().map(record_row).collect();
    match format {
        OutputFormat::Csv => {
            let mut out = String::new();
            out.push_str(&tabletext::csv_row(
                &CHANGE_COLUMNS
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>(),
            ));
            out.push('\n');
            for row in rows {
                out.push_str(&tabletext::csv_row(&row));
                out.push('\n');
            }
            out.push_str(&tabletext::csv_field(&footer));
            out.push('\n');
            out
        }
        OutputFormat::Markdown => {
            let mut out = String::new();
            out.push_str(&tabletext::md_row(
                &CHANGE_COLUMNS
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>(),
            ));
            out.push('\n');
            out.push_str(&tabletext::md_separator(CHANGE_COLUMNS.len()));
            out.push('\n');
            for row in rows {
                out.push_str(&tabletext::md_row(&row));
                out.push('\n');
            }
            out.push('\n');
            out.push_str(&footer);
            out.push('\n');
            out
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct ChangeTable<'a> {
                records: &'a [ChangeRecord],
                history_end: String,
            }
            let mut text = serde_json::to_string_pretty(&ChangeTable {
                records,
                history_end: footer,
            })
            .expect("change records serialize");
            text.push('\n');
            text
        }
    }
}

fn record_row(record: &ChangeRecord) -> Vec<String> {
    vec![
        record.action_number.to_string(),
        render_date(record.date),
        render_time(record.time),
        record.who.clone(),
        record.change.label().to_string(),
        record.sheet.clone(),
        record.range.clone(),
        record.new_value.clone().unwrap_or_default(),
        record.old_value.clone().unwrap_or_default(),
        String::new(),
        String::new(),
    ]
}
