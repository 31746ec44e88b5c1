//! Plain-text fixture loader.
//!
//! One record per line:
//!
//! ```text
//! SHEET <name>
//! CELL <A1-addr> TYPE <text|num|date|formula> VALUE <literal> [FORMULA <text>] [FORMAT <text>] [LOCKED] [VALIDATED]
//! COMMENT <A1-addr> <<<
//! ...verbatim body...
//! >>>
//! NAME <defined-name> <range>
//! ```
//!
//! `VALUE`, `FORMULA` and `FORMAT` payloads run to the next keyword
//! token or end of line. `NAME` ranges may carry a `Sheet!` prefix and
//! default to the current sheet.

use std::fs;
use std::path::Path;

use crate::model::{
    Cell, CellAddress, CellContent, CellRange, CommentText, DefinedNameTarget, ErrorCode, Scalar,
    Sheet, Workbook,
};

use super::{attach_sidecar_vba, date_to_serial, file_meta_from_fs, IngestError, IngestReport};

pub fn load_fixture(path: &Path) -> Result<IngestReport, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut workbook = parse_fixture(&text, &path.display().to_string())?;
    workbook.file_meta = file_meta_from_fs(path);
    workbook.file_meta.file_format = "fixture".to_string();
    let mut observations = Vec::new();
    attach_sidecar_vba(path, &mut workbook, &mut observations);
    Ok(IngestReport {
        workbook,
        observations,
    })
}

fn syntax(line: usize, message: impl Into<String>) -> IngestError {
    IngestError::FixtureSyntax {
        line,
        message: message.into(),
    }
}

pub(crate) fn parse_fixture(text: &str, source_path: &str) -> Result<Workbook, IngestError> {
    let mut wb = Workbook::new(source_path);
    let lines: Vec<&str> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();
    let mut i = 0;

    while i < lines.len() {
        let line_no = i + 1;
        let line = lines[i];
        i += 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ' ');
        let directive = parts.next().unwrap_or("");
        let rest = parts.next().unwrap_or("").trim();
        match directive {
            "SHEET" => {
                if rest.is_empty() {
                    return Err(syntax(line_no, "SHEET needs a name"));
                }
                if wb.sheets.iter().any(|s| s.name == rest) {
                    return Err(syntax(line_no, format!("duplicate sheet name {rest:?}")));
                }
                wb.sheets.push(Sheet::new(rest));
            }
            "CELL" => {
                let sheet = wb
                    .sheets
                    .last_mut()
                    .ok_or_else(|| syntax(line_no, "CELL before any SHEET"))?;
                let cell = parse_cell_line(rest, line_no)?;
                if sheet
                    .cell(cell.address)
                    .is_some_and(|c| !c.content.is_empty())
                {
                    return Err(syntax(
                        line_no,
                        format!("duplicate cell {}", cell.address.render_a1()),
                    ));
                }
                let addr = cell.address;
                let existing_comment = sheet.cell(addr).and_then(|c| c.comment.clone());
                let mut cell = cell;
                if cell.comment.is_none() {
                    cell.comment = existing_comment;
                }
                sheet.insert(cell);
            }
            "COMMENT" => {
                let mut tokens = rest.split_whitespace();
                let addr_text = tokens
                    .next()
                    .ok_or_else(|| syntax(line_no, "COMMENT needs an address"))?;
                let addr =
                    CellAddress::parse_a1(addr_text).map_err(|e| syntax(line_no, e.to_string()))?;
                if tokens.next() != Some("<<<") {
                    return Err(syntax(line_no, "COMMENT body must open with <<<"));
                }
                let mut body_lines = Vec::new();
                let mut closed = false;
                while i < lines.len() {
                    let body_line = lines[i];
                    i += 1;
                    if body_line == ">>>" {
                        closed = true;
                        break;
                    }
                    body_lines.push(body_line.to_string());
                }
                if !closed {
                    return Err(syntax(line_no, "COMMENT body never closed with >>>"));
                }
                let sheet = wb
                    .sheets
                    .last_mut()
                    .ok_or_else(|| syntax(line_no, "COMMENT before any SHEET"))?;
                sheet.cell_entry(addr).comment = Some(CommentText {
                    author_prefix: None,
                    body: body_lines.join("\n"),
                });
            }
            "NAME" => {
                let mut tokens = rest.splitn(2, ' ');
                let name = tokens
                    .next()
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| syntax(line_no, "NAME needs a name"))?
                    .to_string();
                let target_text = tokens
                    .next()
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .ok_or_else(|| syntax(line_no, "NAME needs a range"))?;
                if wb
                    .defined_names
                    .keys()
                    .any(|k| k.eq_ignore_ascii_case(&name))
                {
                    return Err(syntax(line_no, format!("duplicate defined name {name:?}")));
                }
                let (sheet_name, range_text) = match split_sheet_prefix(target_text) {
                    Some((sheet, range)) => (sheet, range),
                    None => {
                        let current = wb
                            .sheets
                            .last()
                            .ok_or_else(|| syntax(line_no, "NAME before any SHEET"))?;
                        (current.name.clone(), target_text.to_string())
                    }
                };
                let range =
                    CellRange::parse(&range_text).map_err(|e| syntax(line_no, e.to_string()))?;
                wb.defined_names.insert(
                    name,
                    DefinedNameTarget::Range {
                        sheet: sheet_name,
                        range,
                    },
                );
            }
            other => {
                return Err(syntax(line_no, format!("unknown directive {other:?}")));
            }
        }
    }

    if wb.sheets.is_empty() {
        return Err(syntax(1, "fixture declares no sheets"));
    }
    Ok(wb)
}

fn split_sheet_prefix(text: &str) -> Option<(String, String)> {
    let (sheet, range) = text.rsplit_once('!')?;
    let sheet = sheet.trim_matches('\'').to_string();
    Some((sheet, range.to_string()))
}

const KEYWORDS: [&str; 4] = ["FORMULA", "FORMAT", "LOCKED", "VALIDATED"];

fn parse_cell_line(rest: &str, line_no: usize) -> Result<Cell, IngestError> {
    let tokens: Vec<&str> = rest.split_whitespace().collect();
    let mut pos = 0;
    let mut take = |expected: Option<&str>| -> Result<&str, IngestError> {
        let tok = tokens
            .get(pos)
            .copied()
            .ok_or_else(|| syntax(line_no, "truncated CELL line"))?;
        pos += 1;
        if let Some(want) = expected {
            if tok != want {
                return Err(syntax(line_no, format!("expected {want}, found {tok:?}")));
            }
        }
        Ok(tok)
    };

    let addr = CellAddress::parse_a1(take(None)?).map_err(|e| syntax(line_no, e.to_string()))?;
    take(Some("TYPE"))?;
    let kind = take(None)?.to_string();
    take(Some("VALUE"))?;

    // Payloads run to the next keyword token.
    let grab_payload = |pos: &mut usize| -> String {
        let start = *pos;
        while *pos < tokens.len() && !KEYWORDS.contains(&tokens[*pos]) {
            *pos += 1;
        }
        tokens[start..*pos].join(" ")
    };

    let value_text = grab_payload(&mut pos);
    let mut formula_text: Option<String> = None;
    let mut format_text: Option<String> = None;
    let mut locked = false;
    let mut validated = false;
    while pos < tokens.len() {
        match tokens[pos] {
            "FORMULA" => {
                pos += 1;
                formula_text = Some(grab_payload(&mut pos));
            }
            "FORMAT" => {
                pos += 1;
                format_text = Some(grab_payload(&mut pos));
            }
            "LOCKED" => {
                pos += 1;
                locked = true;
            }
            "VALIDATED" => {
                pos += 1;
                validated = true;
            }
            other => return Err(syntax(line_no, format!("unexpected token {other:?}"))),
        }
    }

    let mut cell = match kind.as_str() {
        "text" => Cell::new(addr, CellContent::Text(value_text)),
        "num" => {
            let n: f64 = value_text
                .parse()
                .map_err(|_| syntax(line_no, format!("bad number {value_text:?}")))?;
            Cell::new(addr, CellContent::Number(n))
        }
        "date" => {
            let parsed = parse_fixture_datetime(&value_text)
                .ok_or_else(|| syntax(line_no, format!("bad date {value_text:?}")))?;
            let mut cell = Cell::new(addr, CellContent::Date(parsed));
            cell.cached_value = Some(Scalar::Number(date_to_serial(parsed)));
            cell.number_format = "m/d/yyyy".to_string();
            cell
        }
        "formula" => {
            let text = formula_text
                .clone()
                .ok_or_else(|| syntax(line_no, "formula cells need FORMULA <text>"))?;
            let text = if text.starts_with('=') {
                text
            } else {
                format!("={text}")
            };
            let mut cell = Cell::new(addr, CellContent::Formula(text));
            cell.cached_value = parse_cached_literal(&value_text);
            cell
        }
        other => return Err(syntax(line_no, format!("unknown cell type {other:?}"))),
    };
    if kind != "formula" && formula_text.is_some() {
        return Err(syntax(line_no, "FORMULA is only valid on formula cells"));
    }
    if let Some(format) = format_text {
        cell.number_format = format;
    }
    cell.locked = locked;
    cell.has_validation = validated;
    Ok(cell)
}

fn parse_fixture_datetime(text: &str) -> Option<chrono::NaiveDateTime> {
    if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S") {
        return Some(dt);
    }
    chrono::NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .map(|d| d.into())
}

fn parse_cached_literal(text: &str) -> Option<Scalar> {
    if text.is_empty() {
        return None;
    }
    if let Some(code) = ErrorCode::parse(text) {
        return Some(Scalar::Error(code));
    }
    if let Ok(n) = text.parse::<f64>() {
        return Some(Scalar::Number(n));
    }
    match text {
        "TRUE" => Some(Scalar::Bool(true)),
        "FALSE" => Some(Scalar::Bool(false)),
        _ => Some(Scalar::Text(text.to_string())),
    }
}
