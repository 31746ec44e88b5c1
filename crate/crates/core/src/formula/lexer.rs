//! Formula tokenizer.

use crate::model::{letters_to_col, ErrorCode, MAX_COL, MAX_ROW};

use super::{Coord, FormulaError};

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    Number(f64),
    Text(String),
    ErrorLit(ErrorCode),
    Ident(String),
    A1 {
        col_abs: bool,
        col: u32,
        row_abs: bool,
        row: u32,
    },
    R1C1 {
        row: Coord,
        col: Coord,
    },
    /// `'quoted sheet name'` — only meaningful before `!`.
    QuotedName(String),
    /// `[workbook qualifier]`.
    Bracket(String),
    Bang,
    LParen,
    RParen,
    Comma,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Amp,
    Percent,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct Spanned {
    pub tok: Tok,
    pub offset: usize,
}

const ERROR_LITERALS: [&str; 7] = [
    "#DIV/0!", "#N/A", "#NAME?", "#NULL!", "#NUM!", "#REF!", "#VALUE!",
];

pub(super) fn lex(text: &str) -> Result<Vec<Spanned>, FormulaError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;

    while i < bytes.len() {
        let start = i;
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                i += 1;
            }
            '"' => {
                let (lit, next) = read_quoted(text, i, '"')?;
                out.push(Spanned {
                    tok: Tok::Text(lit),
                    offset: start,
                });
                i = next;
            }
            '\'' => {
                let (lit, next) = read_quoted(text, i, '\'')?;
                out.push(Spanned {
                    tok: Tok::QuotedName(lit),
                    offset: start,
                });
                i = next;
            }
            '[' => {
                let end = text[i + 1..]
                    .find(']')
                    .map(|p| i + 1 + p)
                    .ok_or_else(|| FormulaError::syntax(start, "unterminated '['"))?;
                out.push(Spanned {
                    tok: Tok::Bracket(text[i + 1..end].to_string()),
                    offset: start,
                });
                i = end + 1;
            }
            '#' => {
                let upper = text[i..].to_ascii_uppercase();
                let lit = ERROR_LITERALS
                    .iter()
                    .find(|l| upper.starts_with(**l))
                    .ok_or_else(|| FormulaError::syntax(start, "unknown error literal"))?;
                let code = ErrorCode::parse(lit).unwrap();
                out.push(Spanned {
                    tok: Tok::ErrorLit(code),
                    offset: start,
                });
                i += lit.len();
            }
            '0'..='9' => {
                let (n, next) = read_number(text, i)?;
                out.push(Spanned {
                    tok: Tok::Number(n),
                    offset: start,
                });
                i = next;
            }
            '.' if i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() => {
                let (n, next) = read_number(text, i)?;
                out.push(Spanned {
                    tok: Tok::Number(n),
                    offset: start,
                });
                i = next;
            }
            '!' => {
                out.push(Spanned {
                    tok: Tok::Bang,
                    offset: start,
                });
                i += 1;
            }
            '(' => {
                out.push(Spanned {
                    tok: Tok::LParen,
                    offset: start,
                });
                i += 1;
            }
            ')' => {
                out.push(Spanned {
                    tok: Tok::RParen,
                    offset: start,
                });
                i += 1;
            }
            ',' => {
                out.push(Spanned {
                    tok: Tok::Comma,
                    offset: start,
                });
                i += 1;
            }
            ':' => {
                out.push(Spanned {
                    tok: Tok::Colon,
                    offset: start,
                });
                i += 1;
            }
            '+' => {
                out.push(Spanned {
                    tok: Tok::Plus,
                    offset: start,
                });
                i += 1;
            }
            '-' => {
                out.push(Spanned {
                    tok: Tok::Minus,
                    offset: start,
                });
                i += 1;
            }
            '*' => {
                out.push(Spanned {
                    tok: Tok::Star,
                    offset: start,
                });
                i += 1;
            }
            '/' => {
                out.push(Spanned {
                    tok: Tok::Slash,
                    offset: start,
                });
                i += 1;
            }
            '^' => {
                out.push(Spanned {
                    tok: Tok::Caret,
                    offset: start,
                });
                i += 1;
            }
            '&' => {
                out.push(Spanned {
                    tok: Tok::Amp,
                    offset: start,
                });
                i += 1;
            }
            '%' => {
                out.push(Spanned {
                    tok: Tok::Percent,
                    offset: start,
                });
                i += 1;
            }
            '=' => {
                out.push(Spanned {
                    tok: Tok::Eq,
                    offset: start,
                });
                i += 1;
            }
            '<' => {
                let tok = match bytes.get(i + 1) {
                    Some(b'=') => {
                        i += 2;
                        Tok::Le
                    }
                    Some(b'>') => {
                        i += 2;
                        Tok::Ne
                    }
                    _ => {
                        i += 1;
                        Tok::Lt
                    }
                };
                out.push(Spanned { tok, offset: start });
            }
            '>' => {
                let tok = if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    Tok::Ge
                } else {
                    i += 1;
                    Tok::Gt
                };
                out.push(Spanned { tok, offset: start });
            }
            c if c.is_ascii_alphabetic() || c == '_' || c == '$' => {
                if let Some((tok, next)) = try_r1c1(text, i) {
                    out.push(Spanned { tok, offset: start });
                    i = next;
                } else {
                    let (tok, next) = read_chunk(text, i)?;
                    out.push(Spanned { tok, offset: start });
                    i = next;
                }
            }
            _ => {
                return Err(FormulaError::syntax(
                    start,
                    format!("unexpected character {c:?}"),
                ))
            }
        }
    }
    Ok(out)
}

fn read_quoted(text: &str, start: usize, quote: char) -> Result<(String, usize), FormulaError> {
    let mut lit = String::new();
    let mut chars = text[start + 1..].char_indices().peekable();
    while let Some((pos, c)) = chars.next() {
        if c == quote {
            if chars.peek().map(|(_, c2)| *c2) == Some(quote) {
                lit.push(quote);
                chars.next();
            } else {
                return Ok((lit, start + 1 + pos + 1));
            }
        } else {
            lit.push(c);
        }
    }
    Err(FormulaError::syntax(start, format!("unterminated {quote}")))
}

fn read_number(text: &str, start: usize) -> Result<(f64, usize), FormulaError> {
    let bytes = text.as_bytes();
    let mut i = start;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = j;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    text[start..i]
        .parse::<f64>()
        .map(|n| (n, i))
        .map_err(|_| FormulaError::syntax(start, "malformed number"))
}

/// Match an explicit `R...C...` reference at `start`. Both the row and
/// column parts are optional (`RC` is a self-reference); tokens that are
/// also valid A1 addresses ("R1", "C3") are left to the A1 path, so this
/// only fires when both an R part and a C part are present.
fn try_r1c1(text: &str, start: usize) -> Option<(Tok, usize)> {
    let bytes = text.as_bytes();
    let mut i = start;
    if !matches!(bytes.get(i), Some(b'R') | Some(b'r')) {
        return None;
    }
    i += 1;
    let (row, next) = r1c1_part(text, i)?;
    i = next;
    if !matches!(bytes.get(i), Some(b'C') | Some(b'c')) {
        return None;
    }
    i += 1;
    let (col, next) = r1c1_part(text, i)?;
    i = next;
    // Must not continue into an identifier (RC_TOTAL, R1C1X, ...).
    if let Some(&b) = bytes.get(i) {
        if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' {
            return None;
        }
    }
    if let Coord::Abs(n) = row {
        if n == 0 || n > MAX_ROW {
            return None;
        }
    }
    if let Coord::Abs(n) = col {
        if n == 0 || n > MAX_COL {
            return None;
        }
    }
    Some((Tok::R1C1 { row, col }, i))
}

fn r1c1_part(text: &str, start: usize) -> Option<(Coord, usize)> {
    let bytes = text.as_bytes();
    match bytes.get(start) {
        Some(b'[') => {
            let close = text[start + 1..].find(']')? + start + 1;
            let inner: i64 = text[start + 1..close].parse().ok()?;
            Some((Coord::Offset(inner), close + 1))
        }
        Some(b) if b.is_ascii_digit() => {
            let mut i = start;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n: u32 = text[start..i].parse().ok()?;
            Some((Coord::Abs(n), i))
        }
        _ => Some((Coord::Offset(0), start)),
    }
}

/// Read a `$`/letter/digit chunk and classify it as an A1 reference or an
/// identifier.
fn read_chunk(text: &str, start: usize) -> Result<(Tok, usize), FormulaError> {
    let bytes = text.as_bytes();
    let mut i = start;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' || b == b'$' {
            i += 1;
        } else {
            break;
        }
    }
    let chunk = &text[start..i];
    if let Some(tok) = parse_a1_chunk(chunk) {
        return Ok((tok, i));
    }
    if chunk.contains('$') {
        return Err(FormulaError::syntax(
            start,
            format!("malformed reference {chunk:?}"),
        ));
    }
    Ok((Tok::Ident(chunk.to_string()), i))
}

fn parse_a1_chunk(chunk: &str) -> Option<Tok> {
    let mut rest = chunk;
    let col_abs = rest.starts_with('$');
    if col_abs {
        rest = &rest[1..];
    }
    let letters: String = rest
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    if letters.is_empty() || letters.len() > 3 {
        return None;
    }
    rest = &rest[letters.len()..];
    let row_abs = rest.starts_with('$');
    if row_abs {
        rest = &rest[1..];
    }
    if rest.is_empty() || rest.len() > 7 || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let col = letters_to_col(&letters)?;
    let row: u32 = rest.parse().ok()?;
    if row == 0 || row > MAX_ROW || col > MAX_COL {
        return None;
    }
    Some(Tok::A1 {
        col_abs,
        col,
        row_abs,
        row,
    })
}
