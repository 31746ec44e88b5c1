//! In-memory workbook model and its addressing scheme.
//!
//! Everything here is immutable after construction and safe to share
//! across concurrent analysis passes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDateTime;
use serde::Serialize;
use thiserror::Error;

use crate::vba::MacroModule;

/// Highest addressable row (1-based).
pub const MAX_ROW: u32 = 1_048_576;
/// Highest addressable column ("XFD").
pub const MAX_COL: u32 = 16_384;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AddressError {
    #[error("malformed address {0:?}")]
    MalformedAddress(String),
    #[error("malformed range {0:?}")]
    MalformedRange(String),
}

/// 1-based cell coordinates. Ordering is row-major, which is the
/// traversal order used throughout (reports, diffs, coverage).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CellAddress {
    pub row: u32,
    pub col: u32,
}

impl CellAddress {
    pub fn new(row: u32, col: u32) -> Self {
        assert!(row >= 1 && col >= 1, "cell coordinates are 1-based");
        CellAddress { row, col }
    }

    /// Parse an A1-style address. Column letters are case-insensitive;
    /// `"1A"`, `"A0"` and `""` are rejected.
    pub fn parse_a1(text: &str) -> Result<Self, AddressError> {
        let bad = || AddressError::MalformedAddress(text.to_string());
        let letters: String = text
            .chars()
            .take_while(|c| c.is_ascii_alphabetic())
            .collect();
        let digits = &text[letters.len()..];
        if letters.is_empty() || letters.len() > 3 || digits.is_empty() {
            return Err(bad());
        }
        if !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let col = letters_to_col(&letters).ok_or_else(bad)?;
        let row: u32 = digits.parse().map_err(|_| bad())?;
        if row == 0 || row > MAX_ROW || col > MAX_COL {
            return Err(bad());
        }
        Ok(CellAddress { row, col })
    }

    pub fn render_a1(&self) -> String {
        format!("{}{}", col_to_letters(self.col), self.row)
    }

    pub fn render_r1c1(&self) -> String {
        format!("R{}C{}", self.row, self.col)
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_a1())
    }
}

/// Column number (1-based) to letters: 1 -> "A", 27 -> "AA".
pub fn col_to_letters(col: u32) -> String {
    assert!(col >= 1);
    let mut n = col;
    let mut out = Vec::new();
    while n > 0 {
        let rem = ((n - 1) % 26) as u8;
        out.push(b'A' + rem);
        n = (n - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

/// Letters to column number; `None` for empty or non-alphabetic input.
pub fn letters_to_col(letters: &str) -> Option<u32> {
    if letters.is_empty() {
        return None;
    }
    let mut col: u32 = 0;
    for c in letters.chars() {
        if !c.is_ascii_alphabetic() {
            return None;
        }
        let v = (c.to_ascii_uppercase() as u32) - ('A' as u32) + 1;
        col = col.checked_mul(26)?.checked_add(v)?;
    }
    Some(col)
}

/// Rectangular cell range with normalized corners
/// (`start.row <= end.row`, `start.col <= end.col`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CellRange {
    pub start: CellAddress,
    pub end: CellAddress,
}

impl CellRange {
    /// Build a range from two corners in any order.
    pub fn new(a: CellAddress, b: CellAddress) -> Self {
        CellRange {
            start: CellAddress::new(a.row.min(b.row), a.col.min(b.col)),
            end: CellAddress::new(a.row.max(b.row), a.col.max(b.col)),
        }
    }

    pub fn single(addr: CellAddress) -> Self {
        CellRange {
            start: addr,
            end: addr,
        }
    }

    /// Parse `"A2:A10"` or a single address `"B3"`.
    pub fn parse(text: &str) -> Result<Self, AddressError> {
        match text.split_once(':') {
            Some((a, b)) => {
                let a = CellAddress::parse_a1(a.trim())
                    .map_err(|_| AddressError::MalformedRange(text.to_string()))?;
                let b = CellAddress::parse_a1(b.trim())
                    .map_err(|_| AddressError::MalformedRange(text.to_string()))?;
                Ok(CellRange::new(a, b))
            }
            None => CellAddress::parse_a1(text.trim())
                .map(CellRange::single)
                .map_err(|_| AddressError::MalformedRange(text.to_string())),
        }
    }

    pub fn render(&self) -> String {
        if self.start == self.end {
            self.start.render_a1()
        } else {
            format!("{}:{}", self.start.render_a1(), self.end.render_a1())
        }
    }

    pub fn contains(&self, addr: CellAddress) -> bool {
        addr.row >= self.start.row
            && addr.row <= self.end.row
            && addr.col >= self.start.col
            && addr.col <= self.end.col
    }

    pub fn rows(&self) -> u32 {
        self.end.row - self.start.row + 1
    }

    pub fn cols(&self) -> u32 {
        self.end.col - self.start.col + 1
    }

    pub fn area(&self) -> u64 {
        self.rows() as u64 * self.cols() as u64
    }

    pub fn is_single_column(&self) -> bool {
        self.cols() == 1
    }

    pub fn is_single_row(&self) -> bool {
        self.rows() == 1
    }

    /// Iterate member addresses in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = CellAddress> + '_ {
        let (r0, r1) = (self.start.row, self.end.row);
        let (c0, c1) = (self.start.col, self.end.col);
        (r0..=r1).flat_map(move |row| (c0..=c1).map(move |col| CellAddress { row, col }))
    }
}

impl fmt::Display for CellRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// The closed set of spreadsheet error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ErrorCode {
    Div0,
    NA,
    Name,
    Null,
    Num,
    Ref,
    Value,
}

impl ErrorCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCode::Div0 => "#DIV/0!",
            ErrorCode::NA => "#N/A",
            ErrorCode::Name => "#NAME?",
            ErrorCode::Null => "#NULL!",
            ErrorCode::Num => "#NUM!",
            ErrorCode::Ref => "#REF!",
            ErrorCode::Value => "#VALUE!",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.to_ascii_uppercase().as_str() {
            "#DIV/0!" => Some(ErrorCode::Div0),
            "#N/A" => Some(ErrorCode::NA),
            "#NAME?" => Some(ErrorCode::Name),
            "#NULL!" => Some(ErrorCode::Null),
            "#NUM!" => Some(ErrorCode::Num),
            "#REF!" => Some(ErrorCode::Ref),
            "#VALUE!" => Some(ErrorCode::Value),
            _ => None,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A cached scalar as stored in the file next to a formula or constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Scalar {
    Number(f64),
    Text(String),
    Bool(bool),
    Error(ErrorCode),
    Blank,
}

impl Scalar {
    pub fn canonical_text(&self) -> String {
        match self {
            Scalar::Number(n) => render_number(*n),
            Scalar::Text(t) => t.clone(),
            Scalar::Bool(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
            Scalar::Error(e) => e.as_str().to_string(),
            Scalar::Blank => String::new(),
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Scalar::Error(_))
    }
}

/// Shortest decimal rendering that round-trips the value.
pub fn render_number(n: f64) -> String {
    format!("{n}")
}

/// What a cell holds. A cell is exactly one of these; the formula text
/// lives in the `Formula` variant so the partition holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CellContent {
    Empty,
    Text(String),
    Number(f64),
    Date(NaiveDateTime),
    /// Formula text including the leading `=`.
    Formula(String),
}

impl CellContent {
    pub fn kind_name(&self) -> &'static str {
        match self {
            CellContent::Empty => "empty",
            CellContent::Text(_) => "text",
            CellContent::Number(_) => "num",
            CellContent::Date(_) => "date",
            CellContent::Formula(_) => "formula",
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, CellContent::Empty)
    }

    /// Canonical value text for constants (dates render ISO, midnight
    /// time omitted). Formulas render their formula text.
    pub fn canonical_text(&self) -> String {
        match self {
            CellContent::Empty => String::new(),
            CellContent::Text(t) => t.clone(),
            CellContent::Number(n) => render_number(*n),
            CellContent::Date(d) => render_datetime(*d),
            CellContent::Formula(f) => f.clone(),
        }
    }
}

pub fn render_datetime(d: NaiveDateTime) -> String {
    if d.time() == chrono::NaiveTime::MIN {
        d.format("%Y-%m-%d").to_string()
    } else {
        d.format("%Y-%m-%d %H:%M:%S").to_string()
    }
}

/// A cell comment. The body is preserved byte-for-byte from the source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommentText {
    pub author_prefix: Option<String>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub address: CellAddress,
    pub content: CellContent,
    pub cached_value: Option<Scalar>,
    pub number_format: String,
    pub locked: bool,
    pub has_validation: bool,
    pub comment: Option<CommentText>,
}

impl Cell {
    pub fn new(address: CellAddress, content: CellContent) -> Self {
        let cached_value = match &content {
            CellContent::Text(t) => Some(Scalar::Text(t.clone())),
            CellContent::Number(n) => Some(Scalar::Number(*n)),
            _ => None,
        };
        Cell {
            address,
            content,
            cached_value,
            number_format: "General".to_string(),
            locked: false,
            has_validation: false,
            comment: None,
        }
    }

    pub fn formula_text(&self) -> Option<&str> {
        match &self.content {
            CellContent::Formula(f) => Some(f),
            _ => None,
        }
    }

    /// Text used when two versions of this cell are compared: formula
    /// text for formulas, the constant's canonical text otherwise.
    pub fn compare_text(&self) -> String {
        match &self.content {
            CellContent::Formula(f) => f.clone(),
            CellContent::Empty => self
                .cached_value
                .as_ref()
                .map(Scalar::canonical_text)
                .unwrap_or_default(),
            other => other.canonical_text(),
        }
    }

    /// True when the cell carries no information at all and can be
    /// omitted from the sheet map.
    pub fn is_blank_record(&self) -> bool {
        self.content.is_empty()
            && self.comment.is_none()
            && !self.has_validation
            && self.cached_value.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum SheetVisibility {
    Visible,
    Hidden,
    VeryHidden,
}

/// Structural features detected on a sheet from the container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum SheetFlag {
    CircularReference,
    ConsolidationSources,
    FilteredHiddenRows,
    OleObjects,
    PivotTables,
    QueryTables,
    Scenarios,
}

impl SheetFlag {
    pub fn label(&self) -> &'static str {
        match self {
            SheetFlag::CircularReference => "Circular Reference",
            SheetFlag::ConsolidationSources => "Consolidation sources",
            SheetFlag::FilteredHiddenRows => "Filtered with hidden rows",
            SheetFlag::OleObjects => "OLE Objects",
            SheetFlag::PivotTables => "Pivot Tables",
            SheetFlag::QueryTables => "Query tables",
            SheetFlag::Scenarios => "Scenarios",
        }
    }
}

/// One worksheet. The cell map is sparse: blank cells are absent, and
/// no two cells share an address.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sheet {
    pub name: String,
    cells: BTreeMap<CellAddress, Cell>,
    pub protected: bool,
    pub visibility: SheetVisibility,
    pub flags: BTreeSet<SheetFlag>,
}

impl Sheet {
    pub fn new(name: impl Into<String>) -> Self {
        Sheet {
            name: name.into(),
            cells: BTreeMap::new(),
            protected: false,
            visibility: SheetVisibility::Visible,
            flags: BTreeSet::new(),
        }
    }

    /// Insert a cell, returning the previous occupant of the address.
    /// Fully blank cells are dropped rather than stored.
    pub fn insert(&mut self, cell: Cell) -> Option<Cell> {
        if cell.is_blank_record() {
            return self.cells.remove(&cell.address);
        }
        self.cells.insert(cell.address, cell)
    }

    pub fn cell(&self, addr: CellAddress) -> Option<&Cell> {
        self.cells.get(&addr)
    }

    /// Non-blank cells in row-major address order.
    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.values()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// True when the address holds no content (absent, or present only
    /// for a comment/flag).
    pub fn is_empty_at(&self, addr: CellAddress) -> bool {
        self.cells.get(&addr).is_none_or(|c| c.content.is_empty())
    }

    /// Mutable access for loaders attaching comments or flags to cells
    /// that may not exist yet.
    pub fn cell_entry(&mut self, addr: CellAddress) -> &mut Cell {
        self.cells.entry(addr).or_insert_with(|| Cell {
            address: addr,
            content: CellContent::Empty,
            cached_value: None,
            number_format: "General".to_string(),
            locked: false,
            has_validation: false,
            comment: None,
        })
    }
}

/// Target of a defined name: either a concrete sheet range or the raw
/// definition text when it is anything more exotic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DefinedNameTarget {
    Range { sheet: String, range: CellRange },
    Formula(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum FileAttribute {
    Archive,
    Hidden,
    ReadOnly,
    System,
}

impl FileAttribute {
    pub fn letter(&self) -> char {
        match self {
            FileAttribute::Archive => 'A',
            FileAttribute::Hidden => 'H',
            FileAttribute::ReadOnly => 'R',
            FileAttribute::System => 'S',
        }
    }
}

pub fn attributes_text(attrs: &BTreeSet<FileAttribute>) -> String {
    attrs.iter().map(FileAttribute::letter).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FileMeta {
    pub size_bytes: u64,
    pub created: Option<NaiveDateTime>,
    pub accessed: Option<NaiveDateTime>,
    pub modified: Option<NaiveDateTime>,
    pub attributes: BTreeSet<FileAttribute>,
    pub author_property: Option<String>,
    pub manager_property: Option<String>,
    pub file_format: String,
}

/// One loaded workbook.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Workbook {
    pub source_path: String,
    pub sheets: Vec<Sheet>,
    pub defined_names: BTreeMap<String, DefinedNameTarget>,
    pub external_links: Vec<String>,
    pub vba_modules: Vec<MacroModule>,
    pub file_meta: FileMeta,
}

impl Workbook {
    pub fn new(source_path: impl Into<String>) -> Self {
        Workbook {
            source_path: source_path.into(),
            sheets: Vec::new(),
            defined_names: BTreeMap::new(),
            external_links: Vec::new(),
            vba_modules: Vec::new(),
            file_meta: FileMeta::default(),
        }
    }

    pub fn sheet(&self, name: &str) -> Option<&Sheet> {
        self.sheets.iter().find(|s| s.name == name)
    }

    /// Case-insensitive defined-name lookup.
    pub fn defined_name(&self, name: &str) -> Option<&DefinedNameTarget> {
        self.defined_names
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v)
    }

    pub fn filename(&self) -> String {
        std::path::Path::new(&self.source_path)
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.source_path.clone())
    }

    /// Content equality: everything observable in the file body, ignoring
    /// provenance (source path, file metadata). Two loaders reading the
    /// same logical workbook must agree on this.
    pub fn content_eq(&self, other: &Workbook) -> bool {
        self.sheets == other.sheets
            && self.defined_names == other.defined_names
            && self.external_links == other.external_links
            && self.vba_modules == other.vba_modules
    }

    /// Line-per-fact dump of the content portion, for readable test diffs.
    pub fn content_lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for sheet in &self.sheets {
            out.push(format!(
                "sheet {:?} protected={} visibility={:?} flags={:?}",
                sheet.name, sheet.protected, sheet.visibility, sheet.flags
            ));
            for cell in sheet.cells() {
                let mut line = format!(
                    "cell {}!{} {} {:?}",
                    sheet.name,
                    cell.address.render_a1(),
                    cell.content.kind_name(),
                    cell.content.canonical_text(),
                );
                if let Some(cached) = &cell.cached_value {
                    line.push_str(&format!(" cached={:?}", cached.canonical_text()));
                }
                line.push_str(&format!(" fmt={:?}", cell.number_format));
                if cell.locked {
                    line.push_str(" locked");
                }
                if cell.has_validation {
                    line.push_str(" validated");
                }
                out.push(line);
                if let Some(comment) = &cell.comment {
                    out.push(format!(
                        "comment {}!{} author={:?} body={:?}",
                        sheet.name,
                        cell.address.render_a1(),
                        comment.author_prefix,
                        comment.body
                    ));
                }
            }
        }
        for (name, target) in &self.defined_names {
            out.push(format!("name {name:?} = {target:?}"));
        }
        for link in &self.external_links {
            out.push(format!("external {link:?}"));
        }
        for module in &self.vba_modules {
            out.push(format!(
                "vba {:?} lines={} procedures={}",
                module.name,
                module.line_count(),
                module.procedures.len()
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_a1_basics() {
        assert_eq!(CellAddress::parse_a1("A1").unwrap(), CellAddress::new(1, 1));
        assert_eq!(CellAddress::parse_a1("A2").unwrap(), CellAddress::new(2, 1));
        assert_eq!(CellAddress::parse_a1("a2").unwrap(), CellAddress::new(2, 1));
    }

    #[test]
    fn parse_a1_column_letters_match_sequential_enumeration() {
        // Independent oracle: generate letters A, B, ..., Z, AA, AB, ...
        // by counting, and check the parser agrees on each index.
        let mut letters = Vec::new();
        let alphabet: Vec<char> = ('A'..='Z').collect();
        for a in &alphabet {
            letters.push(a.to_string());
        }
        for a in &alphabet {
            for b in &alphabet {
                letters.push(format!("{a}{b}"));
            }
        }
        for (idx, name) in letters.iter().enumerate() {
            let col = (idx + 1) as u32;
            assert_eq!(letters_to_col(name), Some(col), "column {name}");
            assert_eq!(col_to_letters(col), *name);
        }
        // "AA" is the 27th entry in the enumeration.
        assert_eq!(letters[26], "AA");
        assert_eq!(
            CellAddress::parse_a1("AA10").unwrap(),
            CellAddress::new(10, 27)
        );
    }

    #[test]
    fn parse_a1_rejects_malformed() {
        for bad in ["1A", "A0", "", "A", "12", "A1B", "ABCD1", "A1048577"] {
            assert!(CellAddress::parse_a1(bad).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn a1_round_trip() {
        for (row, col) in [(1, 1), (10, 27), (1_048_576, 16_384), (99, 702), (100, 703)] {
            let addr = CellAddress::new(row, col);
            assert_eq!(CellAddress::parse_a1(&addr.render_a1()).unwrap(), addr);
        }
    }

    #[test]
    fn r1c1_rendering() {
        assert_eq!(CellAddress::new(1, 3).render_r1c1(), "R1C3");
        assert_eq!(CellAddress::new(12, 3).render_r1c1(), "R12C3");
        assert_eq!(CellAddress::new(1, 1).render_r1c1(), "R1C1");
    }

    #[test]
    fn range_parse_and_normalize() {
        let r = CellRange::parse("A2:A10").unwrap();
        assert_eq!(r.start, CellAddress::new(2, 1));
        assert_eq!(r.end, CellAddress::new(10, 1));

        let single = CellRange::parse("B3").unwrap();
        assert_eq!(single.start, CellAddress::new(3, 2));
        assert_eq!(single.start, single.end);

        // Corner normalization: all four corner orderings of a 2x2 block
        // produce the same range.
        let (a, b) = (CellAddress::new(2, 1), CellAddress::new(10, 1));
        assert_eq!(CellRange::new(b, a), CellRange::new(a, b));
        assert_eq!(CellRange::parse("A10:A2").unwrap(), r);
        let corners = [
            ("B2:C3", "B2:C3"),
            ("C3:B2", "B2:C3"),
            ("B3:C2", "B2:C3"),
            ("C2:B3", "B2:C3"),
        ];
        for (input, want) in corners {
            assert_eq!(CellRange::parse(input).unwrap().render(), want);
        }
        assert!(CellRange::parse("A2:").is_err());
        assert!(CellRange::parse("x").is_err());
    }

    #[test]
    fn range_iteration_covers_each_member_once() {
        let r = CellRange::parse("A2:A10").unwrap();
        let members: Vec<_> = r.iter().collect();
        assert_eq!(members.len(), 9);
        assert_eq!(members[0], CellAddress::new(2, 1));
        assert_eq!(members[8], CellAddress::new(10, 1));
        assert!(r.contains(CellAddress::new(5, 1)));
        assert!(!r.contains(CellAddress::new(12, 1)));
    }

    #[test]
    fn sheet_drops_blank_cells_and_deduplicates() {
        let mut sheet = Sheet::new("S");
        let addr = CellAddress::new(1, 1);
        assert!(sheet.insert(Cell::new(addr, CellContent::Empty)).is_none());
        assert_eq!(sheet.cell_count(), 0);

        sheet.insert(Cell::new(addr, CellContent::Number(1.0)));
        let prev = sheet.insert(Cell::new(addr, CellContent::Number(2.0)));
        assert!(prev.is_some());
        assert_eq!(sheet.cell_count(), 1);
    }

    #[test]
    fn content_partition_is_exhaustive() {
        let cells = [
            CellContent::Empty,
            CellContent::Text("x".into()),
            CellContent::Number(1.0),
            CellContent::Date(chrono::NaiveDate::from_ymd_opt(2006, 2, 20).unwrap().into()),
            CellContent::Formula("=1".into()),
        ];
        let kinds: BTreeSet<_> = cells.iter().map(|c| c.kind_name()).collect();
        assert_eq!(kinds.len(), 5);
    }

    #[test]
    fn error_codes_round_trip() {
        for code in [
            ErrorCode::Div0,
            ErrorCode::NA,
            ErrorCode::Name,
            ErrorCode::Null,
            ErrorCode::Num,
            ErrorCode::Ref,
            ErrorCode::Value,
        ] {
            assert_eq!(ErrorCode::parse(code.as_str()), Some(code));
        }
        assert_eq!(ErrorCode::parse("#BOGUS!"), None);
    }
}
