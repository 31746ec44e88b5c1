//! Cell type taxonomy, precedent graph, and documentation coverage.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::doc_comment::{DocOrigin, DocRecord};
use crate::formula::parse_formula;
use crate::model::{Cell, CellAddress, CellContent, CellRange, DefinedNameTarget, Workbook};

/// The four cell types: Titles, Data, Formulas and Links. A Link is a
/// formula that depends on another workbook; same-workbook cross-sheet
/// references stay Formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum CellType {
    Title,
    Data,
    Formula,
    Link,
}

impl CellType {
    pub fn display_name(&self) -> &'static str {
        match self {
            CellType::Title => "Title",
            CellType::Data => "Data",
            CellType::Formula => "Formula",
            CellType::Link => "Link",
        }
    }

    pub fn code(&self) -> char {
        match self {
            CellType::Title => 'T',
            CellType::Data => 'D',
            CellType::Formula => 'F',
            CellType::Link => 'L',
        }
    }
}

/// Classify one cell; `None` for empty cells. Total and single-valued
/// over non-empty cells.
pub fn classify_cell(cell: &Cell) -> Option<CellType> {
    match &cell.content {
        CellContent::Empty => None,
        CellContent::Text(_) => Some(CellType::Title),
        CellContent::Number(_) | CellContent::Date(_) => Some(CellType::Data),
        CellContent::Formula(text) => match parse_formula(text) {
            Ok(ast) if ast.has_external_reference() => Some(CellType::Link),
            _ => Some(CellType::Formula),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct CellLocation {
    pub sheet: String,
    pub address: CellAddress,
}

impl std::fmt::Display for CellLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}!{}", self.sheet, self.address.render_a1())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PrecedentEdge {
    pub dependent: CellLocation,
    pub precedent_sheet: String,
    pub precedent: CellRange,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ExternalEdge {
    pub dependent: CellLocation,
    pub workbook: String,
    pub sheet: String,
    pub range_text: String,
}

/// The dependency graph over cells: one edge per reference a formula
/// reads from, with defined names expanded one level.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrecedentGraph {
    pub edges: BTreeSet<PrecedentEdge>,
    pub external_edges: BTreeSet<ExternalEdge>,
    pub observations: Vec<String>,
}

impl PrecedentGraph {
    /// All precedent ranges of one cell.
    pub fn precedents_of(&self, location: &CellLocation) -> Vec<&PrecedentEdge> {
        self.edges
            .iter()
            .filter(|e| e.dependent == *location)
            .collect()
    }

    /// Transitive closure of precedents, expanded to individual cells.
    pub fn transitive_precedents(&self, start: &CellLocation) -> BTreeSet<CellLocation> {
        let mut seen: BTreeSet<CellLocation> = BTreeSet::new();
        let mut queue: VecDeque<CellLocation> = VecDeque::new();
        queue.push_back(start.clone());
        let mut visited: BTreeSet<CellLocation> = BTreeSet::new();
        while let Some(current) = queue.pop_front() {
            if !visited.insert(current.clone()) {
                continue;
            }
            for edge in self.precedents_of(&current) {
                for address in edge.precedent.iter() {
                    let loc = CellLocation {
                        sheet: edge.precedent_sheet.clone(),
                        address,
                    };
                    if seen.insert(loc.clone()) {
                        queue.push_back(loc);
                    }
                }
            }
        }
        seen
    }
}

/// Build the precedent graph for a workbook. Formulas that fail to parse
/// are skipped with an observation.
pub fn build_precedent_graph(wb: &Workbook) -> PrecedentGraph {
    let mut graph = PrecedentGraph::default();
    for sheet in &wb.sheets {
        for cell in sheet.cells() {
            let Some(text) = cell.formula_text() else {
                continue;
            };
            let ast = match parse_formula(text) {
                Ok(ast) => ast,
                Err(e) => {
                    graph.observations.push(format!(
                        "{}!{}: {e}",
                        sheet.name,
                        cell.address.render_a1()
                    ));
                    continue;
                }
            };
            let refs = match ast.extract_references(cell.address) {
                Ok(refs) => refs,
                Err(e) => {
                    graph.observations.push(format!(
                        "{}!{}: {e}",
                        sheet.name,
                        cell.address.render_a1()
                    ));
                    continue;
                }
            };
            let dependent = CellLocation {
                sheet: sheet.name.clone(),
                address: cell.address,
            };
            for (ref_sheet, range) in refs.internal {
                graph.edges.insert(PrecedentEdge {
                    dependent: dependent.clone(),
                    precedent_sheet: ref_sheet.unwrap_or_else(|| sheet.name.clone()),
                    precedent: range,
                });
            }
            for (workbook, ext_sheet, range_text) in refs.external {
                graph.external_edges.insert(ExternalEdge {
                    dependent: dependent.clone(),
                    workbook,
                    sheet: ext_sheet,
                    range_text,
                });
            }
            for name in refs.names {
                // One level of name expansion; deeper indirection stays symbolic.
                match wb.defined_name(&name) {
                    Some(DefinedNameTarget::Range {
                        sheet: name_sheet,
                        range,
                    }) => {
                        graph.edges.insert(PrecedentEdge {
                            dependent: dependent.clone(),
                            precedent_sheet: name_sheet.clone(),
                            precedent: *range,
                        });
                    }
                    Some(DefinedNameTarget::Formula(body)) => {
                        if let Ok(name_ast) = parse_formula(body) {
                            if let Ok(name_refs) = name_ast.extract_references(cell.address) {
                                if !name_refs.names.is_empty() {
                                    graph.observations.push(format!(
                                        "name {name:?} expands to further names {:?}; only one level is followed",
                                        name_refs.names
                                    ));
                                }
                                for (ref_sheet, range) in name_refs.internal {
                                    graph.edges.insert(PrecedentEdge {
                                        dependent: dependent.clone(),
                                        precedent_sheet: ref_sheet
                                            .unwrap_or_else(|| sheet.name.clone()),
                                        precedent: range,
                                    });
                                }
                            }
                        }
                    }
                    None => {
                        graph.observations.push(format!(
                            "{}!{}: reference to undefined name {name:?}",
                            sheet.name,
                            cell.address.render_a1()
                        ));
                    }
                }
            }
        }
    }
    graph
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CoverageStatus {
    Documented,
    Undocumented,
    NotApplicableEmpty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageCell {
    pub status: CoverageStatus,
    /// Index into the record slice handed to [`compute_coverage`].
    pub covering: Option<usize>,
}

/// Per-cell documentation status. Non-empty cells are documented or
/// undocumented; empty cells inside some record's cover set appear as
/// not-applicable.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CoverageMap {
    pub sheets: BTreeMap<String, BTreeMap<CellAddress, CoverageCell>>,
}

impl CoverageMap {
    pub fn status(&self, sheet: &str, addr: CellAddress) -> Option<&CoverageCell> {
        self.sheets.get(sheet).and_then(|cells| cells.get(&addr))
    }

    pub fn documented_cells(&self) -> usize {
        self.count(CoverageStatus::Documented)
    }

    pub fn undocumented_cells(&self) -> usize {
        self.count(CoverageStatus::Undocumented)
    }

    fn count(&self, status: CoverageStatus) -> usize {
        self.sheets
            .values()
            .flat_map(|cells| cells.values())
            .filter(|c| c.status == status)
            .count()
    }
}

/// A record covers its declared range plus its own commented cell; a
/// record whose range is NA covers exactly the commented cell. When
/// several records cover one cell the smallest cover set wins, ties
/// broken by the latest record date, then record order.
pub fn compute_coverage(wb: &Workbook, records: &[DocRecord]) -> CoverageMap {
    let mut map = CoverageMap::default();
    for sheet in &wb.sheets {
        let mut cells: BTreeMap<CellAddress, CoverageCell> = BTreeMap::new();

        let mut covered: BTreeMap<CellAddress, usize> = BTreeMap::new();
        for (idx, rec) in records.iter().enumerate() {
            let Some(DocOrigin::Cell {
                sheet: rec_sheet, ..
            }) = &rec.origin
            else {
                continue;
            };
            if *rec_sheet != sheet.name {
                continue;
            }
            for addr in rec.covered_cells() {
                match covered.get(&addr) {
                    Some(&existing) if !beats(records, idx, existing) => {}
                    _ => {
                        covered.insert(addr, idx);
                    }
                }
            }
        }

        for cell in sheet.cells() {
            if cell.content.is_empty() {
                continue;
            }
            let entry = match covered.get(&cell.address) {
                Some(&idx) => CoverageCell {
                    status: CoverageStatus::Documented,
                    covering: Some(idx),
                },
                None => CoverageCell {
                    status: CoverageStatus::Undocumented,
                    covering: None,
                },
            };
            cells.insert(cell.address, entry);
        }
        for (addr, &idx) in &covered {
            if sheet.is_empty_at(*addr) {
                cells.insert(
                    *addr,
                    CoverageCell {
                        status: CoverageStatus::NotApplicableEmpty,
                        covering: Some(idx),
                    },
                );
            }
        }

        map.sheets.insert(sheet.name.clone(), cells);
    }
    map
}

fn cover_size(rec: &DocRecord) -> u64 {
    match &rec.range {
        Some(range) => {
            let mut size = range.area();
            if let Some(DocOrigin::Cell { address, .. }) = &rec.origin {
                if !range.contains(*address) {
                    size += 1;
                }
            }
            size
        }
        None => 1,
    }
}

fn beats(records: &[DocRecord], challenger: usize, incumbent: usize) -> bool {
    let (c, i) = (&records[challenger], &records[incumbent]);
    let c_key = (cover_size(c), std::cmp::Reverse(c.date));
    let i_key = (cover_size(i), std::cmp::Reverse(i.date));
    c_key < i_key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc_comment::parse_doc_comment;
    use crate::model::Sheet;

    fn cell(addr: &str, content: CellContent) -> Cell {
        Cell::new(CellAddress::parse_a1(addr).unwrap(), content)
    }

    fn loc(sheet: &str, addr: &str) -> CellLocation {
        CellLocation {
            sheet: sheet.to_string(),
            address: CellAddress::parse_a1(addr).unwrap(),
        }
    }

    #[test]
    fn four_types() {
        assert_eq!(
            classify_cell(&cell("A1", CellContent::Text("Items".into()))),
            Some(CellType::Title)
        );
        assert_eq!(
            classify_cell(&cell("A2", CellContent::Number(1385.45))),
            Some(CellType::Data)
        );
        assert_eq!(
            classify_cell(&cell("A12", CellContent::Formula("=SUM(A2:A10)".into()))),
            Some(CellType::Formula)
        );
        assert_eq!(
            classify_cell(&cell(
                "B1",
                CellContent::Formula("=[Other.xlsx]Sheet1!A1".into())
            )),
            Some(CellType::Link)
        );
        // Cross-sheet within the workbook stays Formula.
        assert_eq!(
            classify_cell(&cell("B2", CellContent::Formula("=Sheet2!A1".into()))),
            Some(CellType::Formula)
        );
        assert_eq!(classify_cell(&cell("C1", CellContent::Empty)), None);
        let date = CellContent::Date(chrono::NaiveDate::from_ymd_opt(2006, 2, 20).unwrap().into());
        assert_eq!(classify_cell(&cell("C2", date)), Some(CellType::Data));
    }

    fn workbook_with(cells: Vec<Cell>) -> Workbook {
        let mut sheet = Sheet::new("Sheet1");
        for c in cells {
            sheet.insert(c);
        }
        let mut wb = Workbook::new("test");
        wb.sheets.push(sheet);
        wb
    }

    #[test]
    fn sum_edge() {
        let wb = workbook_with(vec![cell(
            "A12",
            CellContent::Formula("=SUM(A2:A10)".into()),
        )]);
        let graph = build_precedent_graph(&wb);
        assert_eq!(graph.edges.len(), 1);
        let edge = graph.edges.iter().next().unwrap();
        assert_eq!(edge.dependent, loc("Sheet1", "A12"));
        assert_eq!(edge.precedent, CellRange::parse("A2:A10").unwrap());
    }

    #[test]
    fn no_formulas_empty_graph() {
        let wb = workbook_with(vec![cell("A1", CellContent::Number(1.0))]);
        let graph = build_precedent_graph(&wb);
        assert!(graph.edges.is_empty());
        assert!(graph.external_edges.is_empty());
    }

    #[test]
    fn chain_closure_matches_brute_force_reachability() {
        let wb = workbook_with(vec![
            cell("A1", CellContent::Number(1.0)),
            cell("A2", CellContent::Formula("=A1".into())),
            cell("A3", CellContent::Formula("=A2".into())),
        ]);
        let graph = build_precedent_graph(&wb);
        assert_eq!(graph.edges.len(), 2);

        // Brute-force oracle on the 3-cell instance: follow single edges.
        let mut oracle: BTreeSet<CellLocation> = BTreeSet::new();
        oracle.insert(loc("Sheet1", "A2"));
        oracle.insert(loc("Sheet1", "A1"));
        assert_eq!(graph.transitive_precedents(&loc("Sheet1", "A3")), oracle);
    }

    #[test]
    fn defined_names_expand_one_level() {
        let mut wb = workbook_with(vec![cell(
            "B1",
            CellContent::Formula("=SUM(Inputs)".into()),
        )]);
        wb.defined_names.insert(
            "Inputs".to_string(),
            DefinedNameTarget::Range {
                sheet: "Sheet1".to_string(),
                range: CellRange::parse("A1:A3").unwrap(),
            },
        );
        let graph = build_precedent_graph(&wb);
        assert_eq!(graph.edges.len(), 1);
        let edge = graph.edges.iter().next().unwrap();
        assert_eq!(edge.precedent, CellRange::parse("A1:A3").unwrap());
    }

    #[test]
    fn nested_name_expansion_stops_after_one_level() {
        let mut wb = workbook_with(vec![cell("B1", CellContent::Formula("=Outer".into()))]);
        wb.defined_names.insert(
            "Outer".to_string(),
            DefinedNameTarget::Formula("Inner+A1".to_string()),
        );
        wb.defined_names.insert(
            "Inner".to_string(),
            DefinedNameTarget::Range {
                sheet: "Sheet1".to_string(),
                range: CellRange::parse("A2").unwrap(),
            },
        );
        let graph = build_precedent_graph(&wb);
        // One level: A1 from Outer's body, Inner left symbolic.
        assert_eq!(graph.edges.len(), 1);
        assert!(graph
            .observations
            .iter()
            .any(|o| o.contains("further names")));
    }

    #[test]
    fn graph_soundness_on_named_corpus() {
        // Every edge's range is reachable from the dependent's formula
        // text after one level of name expansion.
        let mut wb = workbook_with(vec![
            cell("A1", CellContent::Number(1.0)),
            cell("B1", CellContent::Formula("=A1*2".into())),
            cell("B2", CellContent::Formula("=SUM(Inputs)+Sheet1!A1".into())),
        ]);
        wb.defined_names.insert(
            "Inputs".to_string(),
            DefinedNameTarget::Range {
                sheet: "Sheet1".to_string(),
                range: CellRange::parse("A1:A2").unwrap(),
            },
        );
        let graph = build_precedent_graph(&wb);
        for edge in &graph.edges {
            let sheet = wb.sheet(&edge.dependent.sheet).unwrap();
            let formula = sheet
                .cell(edge.dependent.address)
                .and_then(|c| c.formula_text())
                .unwrap()
                .to_string();
            let direct = formula.contains(&edge.precedent.render())
                || formula.contains(&edge.precedent.start.render_a1());
            let via_name =
                formula.contains("Inputs") && edge.precedent == CellRange::parse("A1:A2").unwrap();
            assert!(direct || via_name, "unsound edge {edge:?} for {formula}");
        }
    }

    fn record(body: &str, origin_addr: &str) -> DocRecord {
        parse_doc_comment(body)
            .unwrap()
            .with_origin(DocOrigin::Cell {
                sheet: "Sheet1".to_string(),
                address: CellAddress::parse_a1(origin_addr).unwrap(),
            })
    }

    #[test]
    fn zero_records_all_undocumented() {
        let wb = workbook_with(vec![cell("A1", CellContent::Number(1.0))]);
        let coverage = compute_coverage(&wb, &[]);
        assert_eq!(coverage.undocumented_cells(), 1);
        assert_eq!(coverage.documented_cells(), 0);
    }

    #[test]
    fn record_range_over_hole_marks_not_applicable() {
        // A2:A10 declared, A5 left empty: the 9-cell range enumerates to
        // 8 documented cells and one not-applicable hole.
        let mut cells = Vec::new();
        for row in 2..=10 {
            if row == 5 {
                continue;
            }
            cells.push(cell(&format!("A{row}"), CellContent::Number(row as f64)));
        }
        let wb = workbook_with(cells);
        let rec = record(
            "Author: A\nDate: 2/20/2006\nPurpose: p\nType: Data\nSource: S\nRange: A2:A10",
            "A2",
        );
        let coverage = compute_coverage(&wb, &[rec]);

        let range = CellRange::parse("A2:A10").unwrap();
        let mut documented = 0;
        for addr in range.iter() {
            let status = coverage.status("Sheet1", addr).unwrap();
            if addr == CellAddress::parse_a1("A5").unwrap() {
                assert_eq!(status.status, CoverageStatus::NotApplicableEmpty);
            } else {
                assert_eq!(status.status, CoverageStatus::Documented);
                documented += 1;
            }
        }
        assert_eq!(documented, 8);
    }

    #[test]
    fn coverage_monotonic_under_record_addition() {
        let wb = workbook_with(vec![
            cell("A1", CellContent::Number(1.0)),
            cell("B1", CellContent::Number(2.0)),
        ]);
        let rec_a = record(
            "Author: A\nDate: 1/1/2006\nPurpose: p\nType: Data\nSource: S\nRange: A1",
            "A1",
        );
        let rec_b = record(
            "Author: A\nDate: 1/1/2006\nPurpose: p\nType: Data\nSource: S\nRange: B1",
            "B1",
        );
        let before = compute_coverage(&wb, std::slice::from_ref(&rec_a));
        let after = compute_coverage(&wb, &[rec_a, rec_b]);
        for (sheet, cells) in &before.sheets {
            for (addr, cov) in cells {
                if cov.status == CoverageStatus::Documented {
                    assert_eq!(
                        after.status(sheet, *addr).unwrap().status,
                        CoverageStatus::Documented
                    );
                }
            }
        }
        assert!(after.documented_cells() >= before.documented_cells());
    }

    #[test]
    fn smallest_cover_wins() {
        let wb = workbook_with(vec![
            cell("A2", CellContent::Number(1.0)),
            cell("A12", CellContent::Formula("=SUM(A2:A10)".into())),
        ]);
        let wide = record(
            "Author: A\nDate: 2/20/2006\nPurpose: wide\nType: Formula\nSource: NA\nRange: A2:A10",
            "A12",
        );
        let narrow = record(
            "Author: A\nDate: 2/20/2006\nPurpose: narrow\nType: Data\nSource: S\nRange: A2:A10",
            "A2",
        );
        let records = vec![wide, narrow];
        let coverage = compute_coverage(&wb, &records);
        // A2 is covered by both; the narrow record covers 9 cells, the
        // wide one 10 (range plus its out-of-range origin).
        let a2 = coverage
            .status("Sheet1", CellAddress::parse_a1("A2").unwrap())
            .unwrap();
        assert_eq!(a2.covering, Some(1));
        let a12 = coverage
            .status("Sheet1", CellAddress::parse_a1("A12").unwrap())
            .unwrap();
        assert_eq!(a12.covering, Some(0));
    }
}
