//! Formula parsing, reference extraction, and the relative normal form.
//!
//! The parser accepts both A1 and R1C1 reference styles, sheet-qualified
//! references (`Sheet1!A1`), external references (`[Book.xlsx]Sheet1!A1`),
//! the arithmetic/concat/comparison operators, postfix `%`, and range
//! (`:`) plus union (`,`) inside argument lists. Function names are kept
//! as written and matched case-insensitively; no function catalog is
//! consulted — the analyses need structure, not semantics.
//!
//! The *relative normal form* re-renders a formula in R1C1 style with
//! every relative reference expressed as an offset from the formula's
//! own cell. Two formulas that are translations of each other have the
//! same normal form, which is what the region-consistency metric keys on.

mod lexer;
mod parser;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{col_to_letters, CellAddress, CellRange, ErrorCode, MAX_COL, MAX_ROW};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulaError {
    #[error("formula syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("reference {reference} resolves outside the sheet from {anchor}")]
    OutOfBoundsReference { reference: String, anchor: String },
}

impl FormulaError {
    fn syntax(offset: usize, message: impl Into<String>) -> Self {
        FormulaError::Syntax {
            offset,
            message: message.into(),
        }
    }

    fn shift(self, by: usize) -> Self {
        match self {
            FormulaError::Syntax { offset, message } => FormulaError::Syntax {
                offset: offset + by,
                message,
            },
            other => other,
        }
    }
}

/// One axis (row or column) of a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    /// Absolute coordinate (`$A`, `R3`).
    Abs(u32),
    /// A1-style relative: written as a position, meaning an offset from
    /// wherever the formula lives.
    At(u32),
    /// R1C1-style relative offset (`R[-10]`).
    Offset(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefStyle {
    A1,
    R1C1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefCorner {
    pub row: Coord,
    pub col: Coord,
    pub style: RefStyle,
}

/// Optional workbook/sheet prefix on a reference or name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefQualifier {
    pub workbook: Option<String>,
    pub sheet: Option<String>,
    pub quoted: bool,
}

impl RefQualifier {
    pub fn none() -> Self {
        RefQualifier {
            workbook: None,
            sheet: None,
            quoted: false,
        }
    }

    pub fn is_external(&self) -> bool {
        self.workbook.is_some()
    }

    fn is_empty(&self) -> bool {
        self.workbook.is_none() && self.sheet.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Concat,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinaryOp {
    fn symbol(&self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Concat => "&",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Text(String),
    Bool(bool),
    ErrorLit(ErrorCode),
    Cell {
        qualifier: RefQualifier,
        corner: RefCorner,
    },
    Range {
        qualifier: RefQualifier,
        start: RefCorner,
        end: RefCorner,
    },
    Name {
        qualifier: Option<RefQualifier>,
        name: String,
    },
    Call {
        name: String,
        args: Vec<Expr>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Percent(Box<Expr>),
    Paren(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaAst {
    pub root: Expr,
}

/// Parse formula text; a leading `=` is accepted and implied.
pub fn parse_formula(text: &str) -> Result<FormulaAst, FormulaError> {
    parser::parse(text)
}

impl FormulaAst {
    /// Render back to text (leading `=` included), preserving each
    /// reference's original style. `parse(render(ast)) == ast`.
    pub fn render(&self) -> String {
        format!("={}", render_expr(&self.root, &RenderMode::Verbatim))
    }

    /// Deterministic R1C1-offset rendering relative to `anchor`.
    /// Function and defined names are uppercased.
    pub fn relative_normal_form(&self, anchor: CellAddress) -> String {
        format!(
            "={}",
            render_expr(&self.root, &RenderMode::Normalized { anchor })
        )
    }

    /// Resolve every reference against `anchor` and collect them.
    pub fn extract_references(&self, anchor: CellAddress) -> Result<ReferenceSet, FormulaError> {
        let mut set = ReferenceSet::default();
        collect_refs(&self.root, anchor, &mut set)?;
        Ok(set)
    }

    /// Only the explicit `start:end` range nodes, resolved against
    /// `anchor`, in syntactic order. Single-cell references are excluded;
    /// ranges that fail to resolve are skipped.
    pub fn range_references(&self, anchor: CellAddress) -> Vec<(RefQualifier, CellRange)> {
        fn walk(e: &Expr, anchor: CellAddress, out: &mut Vec<(RefQualifier, CellRange)>) {
            match e {
                Expr::Range {
                    qualifier,
                    start,
                    end,
                } => {
                    if let (Ok(a), Ok(b)) =
                        (resolve_corner(start, anchor), resolve_corner(end, anchor))
                    {
                        out.push((qualifier.clone(), CellRange::new(a, b)));
                    }
                }
                Expr::Call { args, .. } => args.iter().for_each(|a| walk(a, anchor, out)),
                Expr::Unary { operand, .. } | Expr::Percent(operand) | Expr::Paren(operand) => {
                    walk(operand, anchor, out)
                }
                Expr::Binary { lhs, rhs, .. } => {
                    walk(lhs, anchor, out);
                    walk(rhs, anchor, out);
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        walk(&self.root, anchor, &mut out);
        out
    }

    /// Shift A1-style relative references by the delta between two
    /// anchors. Used to materialize shared-formula followers from their
    /// master cell; absolute and R1C1-offset references are unchanged.
    pub fn rebase(&self, from: CellAddress, to: CellAddress) -> Result<FormulaAst, FormulaError> {
        let delta_row = to.row as i64 - from.row as i64;
        let delta_col = to.col as i64 - from.col as i64;
        let mut root = self.root.clone();
        rebase_expr(&mut root, delta_row, delta_col)?;
        Ok(FormulaAst { root })
    }

    /// True when any reference carries an external workbook qualifier.
    pub fn has_external_reference(&self) -> bool {
        fn walk(e: &Expr) -> bool {
            match e {
                Expr::Cell { qualifier, .. } | Expr::Range { qualifier, .. } => {
                    qualifier.is_external()
                }
                Expr::Name { qualifier, .. } => {
                    qualifier.as_ref().is_some_and(RefQualifier::is_external)
                }
                Expr::Call { args, .. } => args.iter().any(walk),
                Expr::Unary { operand, .. } | Expr::Percent(operand) | Expr::Paren(operand) => {
                    walk(operand)
                }
                Expr::Binary { lhs, rhs, .. } => walk(lhs) || walk(rhs),
                _ => false,
            }
        }
        walk(&self.root)
    }
}

/// All references reachable from a formula, resolved against its anchor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceSet {
    /// Same-workbook ranges; the sheet is `None` for same-sheet references.
    pub internal: BTreeSet<(Option<String>, CellRange)>,
    /// `(workbook, sheet, range text)` for cross-workbook references.
    pub external: BTreeSet<(String, String, String)>,
    /// Defined names, kept symbolic.
    pub names: BTreeSet<String>,
}

impl ReferenceSet {
    pub fn is_empty(&self) -> bool {
        self.internal.is_empty() && self.external.is_empty() && self.names.is_empty()
    }
}

fn collect_refs(
    expr: &Expr,
    anchor: CellAddress,
    out: &mut ReferenceSet,
) -> Result<(), FormulaError> {
    match expr {
        Expr::Cell { qualifier, corner } => {
            let addr = resolve_corner(corner, anchor)?;
            store_ref(qualifier, CellRange::single(addr), out);
        }
        Expr::Range {
            qualifier,
            start,
            end,
        } => {
            let a = resolve_corner(start, anchor)?;
            let b = resolve_corner(end, anchor)?;
            store_ref(qualifier, CellRange::new(a, b), out);
        }
        Expr::Name { qualifier, name } => {
            let rendered = match qualifier {
                Some(q) if !q.is_empty() => format!("{}{}", render_qualifier(q), name),
                _ => name.clone(),
            };
            out.names.insert(rendered);
        }
        Expr::Call { args, .. } => {
            for arg in args {
                collect_refs(arg, anchor, out)?;
            }
        }
        Expr::Unary { operand, .. } | Expr::Percent(operand) | Expr::Paren(operand) => {
            collect_refs(operand, anchor, out)?;
        }
        Expr::Binary { lhs, rhs, .. } => {
            collect_refs(lhs, anchor, out)?;
            collect_refs(rhs, anchor, out)?;
        }
        Expr::Number(_) | Expr::Text(_) | Expr::Bool(_) | Expr::ErrorLit(_) => {}
    }
    Ok(())
}

fn store_ref(qualifier: &RefQualifier, range: CellRange, out: &mut ReferenceSet) {
    if let Some(workbook) = &qualifier.workbook {
        out.external.insert((
            workbook.clone(),
            qualifier.sheet.clone().unwrap_or_default(),
            range.render(),
        ));
    } else {
        out.internal.insert((qualifier.sheet.clone(), range));
    }
}

fn resolve_axis(coord: Coord, anchor: u32, max: u32) -> Option<u32> {
    let v = match coord {
        Coord::Abs(n) | Coord::At(n) => n as i64,
        Coord::Offset(o) => anchor as i64 + o,
    };
    if v >= 1 && v <= max as i64 {
        Some(v as u32)
    } else {
        None
    }
}

fn resolve_corner(corner: &RefCorner, anchor: CellAddress) -> Result<CellAddress, FormulaError> {
    let row = resolve_axis(corner.row, anchor.row, MAX_ROW);
    let col = resolve_axis(corner.col, anchor.col, MAX_COL);
    match (row, col) {
        (Some(row), Some(col)) => Ok(CellAddress::new(row, col)),
        _ => Err(FormulaError::OutOfBoundsReference {
            reference: render_corner(corner, &RenderMode::Verbatim),
            anchor: anchor.render_a1(),
        }),
    }
}

fn rebase_expr(expr: &mut Expr, delta_row: i64, delta_col: i64) -> Result<(), FormulaError> {
    let shift = |corner: &mut RefCorner| -> Result<(), FormulaError> {
        let original = *corner;
        corner.row = rebase_axis(corner.row, delta_row, MAX_ROW, &original)?;
        corner.col = rebase_axis(corner.col, delta_col, MAX_COL, &original)?;
        Ok(())
    };
    match expr {
        Expr::Cell { corner, .. } => shift(corner)?,
        Expr::Range { start, end, .. } => {
            shift(start)?;
            shift(end)?;
        }
        Expr::Call { args, .. } => {
            for arg in args {
                rebase_expr(arg, delta_row, delta_col)?;
            }
        }
        Expr::Unary { operand, .. } | Expr::Percent(operand) | Expr::Paren(operand) => {
            rebase_expr(operand, delta_row, delta_col)?;
        }
        Expr::Binary { lhs, rhs, .. } => {
            rebase_expr(lhs, delta_row, delta_col)?;
            rebase_expr(rhs, delta_row, delta_col)?;
        }
        Expr::Number(_) | Expr::Text(_) | Expr::Bool(_) | Expr::ErrorLit(_) | Expr::Name { .. } => {
        }
    }
    Ok(())
}

fn rebase_axis(
    coord: Coord,
    delta: i64,
    max: u32,
    original: &RefCorner,
) -> Result<Coord, FormulaError> {
    match coord {
        Coord::At(n) => {
            let v = n as i64 + delta;
            if v >= 1 && v <= max as i64 {
                Ok(Coord::At(v as u32))
            } else {
                Err(FormulaError::OutOfBoundsReference {
                    reference: render_corner(original, &RenderMode::Verbatim),
                    anchor: "rebase".to_string(),
                })
            }
        }
        other => Ok(other),
    }
}

enum RenderMode {
    Verbatim,
    Normalized { anchor: CellAddress },
}

fn render_expr(expr: &Expr, mode: &RenderMode) -> String {
    match expr {
        Expr::Number(n) => crate::model::render_number(*n),
        Expr::Text(t) => format!("\"{}\"", t.replace('"', "\"\"")),
        Expr::Bool(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
        Expr::ErrorLit(e) => e.as_str().to_string(),
        Expr::Cell { qualifier, corner } => {
            format!(
                "{}{}",
                render_qualifier(qualifier),
                render_corner(corner, mode)
            )
        }
        Expr::Range {
            qualifier,
            start,
            end,
        } => format!(
            "{}{}:{}",
            render_qualifier(qualifier),
            render_corner(start, mode),
            render_corner(end, mode)
        ),
        Expr::Name { qualifier, name } => {
            let name = match mode {
                RenderMode::Verbatim => name.clone(),
                RenderMode::Normalized { .. } => name.to_ascii_uppercase(),
            };
            match qualifier {
                Some(q) => format!("{}{}", render_qualifier(q), name),
                None => name,
            }
        }
        Expr::Call { name, args } => {
            let name = match mode {
                RenderMode::Verbatim => name.clone(),
                RenderMode::Normalized { .. } => name.to_ascii_uppercase(),
            };
            let args: Vec<String> = args.iter().map(|a| render_expr(a, mode)).collect();
            format!("{}({})", name, args.join(","))
        }
        Expr::Unary { op, operand } => {
            let symbol = match op {
                UnaryOp::Neg => "-",
                UnaryOp::Plus => "+",
            };
            format!("{}{}", symbol, render_expr(operand, mode))
        }
        Expr::Binary { op, lhs, rhs } => {
            format!(
                "{}{}{}",
                render_expr(lhs, mode),
                op.symbol(),
                render_expr(rhs, mode)
            )
        }
        Expr::Percent(operand) => format!("{}%", render_expr(operand, mode)),
        Expr::Paren(inner) => format!("({})", render_expr(inner, mode)),
    }
}

fn render_qualifier(q: &RefQualifier) -> String {
    if q.is_empty() {
        return String::new();
    }
    let mut inner = String::new();
    if let Some(book) = &q.workbook {
        inner.push('[');
        inner.push_str(book);
        inner.push(']');
    }
    if let Some(sheet) = &q.sheet {
        inner.push_str(sheet);
    }
    if q.quoted {
        format!("'{}'!", inner.replace('\'', "''"))
    } else {
        format!("{inner}!")
    }
}

fn render_corner(corner: &RefCorner, mode: &RenderMode) -> String {
    match mode {
        RenderMode::Verbatim => match corner.style {
            RefStyle::A1 => {
                let col = match corner.col {
                    Coord::Abs(c) => format!("${}", col_to_letters(c)),
                    Coord::At(c) => col_to_letters(c),
                    Coord::Offset(_) => unreachable!("A1 corner with offset axis"),
                };
                let row = match corner.row {
                    Coord::Abs(r) => format!("${r}"),
                    Coord::At(r) => r.to_string(),
                    Coord::Offset(_) => unreachable!("A1 corner with offset axis"),
                };
                format!("{col}{row}")
            }
            RefStyle::R1C1 => {
                format!(
                    "{}{}",
                    render_r1c1_axis('R', corner.row),
                    render_r1c1_axis('C', corner.col)
                )
            }
        },
        RenderMode::Normalized { anchor } => {
            let row = normalize_axis(corner.row, anchor.row);
            let col = normalize_axis(corner.col, anchor.col);
            format!(
                "{}{}",
                render_r1c1_axis('R', row),
                render_r1c1_axis('C', col)
            )
        }
    }
}

fn normalize_axis(coord: Coord, anchor: u32) -> Coord {
    match coord {
        Coord::Abs(n) => Coord::Abs(n),
        Coord::At(n) => Coord::Offset(n as i64 - anchor as i64),
        Coord::Offset(o) => Coord::Offset(o),
    }
}

fn render_r1c1_axis(letter: char, coord: Coord) -> String {
    match coord {
        Coord::Abs(n) => format!("{letter}{n}"),
        Coord::Offset(0) => letter.to_string(),
        Coord::Offset(o) => format!("{letter}[{o}]"),
        Coord::At(n) => format!("{letter}{n}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(text: &str) -> CellAddress {
        CellAddress::parse_a1(text).unwrap()
    }

    #[test]
    fn parses_the_sum_over_a_range() {
        let ast = parse_formula("=SUM(A2:A10)").unwrap();
        match &ast.root {
            Expr::Call { name, args } => {
                assert_eq!(name, "SUM");
                assert_eq!(args.len(), 1);
                assert!(matches!(args[0], Expr::Range { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_relative_r1c1_sum() {
        let ast = parse_formula("=SUM(R[-10]C:R[-1]C)").unwrap();
        let refs = ast.extract_references(addr("C12")).unwrap();
        // Ten relative rows above R12C3, enumerated: rows 2..=11, col 3.
        let mut expected_rows: Vec<u32> = Vec::new();
        for off in -10i64..=-1 {
            expected_rows.push((12 + off) as u32);
        }
        assert_eq!(expected_rows.first(), Some(&2));
        assert_eq!(expected_rows.last(), Some(&11));
        let range = CellRange::parse("C2:C11").unwrap();
        assert_eq!(refs.internal, BTreeSet::from([(None, range)]));
    }

    #[test]
    fn bare_number_parses() {
        assert_eq!(parse_formula("=1").unwrap().root, Expr::Number(1.0));
        assert_eq!(parse_formula("1").unwrap().root, Expr::Number(1.0));
    }

    #[test]
    fn constant_expression_has_no_references() {
        let ast = parse_formula("=2*3").unwrap();
        assert!(ast.extract_references(addr("A1")).unwrap().is_empty());
    }

    #[test]
    fn sum_references_at_a12() {
        let ast = parse_formula("=SUM(A2:A10)").unwrap();
        let refs = ast.extract_references(addr("A12")).unwrap();
        assert_eq!(
            refs.internal,
            BTreeSet::from([(None, CellRange::parse("A2:A10").unwrap())])
        );
        assert!(refs.external.is_empty());
        assert!(refs.names.is_empty());
    }

    #[test]
    fn normal_form_examples() {
        let plus_one = parse_formula("=A2+1").unwrap();
        assert_eq!(plus_one.relative_normal_form(addr("A3")), "=R[-1]C+1");
        let shifted = parse_formula("=A5+1").unwrap();
        assert_eq!(shifted.relative_normal_form(addr("A6")), "=R[-1]C+1");

        let absolute = parse_formula("=$A$1").unwrap();
        assert_eq!(absolute.relative_normal_form(addr("Q7")), "=R1C1");
        assert_eq!(absolute.relative_normal_form(addr("B2")), "=R1C1");

        let sum = parse_formula("=SUM(A2:A10)").unwrap();
        assert_eq!(
            sum.relative_normal_form(addr("A12")),
            "=SUM(R[-10]C:R[-2]C)"
        );
    }

    #[test]
    fn normal_form_uppercases_names() {
        let a = parse_formula("=sum(A1)+taxrate").unwrap();
        let b = parse_formula("=SUM(A1)+TaxRate").unwrap();
        assert_eq!(
            a.relative_normal_form(addr("B1")),
            b.relative_normal_form(addr("B1"))
        );
    }

    #[test]
    fn render_parse_fixpoint_on_sampled_formulas() {
        let samples = [
            "=SUM(A2:A10)",
            "=SUM(R[-10]C:R[-1]C)",
            "=$A$1",
            "=A$1+$B2",
            "=1.5%+2",
            "=-A1^2",
            "=\"a\"\"b\"&C3",
            "=(1+2)*3",
            "=Sheet1!A1",
            "='My Sheet'!B2:C4",
            "=[Book.xlsx]Sheet1!A1",
            "=IF(A1>=2,TRUE,FALSE)",
            "=#DIV/0!",
            "=Rates",
            "=SUM(A1,B2,C3:C9)",
            "=R1C1:R3C3",
            "=A1<>B1",
        ];
        for text in samples {
            let ast = parse_formula(text).unwrap();
            let rendered = ast.render();
            let reparsed = parse_formula(&rendered).unwrap();
            assert_eq!(
                reparsed, ast,
                "fixpoint failed for {text}: rendered {rendered}"
            );
        }
    }

    #[test]
    fn union_outside_argument_list_rejected() {
        let err = parse_formula("=(A1,B1)").unwrap_err();
        assert!(matches!(err, FormulaError::Syntax { .. }));
        // Inside an argument list the comma separates arguments.
        assert!(parse_formula("=SUM(A1,B1)").is_ok());
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse_formula("=SUM(A2:A10").unwrap_err() {
            // Offset points one past the end of the 11-character input.
            FormulaError::Syntax { offset, .. } => assert_eq!(offset, 11),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_formula("=1+").is_err());
        assert!(parse_formula("=A1:NAME").is_err());
        assert!(parse_formula("").is_err());
    }

    #[test]
    fn out_of_bounds_relative_reference() {
        let ast = parse_formula("=R[-5]C").unwrap();
        let err = ast.extract_references(addr("A3")).unwrap_err();
        assert!(matches!(err, FormulaError::OutOfBoundsReference { .. }));
        assert!(ast.extract_references(addr("A6")).is_ok());
    }

    #[test]
    fn external_and_name_references_reported_separately() {
        let ast = parse_formula("=[Budget.xlsx]Sheet1!A1+Rates+Sheet2!B2").unwrap();
        let refs = ast.extract_references(addr("A1")).unwrap();
        assert_eq!(
            refs.external,
            BTreeSet::from([(
                "Budget.xlsx".to_string(),
                "Sheet1".to_string(),
                "A1".to_string()
            )])
        );
        assert_eq!(refs.names, BTreeSet::from(["Rates".to_string()]));
        assert_eq!(
            refs.internal,
            BTreeSet::from([(Some("Sheet2".to_string()), CellRange::parse("B2").unwrap())])
        );
        assert!(ast.has_external_reference());
        assert!(!parse_formula("=Sheet2!B2")
            .unwrap()
            .has_external_reference());
    }

    #[test]
    fn operator_precedence_shape() {
        // 1+2*3 groups the product first.
        let ast = parse_formula("=1+2*3").unwrap();
        match ast.root {
            Expr::Binary {
                op: BinaryOp::Add,
                rhs,
                ..
            } => {
                assert!(matches!(
                    *rhs,
                    Expr::Binary {
                        op: BinaryOp::Mul,
                        ..
                    }
                ));
            }
            other => panic!("unexpected {other:?}"),
        }
        // Comparison binds loosest.
        let ast = parse_formula("=A1&\"x\"=B1").unwrap();
        assert!(matches!(
            ast.root,
            Expr::Binary {
                op: BinaryOp::Eq,
                ..
            }
        ));
        // ^ is left-associative.
        assert_eq!(parse_formula("=2^3^2").unwrap().render(), "=2^3^2");
        let ast = parse_formula("=2^3^2").unwrap();
        match ast.root {
            Expr::Binary {
                op: BinaryOp::Pow,
                lhs,
                ..
            } => {
                assert!(matches!(
                    *lhs,
                    Expr::Binary {
                        op: BinaryOp::Pow,
                        ..
                    }
                ));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rebase_shifts_relative_keeps_absolute() {
        let ast = parse_formula("=A1+$B$2+R[1]C").unwrap();
        let moved = ast.rebase(addr("C3"), addr("D5")).unwrap();
        assert_eq!(moved.render(), "=B3+$B$2+R[1]C");
        // Shifting off the sheet is an error.
        assert!(parse_formula("=A1")
            .unwrap()
            .rebase(addr("B5"), addr("A5"))
            .is_err());
    }

    #[test]
    fn translation_invariance_spot_check() {
        // A 3x3 grid of shifted copies of "=B2*2" anchored at C2.
        let base = parse_formula("=B2*2").unwrap();
        let base_nf = base.relative_normal_form(addr("C2"));
        for dr in 0..3i64 {
            for dc in 0..3i64 {
                let shifted_ref = CellAddress::new((2 + dr) as u32, (2 + dc) as u32);
                let anchor = CellAddress::new((2 + dr) as u32, (3 + dc) as u32);
                let text = format!("={}*2", shifted_ref.render_a1());
                let shifted = parse_formula(&text).unwrap();
                assert_eq!(shifted.relative_normal_form(anchor), base_nf);
            }
        }
    }
}
