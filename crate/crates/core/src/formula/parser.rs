//! Recursive-descent formula parser.

use super::lexer::{lex, Spanned, Tok};
use super::{BinaryOp, Expr, FormulaAst, FormulaError, RefCorner, RefQualifier, RefStyle, UnaryOp};

pub(super) fn parse(text: &str) -> Result<FormulaAst, FormulaError> {
    let body = text.strip_prefix('=').unwrap_or(text);
    let shift = text.len() - body.len();
    let tokens = lex(body).map_err(|e| e.shift(shift))?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        shift,
        input_len: body.len(),
    };
    let root = parser.expr()?;
    if let Some(t) = parser.peek() {
        return Err(parser.err_at(t.offset, "unexpected trailing input"));
    }
    Ok(FormulaAst { root })
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    shift: usize,
    input_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek().map(|s| &s.tok) == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn err_at(&self, offset: usize, msg: impl Into<String>) -> FormulaError {
        FormulaError::Syntax {
            offset: offset + self.shift,
            message: msg.into(),
        }
    }

    fn err_eof(&self, msg: impl Into<String>) -> FormulaError {
        FormulaError::Syntax {
            offset: self.input_len + self.shift,
            message: msg.into(),
        }
    }

    fn expr(&mut self) -> Result<Expr, FormulaError> {
        self.binary(1)
    }

    fn binary(&mut self, level: u8) -> Result<Expr, FormulaError> {
        if level > 5 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.peek().and_then(|s| binop_at_level(&s.tok, level)) {
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FormulaError> {
        if self.eat(&Tok::Minus) {
            return Ok(Expr::Unary {
                op: UnaryOp::Neg,
                operand: Box::new(self.unary()?),
            });
        }
        if self.eat(&Tok::Plus) {
            return Ok(Expr::Unary {
                op: UnaryOp::Plus,
                operand: Box::new(self.unary()?),
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, FormulaError> {
        let mut e = self.primary()?;
        while self.eat(&Tok::Percent) {
            e = Expr::Percent(Box::new(e));
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, FormulaError> {
        let Some(spanned) = self.next() else {
            return Err(self.err_eof("expected an expression"));
        };
        let offset = spanned.offset;
        match spanned.tok {
            Tok::Number(n) => Ok(Expr::Number(n)),
            Tok::Text(t) => Ok(Expr::Text(t)),
            Tok::ErrorLit(e) => Ok(Expr::ErrorLit(e)),
            Tok::LParen => {
                let inner = self.expr()?;
                if let Some(t) = self.peek() {
                    if t.tok == Tok::Comma {
                        return Err(self.err_at(
                            t.offset,
                            "union operator is only supported inside argument lists",
                        ));
                    }
                }
                if !self.eat(&Tok::RParen) {
                    return Err(self.close_error("expected ')'"));
                }
                Ok(Expr::Paren(Box::new(inner)))
            }
            Tok::Ident(name) => {
                if self.peek().map(|s| &s.tok) == Some(&Tok::LParen) {
                    self.pos += 1;
                    return self.call(name);
                }
                if self.eat(&Tok::Bang) {
                    let q = RefQualifier {
                        workbook: None,
                        sheet: Some(name),
                        quoted: false,
                    };
                    return self.qualified(q);
                }
                if name.eq_ignore_ascii_case("TRUE") {
                    return Ok(Expr::Bool(true));
                }
                if name.eq_ignore_ascii_case("FALSE") {
                    return Ok(Expr::Bool(false));
                }
                Ok(Expr::Name {
                    qualifier: None,
                    name,
                })
            }
            Tok::QuotedName(q) => {
                if !self.eat(&Tok::Bang) {
                    return Err(self.err_at(offset, "quoted sheet name must be followed by '!'"));
                }
                let (workbook, sheet) = split_quoted_qualifier(&q);
                let q = RefQualifier {
                    workbook,
                    sheet: Some(sheet),
                    quoted: true,
                };
                self.qualified(q)
            }
            Tok::Bracket(book) => {
                let sheet = match self.peek().map(|s| s.tok.clone()) {
                    Some(Tok::Ident(name)) => {
                        self.pos += 1;
                        Some(name)
                    }
                    Some(Tok::QuotedName(name)) => {
                        self.pos += 1;
                        Some(name)
                    }
                    _ => None,
                };
                if !self.eat(&Tok::Bang) {
                    return Err(self.err_at(offset, "workbook qualifier must be followed by '!'"));
                }
                let q = RefQualifier {
                    workbook: Some(book),
                    sheet,
                    quoted: false,
                };
                self.qualified(q)
            }
            tok @ (Tok::A1 { .. } | Tok::R1C1 { .. }) => {
                let corner = corner_of(&tok);
                self.maybe_range(RefQualifier::none(), corner, offset)
            }
            other => Err(self.err_at(offset, format!("unexpected token {other:?}"))),
        }
    }

    fn call(&mut self, name: String) -> Result<Expr, FormulaError> {
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(Expr::Call { name, args });
        }
        loop {
            args.push(self.expr()?);
            if self.eat(&Tok::Comma) {
                continue;
            }
            if self.eat(&Tok::RParen) {
                return Ok(Expr::Call { name, args });
            }
            return Err(self.close_error("expected ',' or ')' in argument list"));
        }
    }

    fn close_error(&self, msg: &str) -> FormulaError {
        match self.peek() {
            Some(t) => self.err_at(t.offset, msg),
            None => self.err_eof(msg),
        }
    }

    /// A qualifier has been consumed; the next token must be a cell
    /// reference (optionally extended to a range) or a defined name.
    fn qualified(&mut self, q: RefQualifier) -> Result<Expr, FormulaError> {
        let Some(spanned) = self.next() else {
            return Err(self.err_eof("expected a reference after '!'"));
        };
        match spanned.tok {
            tok @ (Tok::A1 { .. } | Tok::R1C1 { .. }) => {
                let corner = corner_of(&tok);
                self.maybe_range(q, corner, spanned.offset)
            }
            Tok::Ident(name) => Ok(Expr::Name {
                qualifier: Some(q),
                name,
            }),
            other => Err(self.err_at(
                spanned.offset,
                format!("expected a reference, found {other:?}"),
            )),
        }
    }

    fn maybe_range(
        &mut self,
        q: RefQualifier,
        start: RefCorner,
        offset: usize,
    ) -> Result<Expr, FormulaError> {
        if !self.eat(&Tok::Colon) {
            return Ok(Expr::Cell {
                qualifier: q,
                corner: start,
            });
        }
        let Some(spanned) = self.next() else {
            return Err(self.err_eof("expected the end of the range after ':'"));
        };
        match spanned.tok {
            tok @ (Tok::A1 { .. } | Tok::R1C1 { .. }) => {
                let end = corner_of(&tok);
                Ok(Expr::Range {
                    qualifier: q,
                    start,
                    end,
                })
            }
            other => Err(self.err_at(
                offset,
                format!("range end must be a cell reference, found {other:?}"),
            )),
        }
    }
}

fn binop_at_level(tok: &Tok, level: u8) -> Option<BinaryOp> {
    match (level, tok) {
        (1, Tok::Eq) => Some(BinaryOp::Eq),
        (1, Tok::Ne) => Some(BinaryOp::Ne),
        (1, Tok::Lt) => Some(BinaryOp::Lt),
        (1, Tok::Le) => Some(BinaryOp::Le),
        (1, Tok::Gt) => Some(BinaryOp::Gt),
        (1, Tok::Ge) => Some(BinaryOp::Ge),
        (2, Tok::Amp) => Some(BinaryOp::Concat),
        (3, Tok::Plus) => Some(BinaryOp::Add),
        (3, Tok::Minus) => Some(BinaryOp::Sub),
        (4, Tok::Star) => Some(BinaryOp::Mul),
        (4, Tok::Slash) => Some(BinaryOp::Div),
        (5, Tok::Caret) => Some(BinaryOp::Pow),
        _ => None,
    }
}

fn corner_of(tok: &Tok) -> RefCorner {
    use super::Coord;
    match tok {
        Tok::A1 {
            col_abs,
            col,
            row_abs,
            row,
        } => RefCorner {
            row: if *row_abs {
                Coord::Abs(*row)
            } else {
                Coord::At(*row)
            },
            col: if *col_abs {
                Coord::Abs(*col)
            } else {
                Coord::At(*col)
            },
            style: RefStyle::A1,
        },
        Tok::R1C1 { row, col } => RefCorner {
            row: *row,
            col: *col,
            style: RefStyle::R1C1,
        },
        _ => unreachable!("corner_of called on a non-reference token"),
    }
}

/// A quoted qualifier may embed the workbook: `'[Book.xlsx]Sheet1'`.
fn split_quoted_qualifier(q: &str) -> (Option<String>, String) {
    if let Some(rest) = q.strip_prefix('[') {
        if let Some(close) = rest.find(']') {
            return (
                Some(rest[..close].to_string()),
                rest[close + 1..].to_string(),
            );
        }
    }
    (None, q.to_string())
}
