//! Text format for designs.
//!
//! ```text
//! design gated
//! input a : 1
//! reg b : 1 = 0
//! wire w : 2
//! assign w = expr
//! always b <= expr
//! ```
//!
//! One statement per line, `#` starts a comment. Expressions use `~`,
//! the equal-precedence left-associative tier `& | ^ +` (mixed
//! operators must be parenthesized), comparisons `== != <` below that,
//! `mux(cond, then, else)`, decimal constants, and parentheses.
//! Operands of a binary operator share one width; unsized constants
//! adopt the width of their context, or their minimal width when the
//! context is unconstrained (mux conditions, all-constant comparisons).

use std::collections::HashMap;

use super::{BinOp, Design, Expr, SignalDecl, SignalId, SignalKind, MAX_WIDTH};
use crate::error::{Error, Result};

/// Words that cannot be used as signal names: statement and expression
/// keywords, plus column/placeholder names used by the file formats.
const RESERVED: &[&str] = &[
    "design", "input", "wire", "reg", "assign", "always", "mux", "cycle", "_src_", "_snk_",
    "_r_", "_inv_",
];

pub fn parse_design(text: &str, path: &str) -> Result<Design> {
    let lines: Vec<(usize, Vec<Token>)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| Ok((i + 1, lex_line(l, i + 1, path)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(_, toks)| !toks.is_empty())
        .collect();

    let mut it = lines.iter();
    let (name, header_line) = match it.next() {
        Some((line, toks)) => match toks.as_slice() {
            [t0, t1] if t0.is_word("design") => (expect_ident(t1, path)?, *line),
            _ => {
                return Err(Error::syntax(
                    path,
                    *line,
                    toks[0].col,
                    "expected `design <name>`",
                ))
            }
        },
        None => return Err(Error::syntax(path, 1, 1, "empty design file")),
    };
    let _ = header_line;

    // Pass 1: declarations, so drives may reference signals declared later.
    let mut decls: Vec<SignalDecl> = Vec::new();
    let mut by_name: HashMap<String, SignalId> = HashMap::new();
    for (line, toks) in it.clone() {
        let kw = &toks[0];
        let kind = match kw.text.as_str() {
            "input" => SignalKind::Input,
            "wire" => SignalKind::Wire,
            "reg" => SignalKind::Reg,
            _ => continue,
        };
        let mut p = Parser::new(toks, *line, path);
        p.next(); // keyword
        let name_tok = p.next_or("signal name")?;
        let name = expect_ident(name_tok, path)?;
        if RESERVED.contains(&name.as_str()) {
            return Err(Error::syntax(
                path,
                *line,
                name_tok.col,
                format!("`{name}` is a reserved name"),
            ));
        }
        if by_name.contains_key(&name) {
            return Err(Error::syntax(
                path,
                *line,
                name_tok.col,
                format!("duplicate declaration of `{name}`"),
            ));
        }
        p.expect_punct(":")?;
        let width_tok = p.next_or("width")?;
        let width = expect_number(width_tok, path)?;
        if width == 0 || width > MAX_WIDTH as u64 {
            return Err(Error::syntax(
                path,
                *line,
                width_tok.col,
                format!("width must be 1..={MAX_WIDTH}, got {width}"),
            ));
        }
        let width = width as u32;
        let reset_value = if kind == SignalKind::Reg {
            p.expect_punct("=")?;
            let v_tok = p.next_or("reset value")?;
            let v = expect_number(v_tok, path)?;
            if width < MAX_WIDTH && v >= (1u64 << width) {
                return Err(Error::syntax(
                    path,
                    *line,
                    v_tok.col,
                    format!("reset value {v} does not fit width {width}"),
                ));
            }
            v
        } else {
            0
        };
        p.expect_end()?;
        by_name.insert(name.clone(), decls.len());
        decls.push(SignalDecl {
            name,
            width,
            kind,
            reset_value,
        });
    }

    // Pass 2: assigns and updates.
    let mut assigns: HashMap<SignalId, Expr> = HashMap::new();
    let mut updates: HashMap<SignalId, Expr> = HashMap::new();
    for (line, toks) in it {
        let kw = toks[0].text.as_str();
        match kw {
            "input" | "wire" | "reg" => continue,
            "assign" | "always" => {}
            _ => {
                return Err(Error::syntax(
                    path,
                    *line,
                    toks[0].col,
                    format!("unknown statement `{kw}`"),
                ))
            }
        }
        let mut p = Parser::new(toks, *line, path);
        p.next();
        let target_tok = p.next_or("target signal")?;
        let target = expect_ident(target_tok, path)?;
        let id = *by_name.get(&target).ok_or_else(|| {
            Error::syntax(
                path,
                *line,
                target_tok.col,
                format!("unknown identifier `{target}`"),
            )
        })?;
        let decl = &decls[id];
        if kw == "assign" {
            if decl.kind != SignalKind::Wire {
                return Err(Error::syntax(
                    path,
                    *line,
                    target_tok.col,
                    format!("assign target `{target}` is not a wire"),
                ));
            }
            p.expect_punct("=")?;
        } else {
            if decl.kind != SignalKind::Reg {
                return Err(Error::syntax(
                    path,
                    *line,
                    target_tok.col,
                    format!("always target `{target}` is not a reg"),
                ));
            }
            p.expect_punct("<=")?;
        }
        let pexpr = p.parse_expr()?;
        p.expect_end()?;
        let resolver = Resolver {
            decls: &decls,
            by_name: &by_name,
            path,
        };
        let want = decl.width;
        let (expr, res) = resolver.resolve(&pexpr, Some(want))?;
        if let Res::Exact(got) = res {
            if got != want {
                let (eline, ecol) = pexpr.loc();
                return Err(Error::syntax(
                    path,
                    eline,
                    ecol,
                    format!("driver of `{target}` has width {got}, expected {want}"),
                ));
            }
        }
        let slot = if kw == "assign" {
            &mut assigns
        } else {
            &mut updates
        };
        if slot.insert(id, expr).is_some() {
            let what = if kw == "assign" { "assign" } else { "update" };
            return Err(Error::syntax(
                path,
                *line,
                target_tok.col,
                format!("duplicate {what} for `{target}`"),
            ));
        }
    }

    Ok(Design {
        name,
        decls,
        assigns,
        updates,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Ident,
    Number,
    Punct,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    text: String,
    line: usize,
    col: usize,
}

impl Token {
    fn is_word(&self, w: &str) -> bool {
        self.kind == TokKind::Ident && self.text == w
    }

    fn is_punct(&self, p: &str) -> bool {
        self.kind == TokKind::Punct && self.text == p
    }
}

fn lex_line(line: &str, line_no: usize, path: &str) -> Result<Vec<Token>> {
    let mut toks = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push(Token {
                kind: TokKind::Ident,
                text: chars[start..i].iter().collect(),
                line: line_no,
                col,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            toks.push(Token {
                kind: TokKind::Number,
                text: chars[start..i].iter().collect(),
                line: line_no,
                col,
            });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let punct = match two.as_str() {
            "<=" | "==" | "!=" => {
                i += 2;
                two
            }
            _ => match c {
                ':' | '=' | '<' | '&' | '|' | '^' | '+' | '~' | '(' | ')' | ',' => {
                    i += 1;
                    c.to_string()
                }
                _ => {
                    return Err(Error::syntax(
                        path,
                        line_no,
                        col,
                        format!("unexpected character `{c}`"),
                    ))
                }
            },
        };
        toks.push(Token {
            kind: TokKind::Punct,
            text: punct,
            line: line_no,
            col,
        });
    }
    Ok(toks)
}

fn expect_ident(t: &Token, path: &str) -> Result<String> {
    if t.kind == TokKind::Ident {
        Ok(t.text.clone())
    } else {
        Err(Error::syntax(
            path,
            t.line,
            t.col,
            format!("expected identifier, got `{}`", t.text),
        ))
    }
}

fn expect_number(t: &Token, path: &str) -> Result<u64> {
    if t.kind == TokKind::Number {
        t.text.parse::<u64>().map_err(|_| {
            Error::syntax(path, t.line, t.col, format!("number `{}` out of range", t.text))
        })
    } else {
        Err(Error::syntax(
            path,
            t.line,
            t.col,
            format!("expected number, got `{}`", t.text),
        ))
    }
}

/// Expression AST with source locations, before name and width
/// resolution.
enum PExpr {
    Const {
        value: u64,
        line: usize,
        col: usize,
    },
    Ref {
        name: String,
        line: usize,
        col: usize,
    },
    Not(Box<PExpr>),
    Bin {
        op: BinOp,
        lhs: Box<PExpr>,
        rhs: Box<PExpr>,
        line: usize,
        col: usize,
    },
    Mux {
        cond: Box<PExpr>,
        then: Box<PExpr>,
        els: Box<PExpr>,
        line: usize,
        col: usize,
    },
}

impl PExpr {
    fn loc(&self) -> (usize, usize) {
        match self {
            PExpr::Const { line, col, .. }
            | PExpr::Ref { line, col, .. }
            | PExpr::Bin { line, col, .. }
            | PExpr::Mux { line, col, .. } => (*line, *col),
            PExpr::Not(inner) => inner.loc(),
        }
    }
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    path: &'a str,
}

impl<'a> Parser<'a> {
    fn new(toks: &'a [Token], line: usize, path: &'a str) -> Self {
        Parser {
            toks,
            pos: 0,
            line,
            path,
        }
    }

    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn next_or(&mut self, what: &str) -> Result<&'a Token> {
        self.next().ok_or_else(|| {
            Error::syntax(
                self.path,
                self.line,
                self.end_col(),
                format!("expected {what}"),
            )
        })
    }

    fn end_col(&self) -> usize {
        self.toks.last().map(|t| t.col + t.text.len()).unwrap_or(1)
    }

    fn expect_punct(&mut self, p: &str) -> Result<()> {
        match self.next() {
            Some(t) if t.is_punct(p) => Ok(()),
            Some(t) => Err(Error::syntax(
                self.path,
                t.line,
                t.col,
                format!("expected `{p}`, got `{}`", t.text),
            )),
            None => Err(Error::syntax(
                self.path,
                self.line,
                self.end_col(),
                format!("expected `{p}`"),
            )),
        }
    }

    fn expect_end(&mut self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(Error::syntax(
                self.path,
                t.line,
                t.col,
                format!("unexpected trailing `{}`", t.text),
            )),
        }
    }

    fn parse_expr(&mut self) -> Result<PExpr> {
        let lhs = self.parse_arith()?;
        let op = match self.peek() {
            Some(t) if t.is_punct("==") => Some(BinOp::Eq),
            Some(t) if t.is_punct("!=") => Some(BinOp::Neq),
            Some(t) if t.is_punct("<") => Some(BinOp::Lt),
            _ => None,
        };
        let Some(op) = op else { return Ok(lhs) };
        let op_tok = self.next().unwrap();
        let rhs = self.parse_arith()?;
        if let Some(t) = self.peek() {
            if t.is_punct("==") || t.is_punct("!=") || t.is_punct("<") {
                return Err(Error::syntax(
                    self.path,
                    t.line,
                    t.col,
                    "comparisons cannot be chained, parenthesize",
                ));
            }
        }
        Ok(PExpr::Bin {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            line: op_tok.line,
            col: op_tok.col,
        })
    }

    fn parse_arith(&mut self) -> Result<PExpr> {
        let mut lhs = self.parse_unary()?;
        let mut chain_op: Option<BinOp> = None;
        loop {
            let op = match self.peek() {
                Some(t) if t.is_punct("&") => Some(BinOp::And),
                Some(t) if t.is_punct("|") => Some(BinOp::Or),
                Some(t) if t.is_punct("^") => Some(BinOp::Xor),
                Some(t) if t.is_punct("+") => Some(BinOp::Add),
                _ => None,
            };
            let Some(op) = op else { return Ok(lhs) };
            let op_tok = self.peek().unwrap();
            if let Some(prev) = chain_op {
                if prev != op {
                    return Err(Error::syntax(
                        self.path,
                        op_tok.line,
                        op_tok.col,
                        format!(
                            "mixed `{}` and `{}` require parentheses",
                            prev.token(),
                            op.token()
                        ),
                    ));
                }
            }
            chain_op = Some(op);
            let op_tok = self.next().unwrap();
            let rhs = self.parse_unary()?;
            lhs = PExpr::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                line: op_tok.line,
                col: op_tok.col,
            };
        }
    }

    fn parse_unary(&mut self) -> Result<PExpr> {
        if matches!(self.peek(), Some(t) if t.is_punct("~")) {
            self.next();
            let inner = self.parse_unary()?;
            return Ok(PExpr::Not(Box::new(inner)));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<PExpr> {
        let t = self.next_or("expression")?;
        match t.kind {
            TokKind::Number => Ok(PExpr::Const {
                value: expect_number(t, self.path)?,
                line: t.line,
                col: t.col,
            }),
            TokKind::Ident if t.text == "mux" => {
                self.expect_punct("(")?;
                let cond = self.parse_expr()?;
                self.expect_punct(",")?;
                let then = self.parse_expr()?;
                self.expect_punct(",")?;
                let els = self.parse_expr()?;
                self.expect_punct(")")?;
                Ok(PExpr::Mux {
                    cond: Box::new(cond),
                    then: Box::new(then),
                    els: Box::new(els),
                    line: t.line,
                    col: t.col,
                })
            }
            TokKind::Ident => Ok(PExpr::Ref {
                name: t.text.clone(),
                line: t.line,
                col: t.col,
            }),
            TokKind::Punct if t.text == "(" => {
                let e = self.parse_expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => Err(Error::syntax(
                self.path,
                t.line,
                t.col,
                format!("expected expression, got `{}`", t.text),
            )),
        }
    }
}

/// Width of a resolved subexpression: pinned by some signal reference,
/// or an all-constant subtree that needs at least `min` bits.
#[derive(Clone, Copy)]
enum Res {
    Exact(u32),
    AtLeast(u32),
}

struct Resolver<'a> {
    decls: &'a [SignalDecl],
    by_name: &'a HashMap<String, SignalId>,
    path: &'a str,
}

impl Resolver<'_> {
    /// Resolve names and stamp constant widths. `expected` is the width
    /// imposed by context, if any.
    fn resolve(&self, p: &PExpr, expected: Option<u32>) -> Result<(Expr, Res)> {
        match p {
            PExpr::Const { value, line, col } => {
                let min = min_width(*value);
                let width = match expected {
                    Some(w) => {
                        if min > w {
                            return Err(Error::syntax(
                                self.path,
                                *line,
                                *col,
                                format!("constant {value} does not fit width {w}"),
                            ));
                        }
                        w
                    }
                    None => min,
                };
                let res = match expected {
                    Some(w) => Res::Exact(w),
                    None => Res::AtLeast(min),
                };
                Ok((Expr::Const { value: *value, width }, res))
            }
            PExpr::Ref { name, line, col } => {
                let id = *self.by_name.get(name).ok_or_else(|| {
                    Error::syntax(
                        self.path,
                        *line,
                        *col,
                        format!("unknown identifier `{name}`"),
                    )
                })?;
                let w = self.decls[id].width;
                if let Some(e) = expected {
                    if e != w {
                        return Err(Error::syntax(
                            self.path,
                            *line,
                            *col,
                            format!("`{name}` has width {w}, expected {e}"),
                        ));
                    }
                }
                Ok((Expr::Ref(id), Res::Exact(w)))
            }
            PExpr::Not(inner) => {
                let (e, r) = self.resolve(inner, expected)?;
                Ok((Expr::Not(Box::new(e)), r))
            }
            PExpr::Bin { op, lhs, rhs, line, col } => {
                if op.is_comparison() {
                    let (le, re2, _) = self.resolve_pair(lhs, rhs, None, *line, *col, op.token())?;
                    Ok((
                        Expr::Bin {
                            op: *op,
                            lhs: Box::new(le),
                            rhs: Box::new(re2),
                        },
                        Res::Exact(1),
                    ))
                } else {
                    let (le, re2, r) =
                        self.resolve_pair(lhs, rhs, expected, *line, *col, op.token())?;
                    Ok((
                        Expr::Bin {
                            op: *op,
                            lhs: Box::new(le),
                            rhs: Box::new(re2),
                        },
                        r,
                    ))
                }
            }
            PExpr::Mux {
                cond,
                then,
                els,
                line,
                col,
            } => {
                let (ce, cr) = self.resolve(cond, None)?;
                let (ce, _) = self.pin_if_const(cond, ce, cr)?;
                let (te, ee, r) = self.resolve_pair(then, els, expected, *line, *col, "mux")?;
                Ok((
                    Expr::Mux {
                        cond: Box::new(ce),
                        then: Box::new(te),
                        els: Box::new(ee),
                    },
                    r,
                ))
            }
        }
    }

    /// Resolve two operands that must share a width. When both sides
    /// are all-constant the pair stays coercible: the exprs are pinned
    /// at the joint minimal width but `AtLeast` is reported so an
    /// enclosing context can still re-resolve them wider.
    fn resolve_pair(
        &self,
        lhs: &PExpr,
        rhs: &PExpr,
        expected: Option<u32>,
        line: usize,
        col: usize,
        what: &str,
    ) -> Result<(Expr, Expr, Res)> {
        let (le, lr) = self.resolve(lhs, expected)?;
        let (re2, rr) = self.resolve(rhs, expected)?;
        match (lr, rr) {
            (Res::Exact(a), Res::Exact(b)) => {
                if a != b {
                    return Err(Error::syntax(
                        self.path,
                        line,
                        col,
                        format!("operands of `{what}` have widths {a} and {b}"),
                    ));
                }
                Ok((le, re2, Res::Exact(a)))
            }
            (Res::Exact(a), Res::AtLeast(_)) => {
                let (re2, _) = self.resolve(rhs, Some(a))?;
                Ok((le, re2, Res::Exact(a)))
            }
            (Res::AtLeast(_), Res::Exact(b)) => {
                let (le, _) = self.resolve(lhs, Some(b))?;
                Ok((le, re2, Res::Exact(b)))
            }
            (Res::AtLeast(a), Res::AtLeast(b)) => {
                let w = a.max(b).max(1);
                let (le, _) = self.resolve(lhs, Some(w))?;
                let (re2, _) = self.resolve(rhs, Some(w))?;
                Ok((le, re2, Res::AtLeast(a.max(b))))
            }
        }
    }

    /// An all-constant subtree left unconstrained pins to its minimal
    /// width so evaluation has a definite width everywhere.
    fn pin_if_const(&self, p: &PExpr, e: Expr, r: Res) -> Result<(Expr, Res)> {
        match r {
            Res::AtLeast(min) => {
                let w = min.max(1);
                let (e, _) = self.resolve(p, Some(w))?;
                Ok((e, Res::Exact(w)))
            }
            Res::Exact(_) => Ok((e, r)),
        }
    }
}

fn min_width(value: u64) -> u32 {
    if value == 0 {
        1
    } else {
        64 - value.leading_zeros()
    }
}
