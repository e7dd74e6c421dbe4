//! Netlist IR: signal declarations, expressions, and whole-design
//! validation for a miniature synchronous register-transfer language.
//!
//! A design is a list of signal declarations plus one combinational
//! assign per wire and one clocked update per reg. Validation checks
//! that the wire dependency graph is acyclic and that every wire/reg
//! is driven exactly once.

mod parser;

pub use parser::parse_design;

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Read, parse, and validate a design file.
pub fn read_design(path: &Path) -> Result<Design> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let design = parse_design(&text, &path.display().to_string())?;
    design.validate()?;
    Ok(design)
}

pub type SignalId = usize;

/// Maximum signal width in bits. Values are stored in `u64`.
pub const MAX_WIDTH: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalKind {
    Input,
    Wire,
    Reg,
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalKind::Input => write!(f, "input"),
            SignalKind::Wire => write!(f, "wire"),
            SignalKind::Reg => write!(f, "reg"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalDecl {
    pub name: String,
    pub width: u32,
    pub kind: SignalKind,
    /// Power-on value; regs only, zero for inputs and wires.
    pub reset_value: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    And,
    Or,
    Xor,
    Add,
    Eq,
    Neq,
    Lt,
}

impl BinOp {
    pub fn token(self) -> &'static str {
        match self {
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Xor => "^",
            BinOp::Add => "+",
            BinOp::Eq => "==",
            BinOp::Neq => "!=",
            BinOp::Lt => "<",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Neq | BinOp::Lt)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    /// Literal constant. Width is resolved from context during parsing
    /// and validation; unconstrained constants take their minimal width.
    Const { value: u64, width: u32 },
    Ref(SignalId),
    Not(Box<Expr>),
    Bin {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Mux {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
}

impl Expr {
    /// Signals referenced anywhere in the expression, deduplicated,
    /// in first-occurrence order.
    pub fn refs(&self) -> Vec<SignalId> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs(&self, out: &mut Vec<SignalId>) {
        match self {
            Expr::Const { .. } => {}
            Expr::Ref(id) => {
                if !out.contains(id) {
                    out.push(*id);
                }
            }
            Expr::Not(e) => e.collect_refs(out),
            Expr::Bin { lhs, rhs, .. } => {
                lhs.collect_refs(out);
                rhs.collect_refs(out);
            }
            Expr::Mux { cond, then, els } => {
                cond.collect_refs(out);
                then.collect_refs(out);
                els.collect_refs(out);
            }
        }
    }

    /// Result width of a checked expression.
    pub fn width(&self, design: &Design) -> u32 {
        match self {
            Expr::Const { width, .. } => *width,
            Expr::Ref(id) => design.decls[*id].width,
            Expr::Not(e) => e.width(design),
            Expr::Bin { op, lhs, .. } => {
                if op.is_comparison() {
                    1
                } else {
                    lhs.width(design)
                }
            }
            Expr::Mux { then, .. } => then.width(design),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    pub name: String,
    pub decls: Vec<SignalDecl>,
    /// Wire id -> combinational expression.
    pub assigns: HashMap<SignalId, Expr>,
    /// Reg id -> next-value expression, evaluated over the previous state.
    pub updates: HashMap<SignalId, Expr>,
}

impl Design {
    pub fn signal_id(&self, name: &str) -> Option<SignalId> {
        self.decls.iter().position(|d| d.name == name)
    }

    pub fn signal_name(&self, id: SignalId) -> &str {
        &self.decls[id].name
    }

    /// All signal names in declaration order. This order fixes trace
    /// column layout and every other signal ordering downstream.
    pub fn list_signals(&self) -> Vec<String> {
        self.decls.iter().map(|d| d.name.clone()).collect()
    }

    pub fn inputs(&self) -> impl Iterator<Item = (SignalId, &SignalDecl)> {
        self.decls
            .iter()
            .enumerate()
            .filter(|(_, d)| d.kind == SignalKind::Input)
    }

    pub fn width_of(&self, name: &str) -> Option<u32> {
        self.signal_id(name).map(|id| self.decls[id].width)
    }

    /// Wires in dependency order: every wire appears after the wires
    /// its assign reads. Fails on a combinational cycle, reporting the
    /// signals on it.
    pub fn wire_eval_order(&self) -> Result<Vec<SignalId>> {
        let wires: Vec<SignalId> = self
            .decls
            .iter()
            .enumerate()
            .filter(|(_, d)| d.kind == SignalKind::Wire)
            .map(|(i, _)| i)
            .collect();

        // Kahn's algorithm over wire-to-wire edges only; inputs and regs
        // are always available.
        let mut deps: HashMap<SignalId, Vec<SignalId>> = HashMap::new();
        let mut indegree: HashMap<SignalId, usize> = wires.iter().map(|&w| (w, 0)).collect();
        for &w in &wires {
            if let Some(expr) = self.assigns.get(&w) {
                for r in expr.refs() {
                    if self.decls[r].kind == SignalKind::Wire {
                        deps.entry(r).or_default().push(w);
                        *indegree.get_mut(&w).unwrap() += 1;
                    }
                }
            }
        }

        let mut ready: Vec<SignalId> = wires
            .iter()
            .copied()
            .filter(|w| indegree[w] == 0)
            .collect();
        let mut order = Vec::with_capacity(wires.len());
        while !ready.is_empty() {
            // Lowest declaration index first, for a stable order.
            let pos = (0..ready.len()).min_by_key(|&i| ready[i]).unwrap();
            let w = ready.swap_remove(pos);
            order.push(w);
            if let Some(next) = deps.get(&w) {
                for &n in next {
                    let d = indegree.get_mut(&n).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.push(n);
                    }
                }
            }
        }

        if order.len() != wires.len() {
            let mut members: Vec<String> = wires
                .iter()
                .filter(|w| !order.contains(w))
                .map(|&w| self.decls[w].name.clone())
                .collect();
            members.sort();
            return Err(Error::CombinationalCycle { members });
        }
        Ok(order)
    }

    /// Structural validation: exactly one driver per wire and reg, no
    /// driver on inputs, acyclic wire dependencies, checked widths.
    /// Parsed designs already satisfy this; it guards designs built
    /// programmatically.
    pub fn validate(&self) -> Result<()> {
        for (id, decl) in self.decls.iter().enumerate() {
            if decl.width == 0 || decl.width > MAX_WIDTH {
                return Err(Error::Inconsistent(format!(
                    "signal `{}` has width {}, expected 1..={}",
                    decl.name, decl.width, MAX_WIDTH
                )));
            }
            if decl.width < MAX_WIDTH && decl.reset_value >= (1u64 << decl.width) {
                return Err(Error::Inconsistent(format!(
                    "reset value {} does not fit width {} of `{}`",
                    decl.reset_value, decl.width, decl.name
                )));
            }
            match decl.kind {
                SignalKind::Input => {
                    if self.assigns.contains_key(&id) || self.updates.contains_key(&id) {
                        return Err(Error::Inconsistent(format!(
                            "input `{}` must not be driven",
                            decl.name
                        )));
                    }
                }
                SignalKind::Wire => {
                    if !self.assigns.contains_key(&id) {
                        return Err(Error::DanglingWire {
                            name: decl.name.clone(),
                        });
                    }
                    if self.updates.contains_key(&id) {
                        return Err(Error::Inconsistent(format!(
                            "wire `{}` cannot have a clocked update",
                            decl.name
                        )));
                    }
                }
                SignalKind::Reg => {
                    if !self.updates.contains_key(&id) {
                        return Err(Error::RegWithoutUpdate {
                            name: decl.name.clone(),
                        });
                    }
                    if self.assigns.contains_key(&id) {
                        return Err(Error::Inconsistent(format!(
                            "reg `{}` cannot have a combinational assign",
                            decl.name
                        )));
                    }
                }
            }
        }
        for (id, expr) in self.assigns.iter().chain(self.updates.iter()) {
            let want = self.decls[*id].width;
            let got = self.checked_width(expr)?;
            if got != want {
                return Err(Error::Inconsistent(format!(
                    "driver of `{}` has width {}, expected {}",
                    self.decls[*id].name, got, want
                )));
            }
        }
        self.wire_eval_order()?;
        Ok(())
    }

    /// Width of an expression, checking consistency as it goes.
    /// Constants carry concrete widths after parsing, so every
    /// subexpression has one.
    fn checked_width(&self, expr: &Expr) -> Result<u32> {
        let err = |msg: String| Err(Error::Inconsistent(msg));
        match expr {
            Expr::Const { value, width } => {
                if *width == 0 || *width > MAX_WIDTH {
                    return err(format!("constant width {width} out of range"));
                }
                if *width < MAX_WIDTH && *value >= (1u64 << width) {
                    return err(format!("constant {value} does not fit width {width}"));
                }
                Ok(*width)
            }
            Expr::Ref(id) => Ok(self.decls[*id].width),
            Expr::Not(e) => self.checked_width(e),
            Expr::Bin { op, lhs, rhs } => {
                let l = self.checked_width(lhs)?;
                let r = self.checked_width(rhs)?;
                if l != r {
                    return err(format!(
                        "operands of `{}` have widths {l} and {r}",
                        op.token()
                    ));
                }
                if op.is_comparison() {
                    Ok(1)
                } else {
                    Ok(l)
                }
            }
            Expr::Mux { cond, then, els } => {
                self.checked_width(cond)?;
                let t = self.checked_width(then)?;
                let e = self.checked_width(els)?;
                if t != e {
                    return err(format!("mux arms have widths {t} and {e}"));
                }
                Ok(t)
            }
        }
    }
}

// Printing. The printed form reparses to the same design.

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "design {}", self.name)?;
        for decl in &self.decls {
            match decl.kind {
                SignalKind::Input => writeln!(f, "input {} : {}", decl.name, decl.width)?,
                SignalKind::Wire => writeln!(f, "wire {} : {}", decl.name, decl.width)?,
                SignalKind::Reg => writeln!(
                    f,
                    "reg {} : {} = {}",
                    decl.name, decl.width, decl.reset_value
                )?,
            }
        }
        for (id, decl) in self.decls.iter().enumerate() {
            if decl.kind == SignalKind::Wire {
                writeln!(f, "assign {} = {}", decl.name, ExprPrinter(self, &self.assigns[&id]))?;
            }
        }
        for (id, decl) in self.decls.iter().enumerate() {
            if decl.kind == SignalKind::Reg {
                writeln!(
                    f,
                    "always {} <= {}",
                    decl.name,
                    ExprPrinter(self, &self.updates[&id])
                )?;
            }
        }
        Ok(())
    }
}

struct ExprPrinter<'a>(&'a Design, &'a Expr);

impl fmt::Display for ExprPrinter<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print_expr(self.0, self.1, f, Ctx::Top)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Top,
    /// Operand of the given arithmetic/bitwise chain operator.
    Arith(BinOp),
    /// Operand of a comparison.
    Cmp,
    /// Operand of unary `~`.
    Unary,
}

fn print_expr(d: &Design, e: &Expr, f: &mut fmt::Formatter<'_>, ctx: Ctx) -> fmt::Result {
    match e {
        Expr::Const { value, .. } => write!(f, "{value}"),
        Expr::Ref(id) => write!(f, "{}", d.decls[*id].name),
        Expr::Not(inner) => {
            write!(f, "~")?;
            print_expr(d, inner, f, Ctx::Unary)
        }
        Expr::Bin { op, lhs, rhs } => {
            let needs_parens = match ctx {
                Ctx::Top => false,
                Ctx::Arith(outer) => *op != outer || op.is_comparison(),
                Ctx::Cmp => op.is_comparison(),
                Ctx::Unary => true,
            };
            let inner_ctx = if op.is_comparison() {
                Ctx::Cmp
            } else {
                Ctx::Arith(*op)
            };
            if needs_parens {
                write!(f, "(")?;
            }
            print_expr(d, lhs, f, inner_ctx)?;
            write!(f, " {} ", op.token())?;
            // Right operand of a left-associative chain must not itself
            // print as a bare chain of the same operator, or reparsing
            // would reassociate. Parenthesize non-atomic right operands
            // of the same op.
            let rhs_ctx = match (inner_ctx, rhs.as_ref()) {
                (Ctx::Arith(o), Expr::Bin { op: ro, .. }) if *ro == o => Ctx::Unary,
                _ => inner_ctx,
            };
            print_expr(d, rhs, f, rhs_ctx)?;
            if needs_parens {
                write!(f, ")")?;
            }
            Ok(())
        }
        Expr::Mux { cond, then, els } => {
            write!(f, "mux(")?;
            print_expr(d, cond, f, Ctx::Top)?;
            write!(f, ", ")?;
            print_expr(d, then, f, Ctx::Top)?;
            write!(f, ", ")?;
            print_expr(d, els, f, Ctx::Top)?;
            write!(f, ")")
        }
    }
}
