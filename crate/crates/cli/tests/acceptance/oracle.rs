//! Deliberately naive reference taint simulator used to cross-check
//! the engine. Everything is keyed by signal name, wires are computed
//! on demand by recursion instead of a precomputed topological order,
//! and no state is shared between cycles beyond the finished maps.

use std::collections::HashMap;

use flowspec_core::{BinOp, Design, Expr, SignalKind, Testbench};

pub type ValueMap = HashMap<String, u64>;
pub type TaintMap = HashMap<String, bool>;

fn mask(v: u64, w: u32) -> u64 {
    if w >= 64 {
        v
    } else {
        v & ((1u64 << w) - 1)
    }
}

fn expr_width(design: &Design, e: &Expr) -> u32 {
    match e {
        Expr::Const { width, .. } => *width,
        Expr::Ref(id) => design.decls[*id].width,
        Expr::Not(inner) => expr_width(design, inner),
        Expr::Bin { op, lhs, .. } => match op {
            BinOp::Eq | BinOp::Neq | BinOp::Lt => 1,
            _ => expr_width(design, lhs),
        },
        Expr::Mux { then, .. } => expr_width(design, then),
    }
}

/// One cycle's evaluation environment. State signals (inputs and regs)
/// are fixed up front; wires are resolved lazily through `signal`.
struct CycleEnv<'a> {
    design: &'a Design,
    values: ValueMap,
    taints: TaintMap,
    forced_wire: Option<String>,
}

impl<'a> CycleEnv<'a> {
    fn signal(&mut self, name: &str) -> (u64, bool) {
        if let (Some(&v), Some(&t)) = (self.values.get(name), self.taints.get(name)) {
            return (v, t);
        }
        let id = self.design.signal_id(name).expect("declared signal");
        let expr = self.design.assigns[&id].clone();
        let (v, mut t) = self.eval(&expr);
        if self.forced_wire.as_deref() == Some(name) {
            t = true;
        }
        self.values.insert(name.to_string(), v);
        self.taints.insert(name.to_string(), t);
        (v, t)
    }

    fn eval(&mut self, e: &Expr) -> (u64, bool) {
        match e {
            Expr::Const { value, .. } => (*value, false),
            Expr::Ref(id) => {
                let name = self.design.decls[*id].name.clone();
                self.signal(&name)
            }
            Expr::Not(inner) => {
                let (v, t) = self.eval(inner);
                (mask(!v, expr_width(self.design, inner)), t)
            }
            Expr::Bin { op, lhs, rhs } => {
                let (lv, lt) = self.eval(lhs);
                let (rv, rt) = self.eval(rhs);
                let v = match op {
                    BinOp::And => lv & rv,
                    BinOp::Or => lv | rv,
                    BinOp::Xor => lv ^ rv,
                    BinOp::Add => mask(lv.wrapping_add(rv), expr_width(self.design, lhs)),
                    BinOp::Eq => (lv == rv) as u64,
                    BinOp::Neq => (lv != rv) as u64,
                    BinOp::Lt => (lv < rv) as u64,
                };
                (v, lt || rt)
            }
            Expr::Mux { cond, then, els } => {
                let (cv, ct) = self.eval(cond);
                let (v, at) = if cv != 0 { self.eval(then) } else { self.eval(els) };
                (v, ct || at)
            }
        }
    }

    fn finish(mut self) -> (ValueMap, TaintMap) {
        let names: Vec<String> = self.design.decls.iter().map(|d| d.name.clone()).collect();
        for name in names {
            self.signal(&name);
        }
        (self.values, self.taints)
    }
}

/// Full per-cycle value and taint maps for one source.
pub fn simulate(design: &Design, tb: &Testbench, source: &str) -> Vec<(ValueMap, TaintMap)> {
    let src_kind = design.decls[design.signal_id(source).expect("source declared")].kind;
    let mut out: Vec<(ValueMap, TaintMap)> = Vec::with_capacity(tb.rows.len());

    let mut values = ValueMap::new();
    let mut taints = TaintMap::new();
    for decl in &design.decls {
        if decl.kind == SignalKind::Reg {
            values.insert(decl.name.clone(), decl.reset_value);
            taints.insert(decl.name.clone(), decl.name == source);
        }
    }
    for (k, &id) in tb.inputs.iter().enumerate() {
        let name = design.decls[id].name.clone();
        values.insert(name.clone(), tb.rows[0][k]);
        taints.insert(name, design.decls[id].name == source);
    }
    let env = CycleEnv {
        design,
        values,
        taints,
        forced_wire: (src_kind == SignalKind::Wire).then(|| source.to_string()),
    };
    out.push(env.finish());

    for row in &tb.rows[1..] {
        let (prev_v, prev_t) = out.last().unwrap();
        let mut values = ValueMap::new();
        let mut taints = TaintMap::new();
        for (id, decl) in design.decls.iter().enumerate() {
            if decl.kind != SignalKind::Reg {
                continue;
            }
            let mut env = CycleEnv {
                design,
                values: prev_v.clone(),
                taints: prev_t.clone(),
                forced_wire: None,
            };
            let (v, t) = env.eval(&design.updates[&id].clone());
            values.insert(decl.name.clone(), v);
            taints.insert(decl.name.clone(), t);
        }
        for (k, &id) in tb.inputs.iter().enumerate() {
            let name = design.decls[id].name.clone();
            values.insert(name.clone(), row[k]);
            taints.insert(name, src_kind == SignalKind::Input && design.decls[id].name == source);
        }
        let env = CycleEnv {
            design,
            values,
            taints,
            forced_wire: None,
        };
        out.push(env.finish());
    }
    out
}

/// Flow times for one sink in an already simulated trace: cycle 0 if
/// tainted at reset, plus every 0-to-1 taint transition.
pub fn flow_times(states: &[(ValueMap, TaintMap)], sink: &str) -> Vec<usize> {
    let mut times = Vec::new();
    if states[0].1[sink] {
        times.push(0);
    }
    for i in 1..states.len() {
        if states[i].1[sink] && !states[i - 1].1[sink] {
            times.push(i);
        }
    }
    times
}
