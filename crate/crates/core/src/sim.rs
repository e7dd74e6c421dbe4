//! Phase 1: taint-instrumented simulation.
//!
//! Every signal carries a 1-bit taint shadow. Taint propagates through
//! operators as the OR of operand taints; a mux taints its output from
//! the condition and the selected arm only, so implicit flows through
//! the condition are tracked. A constant driver always evaluates to
//! taint 0, which is how design-driven resets clear taint.
//!
//! Source handling: an input source is re-tainted on every cycle since
//! the environment drives it continuously; a reg or wire source is
//! tainted only in the initial state and afterwards carries whatever
//! propagates back into it. In the initial state the wire taints are
//! the combinational closure of the source, so any signal that would
//! change with the source's cycle-0 value is already marked.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::netlist::{BinOp, Design, Expr, SignalId, SignalKind};

/// Input stimulus: one value per cycle for every design input.
/// `rows[cycle][k]` drives `inputs[k]`; `inputs` holds design ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Testbench {
    pub inputs: Vec<SignalId>,
    pub rows: Vec<Vec<u64>>,
}

impl Testbench {
    pub fn cycles(&self) -> usize {
        self.rows.len()
    }
}

/// Values and taints for every signal during one cycle, indexed by
/// declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub values: Vec<u64>,
    pub taints: Vec<bool>,
}

/// One taint simulation of a design against a testbench, for a single
/// source signal. `states[i]` is the state during cycle `i`; the trace
/// is exactly as long as the testbench.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub source: String,
    pub signal_order: Vec<String>,
    pub states: Vec<State>,
}

impl Trace {
    pub fn cycles(&self) -> usize {
        self.states.len()
    }

    pub fn signal_index(&self, name: &str) -> Option<usize> {
        self.signal_order.iter().position(|s| s == name)
    }

    pub fn value(&self, cycle: usize, sig: usize) -> u64 {
        self.states[cycle].values[sig]
    }

    pub fn taint(&self, cycle: usize, sig: usize) -> bool {
        self.states[cycle].taints[sig]
    }
}

/// All single-source traces for one design/testbench pair, in
/// declaration order of the traced sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceSet {
    pub signal_order: Vec<String>,
    pub traces: Vec<Trace>,
}

impl TraceSet {
    pub fn sources(&self) -> Vec<String> {
        self.traces.iter().map(|t| t.source.clone()).collect()
    }
}

/// Precomputed evaluation order for repeated stepping of one design.
pub struct Simulator<'a> {
    design: &'a Design,
    wire_order: Vec<SignalId>,
    regs: Vec<SignalId>,
}

impl<'a> Simulator<'a> {
    pub fn new(design: &'a Design) -> Result<Self> {
        let wire_order = design.wire_eval_order()?;
        let regs = design
            .decls
            .iter()
            .enumerate()
            .filter(|(_, d)| d.kind == SignalKind::Reg)
            .map(|(i, _)| i)
            .collect();
        Ok(Simulator {
            design,
            wire_order,
            regs,
        })
    }

    /// The reset state: regs at their reset values, cycle-0 inputs
    /// applied, wires evaluated. Taint starts at the source and, for
    /// the wires, propagates through its combinational fan-out.
    pub fn initial_state(&self, inputs: &[u64], tb_inputs: &[SignalId], source: SignalId) -> State {
        let n = self.design.decls.len();
        let mut values = vec![0u64; n];
        let mut taints = vec![false; n];
        for (id, decl) in self.design.decls.iter().enumerate() {
            if decl.kind == SignalKind::Reg {
                values[id] = decl.reset_value;
            }
        }
        for (k, &id) in tb_inputs.iter().enumerate() {
            values[id] = inputs[k];
        }
        if self.design.decls[source].kind != SignalKind::Wire {
            taints[source] = true;
        }
        self.eval_wires(&mut values, &mut taints, Some(source));
        State { values, taints }
    }

    /// Advance one cycle: clock the regs on the previous state, apply
    /// the next input row, re-evaluate the wires.
    pub fn step(&self, prev: &State, inputs: &[u64], tb_inputs: &[SignalId], source: SignalId) -> State {
        let n = self.design.decls.len();
        let mut values = prev.values.clone();
        let mut taints = vec![false; n];
        let mut reg_next: Vec<(SignalId, u64, bool)> = Vec::with_capacity(self.regs.len());
        for &r in &self.regs {
            let expr = &self.design.updates[&r];
            let (v, t) = eval(self.design, expr, &prev.values, &prev.taints);
            reg_next.push((r, v, t));
        }
        for (r, v, t) in reg_next {
            values[r] = v;
            taints[r] = t;
        }
        for (k, &id) in tb_inputs.iter().enumerate() {
            values[id] = inputs[k];
            taints[id] = false;
        }
        if self.design.decls[source].kind == SignalKind::Input {
            taints[source] = true;
        }
        self.eval_wires(&mut values, &mut taints, None);
        State { values, taints }
    }

    fn eval_wires(&self, values: &mut [u64], taints: &mut [bool], force_source: Option<SignalId>) {
        for &w in &self.wire_order {
            let expr = &self.design.assigns[&w];
            let (v, t) = eval(self.design, expr, values, taints);
            values[w] = v;
            taints[w] = t || force_source == Some(w);
        }
    }
}

fn mask(value: u64, width: u32) -> u64 {
    if width >= 64 {
        value
    } else {
        value & ((1u64 << width) - 1)
    }
}

/// Evaluate an expression's value and taint over one environment.
fn eval(design: &Design, expr: &Expr, values: &[u64], taints: &[bool]) -> (u64, bool) {
    match expr {
        Expr::Const { value, .. } => (*value, false),
        Expr::Ref(id) => (values[*id], taints[*id]),
        Expr::Not(e) => {
            let (v, t) = eval(design, e, values, taints);
            (mask(!v, e.width(design)), t)
        }
        Expr::Bin { op, lhs, rhs } => {
            let (lv, lt) = eval(design, lhs, values, taints);
            let (rv, rt) = eval(design, rhs, values, taints);
            let t = lt || rt;
            let v = match op {
                BinOp::And => lv & rv,
                BinOp::Or => lv | rv,
                BinOp::Xor => lv ^ rv,
                BinOp::Add => mask(lv.wrapping_add(rv), lhs.width(design)),
                BinOp::Eq => (lv == rv) as u64,
                BinOp::Neq => (lv != rv) as u64,
                BinOp::Lt => (lv < rv) as u64,
            };
            (v, t)
        }
        Expr::Mux { cond, then, els } => {
            let (cv, ct) = eval(design, cond, values, taints);
            let (v, at) = if cv != 0 {
                eval(design, then, values, taints)
            } else {
                eval(design, els, values, taints)
            };
            (v, ct || at)
        }
    }
}

/// Simulate one source over the whole testbench.
pub fn simulate_tainted(design: &Design, tb: &Testbench, source: &str) -> Result<Trace> {
    let source_id = design
        .signal_id(source)
        .ok_or_else(|| Error::UnknownSource {
            name: source.to_string(),
        })?;
    if tb.rows.is_empty() {
        return Err(Error::Inconsistent("testbench has no cycles".into()));
    }
    let sim = Simulator::new(design)?;
    let mut states = Vec::with_capacity(tb.rows.len());
    states.push(sim.initial_state(&tb.rows[0], &tb.inputs, source_id));
    for row in &tb.rows[1..] {
        let next = sim.step(states.last().unwrap(), row, &tb.inputs, source_id);
        states.push(next);
    }
    Ok(Trace {
        source: source.to_string(),
        signal_order: design.list_signals(),
        states,
    })
}

/// Simulate every requested source (default: all signals) in parallel.
/// The result is canonical: traces are ordered by the source's
/// declaration index regardless of the requested order, so permuting
/// or parallelizing the source list cannot change the output.
pub fn gen_all_traces(design: &Design, tb: &Testbench, sources: Option<&[String]>) -> Result<TraceSet> {
    let mut ids: Vec<SignalId> = match sources {
        None => (0..design.decls.len()).collect(),
        Some(names) => {
            let mut ids = Vec::with_capacity(names.len());
            for name in names {
                let id = design.signal_id(name).ok_or_else(|| Error::UnknownSource {
                    name: name.clone(),
                })?;
                ids.push(id);
            }
            ids
        }
    };
    ids.sort_unstable();
    ids.dedup();
    let traces = ids
        .par_iter()
        .map(|&id| simulate_tainted(design, tb, &design.decls[id].name))
        .collect::<Result<Vec<_>>>()?;
    Ok(TraceSet {
        signal_order: design.list_signals(),
        traces,
    })
}
