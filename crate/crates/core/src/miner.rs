//! Phase 3: condition mining over two-cycle slices.
//!
//! For each flow case the miner gathers one slice per (traced source,
//! flow time) with time 0 excluded, instantiates candidate predicates
//! at the prior row, the flow row, or spanning both, and keeps the
//! candidates that hold on every slice. A case whose times are all 0
//! has no slices and mines to the empty set.
//!
//! The same templates checked at every cycle of every trace give the
//! trace-set invariants, used later to discard conditions that say
//! nothing about the flow.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flows::FlowCase;
use crate::netlist::Design;
use crate::sim::TraceSet;
use crate::trace::{slice, Slice};

/// Values a membership set may hold before the candidate is abandoned.
pub const MAX_MEMBERSHIP_VALUES: usize = 3;

/// Which slice row a condition constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowPos {
    Prior,
    Flow,
    Both,
}

impl RowPos {
    pub fn token(self) -> &'static str {
        match self {
            RowPos::Prior => "prior",
            RowPos::Flow => "flow",
            RowPos::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<RowPos> {
        match s {
            "prior" => Some(RowPos::Prior),
            "flow" => Some(RowPos::Flow),
            "both" => Some(RowPos::Both),
            _ => None,
        }
    }
}

/// A single mined relation over slice rows.
///
/// `EqSig` and `NeqSig` are only formed over equal-width signals and
/// store names in ascending order. `PrevEq` relates the flow row to
/// the prior row and is the only spanning template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    EqConst { signal: String, value: u64 },
    NeqConst { signal: String, value: u64 },
    Membership { signal: String, values: Vec<u64> },
    EqSig { a: String, b: String },
    NeqSig { a: String, b: String },
    PrevEq { signal: String },
}

impl Predicate {
    fn kind_rank(&self) -> u8 {
        match self {
            Predicate::EqConst { .. } => 0,
            Predicate::NeqConst { .. } => 1,
            Predicate::Membership { .. } => 2,
            Predicate::EqSig { .. } => 3,
            Predicate::NeqSig { .. } => 4,
            Predicate::PrevEq { .. } => 5,
        }
    }

    pub fn sort_key(&self) -> (u8, &str, &str, Vec<u64>) {
        match self {
            Predicate::EqConst { signal, value } | Predicate::NeqConst { signal, value } => {
                (self.kind_rank(), signal, "", vec![*value])
            }
            Predicate::Membership { signal, values } => {
                (self.kind_rank(), signal, "", values.clone())
            }
            Predicate::EqSig { a, b } | Predicate::NeqSig { a, b } => {
                (self.kind_rank(), a, b, Vec::new())
            }
            Predicate::PrevEq { signal } => (self.kind_rank(), signal, "", Vec::new()),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::EqConst { signal, value } => write!(f, "{signal} == {value}"),
            Predicate::NeqConst { signal, value } => write!(f, "{signal} != {value}"),
            Predicate::Membership { signal, values } => {
                let vals: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                write!(f, "{signal} in {{{}}}", vals.join(","))
            }
            Predicate::EqSig { a, b } => write!(f, "{a} == {b}"),
            Predicate::NeqSig { a, b } => write!(f, "{a} != {b}"),
            Predicate::PrevEq { signal } => write!(f, "{signal} == prev({signal})"),
        }
    }
}

pub fn parse_predicate(s: &str) -> Option<Predicate> {
    let s = s.trim();
    if let Some((lhs, rhs)) = s.split_once(" in ") {
        let vals = rhs.trim().strip_prefix('{')?.strip_suffix('}')?;
        let values = vals
            .split(',')
            .map(|v| v.trim().parse::<u64>().ok())
            .collect::<Option<Vec<_>>>()?;
        return Some(Predicate::Membership {
            signal: lhs.trim().to_string(),
            values,
        });
    }
    if let Some((lhs, rhs)) = s.split_once(" == ") {
        let (l, r) = (lhs.trim(), rhs.trim());
        if r == format!("prev({l})") {
            return Some(Predicate::PrevEq { signal: l.to_string() });
        }
        if let Ok(value) = r.parse::<u64>() {
            return Some(Predicate::EqConst {
                signal: l.to_string(),
                value,
            });
        }
        return Some(Predicate::EqSig {
            a: l.to_string(),
            b: r.to_string(),
        });
    }
    if let Some((lhs, rhs)) = s.split_once(" != ") {
        let (l, r) = (lhs.trim(), rhs.trim());
        if let Ok(value) = r.parse::<u64>() {
            return Some(Predicate::NeqConst {
                signal: l.to_string(),
                value,
            });
        }
        return Some(Predicate::NeqSig {
            a: l.to_string(),
            b: r.to_string(),
        });
    }
    None
}

/// A predicate anchored to a slice row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub pos: RowPos,
    pub pred: Predicate,
}

impl Condition {
    fn sort_key(&self) -> ((u8, &str, &str, Vec<u64>), RowPos) {
        (self.pred.sort_key(), self.pos)
    }

    /// Replay the condition against one slice. Signals are resolved by
    /// name in `signal_order`, which indexes the slice rows.
    pub fn holds(&self, signal_order: &[String], s: &Slice) -> Result<bool> {
        let idx = |name: &str| -> Result<usize> {
            signal_order
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Internal(format!("condition references unknown signal `{name}`")))
        };
        let row = match self.pos {
            RowPos::Prior => &s.prior,
            RowPos::Flow | RowPos::Both => &s.flow,
        };
        Ok(match &self.pred {
            Predicate::EqConst { signal, value } => row[idx(signal)?] == *value,
            Predicate::NeqConst { signal, value } => row[idx(signal)?] != *value,
            Predicate::Membership { signal, values } => values.contains(&row[idx(signal)?]),
            Predicate::EqSig { a, b } => row[idx(a)?] == row[idx(b)?],
            Predicate::NeqSig { a, b } => row[idx(a)?] != row[idx(b)?],
            Predicate::PrevEq { signal } => {
                let i = idx(signal)?;
                s.prior[i] == s.flow[i]
            }
        })
    }
}

/// All conditions that survived mining for one case, in canonical
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionSet {
    pub case_id: usize,
    pub conditions: Vec<Condition>,
}

fn row_of(pos: RowPos, s: &Slice) -> &[u64] {
    match pos {
        RowPos::Prior => &s.prior,
        _ => &s.flow,
    }
}

fn widths_for(design: &Design, signal_order: &[String]) -> Result<Vec<u32>> {
    signal_order
        .iter()
        .map(|n| {
            design
                .width_of(n)
                .ok_or_else(|| Error::Inconsistent(format!("trace signal `{n}` is not declared in the design")))
        })
        .collect()
}

/// Keep every candidate that holds on all slices. Empty input mines
/// to the empty set rather than to every vacuously-true candidate.
pub fn mine_conditions(
    design: &Design,
    signal_order: &[String],
    slices: &[Slice],
) -> Result<Vec<Condition>> {
    if slices.is_empty() {
        return Ok(Vec::new());
    }
    let widths = widths_for(design, signal_order)?;
    let n = signal_order.len();
    let mut out = Vec::new();

    for pos in [RowPos::Prior, RowPos::Flow] {
        for i in 0..n {
            let signal = signal_order[i].clone();
            if slices.iter().all(|s| row_of(pos, s)[i] == 0) {
                out.push(Condition {
                    pos,
                    pred: Predicate::EqConst {
                        signal: signal.clone(),
                        value: 0,
                    },
                });
            }
            if slices.iter().all(|s| row_of(pos, s)[i] != 0) {
                out.push(Condition {
                    pos,
                    pred: Predicate::NeqConst {
                        signal: signal.clone(),
                        value: 0,
                    },
                });
            }
            let seen: BTreeSet<u64> = slices.iter().map(|s| row_of(pos, s)[i]).collect();
            if seen.len() <= MAX_MEMBERSHIP_VALUES {
                out.push(Condition {
                    pos,
                    pred: Predicate::Membership {
                        signal,
                        values: seen.into_iter().collect(),
                    },
                });
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if widths[i] != widths[j] {
                    continue;
                }
                let (a, b) = if signal_order[i] <= signal_order[j] {
                    (i, j)
                } else {
                    (j, i)
                };
                if slices.iter().all(|s| row_of(pos, s)[a] == row_of(pos, s)[b]) {
                    out.push(Condition {
                        pos,
                        pred: Predicate::EqSig {
                            a: signal_order[a].clone(),
                            b: signal_order[b].clone(),
                        },
                    });
                }
                if slices.iter().all(|s| row_of(pos, s)[a] != row_of(pos, s)[b]) {
                    out.push(Condition {
                        pos,
                        pred: Predicate::NeqSig {
                            a: signal_order[a].clone(),
                            b: signal_order[b].clone(),
                        },
                    });
                }
            }
        }
    }
    for i in 0..n {
        if slices.iter().all(|s| s.prior[i] == s.flow[i]) {
            out.push(Condition {
                pos: RowPos::Both,
                pred: Predicate::PrevEq {
                    signal: signal_order[i].clone(),
                },
            });
        }
    }

    out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(out)
}

/// Collect the slices a case is mined over: each traced source in the
/// case, sliced at every flow time except 0.
pub fn case_slices(set: &TraceSet, case: &FlowCase) -> Result<Vec<Slice>> {
    let times: Vec<usize> = case.times.iter().copied().filter(|&t| t >= 1).collect();
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let mut sources: Vec<&String> = case.pairs.iter().map(|(s, _)| s).collect();
    sources.sort();
    sources.dedup();
    let mut out = Vec::new();
    for src in sources {
        let trace = set.traces.iter().find(|t| &t.source == src).ok_or_else(|| {
            Error::Inconsistent(format!(
                "flow case {} references source `{src}` with no trace",
                case.id
            ))
        })?;
        out.extend(slice(trace, &times)?);
    }
    Ok(out)
}

pub fn mine_case(design: &Design, set: &TraceSet, case: &FlowCase) -> Result<ConditionSet> {
    let slices = case_slices(set, case)?;
    let conditions = mine_conditions(design, &set.signal_order, &slices)?;
    Ok(ConditionSet {
        case_id: case.id,
        conditions,
    })
}

/// Mine every case, in parallel.
pub fn mine_all(design: &Design, set: &TraceSet, cases: &[FlowCase]) -> Result<Vec<ConditionSet>> {
    cases
        .par_iter()
        .map(|c| mine_case(design, set, c))
        .collect()
}

/// Predicates that hold at every cycle of every trace in the set,
/// position-free. `PrevEq` here means the signal never changes.
pub fn mine_trace_invariants(design: &Design, set: &TraceSet) -> Result<Vec<Predicate>> {
    if set.traces.is_empty() {
        return Ok(Vec::new());
    }
    let order = &set.signal_order;
    let widths = widths_for(design, order)?;
    let n = order.len();
    let mut out = Vec::new();

    let all_rows = |f: &dyn Fn(&[u64]) -> bool| -> bool {
        set.traces
            .iter()
            .all(|t| t.states.iter().all(|s| f(&s.values)))
    };

    for i in 0..n {
        let signal = order[i].clone();
        if all_rows(&|r| r[i] == 0) {
            out.push(Predicate::EqConst {
                signal: signal.clone(),
                value: 0,
            });
        }
        if all_rows(&|r| r[i] != 0) {
            out.push(Predicate::NeqConst {
                signal: signal.clone(),
                value: 0,
            });
        }
        let mut seen = BTreeSet::new();
        for t in &set.traces {
            for s in &t.states {
                seen.insert(s.values[i]);
            }
        }
        if seen.len() <= MAX_MEMBERSHIP_VALUES {
            out.push(Predicate::Membership {
                signal: signal.clone(),
                values: seen.into_iter().collect(),
            });
        }
        let constant = set.traces.iter().all(|t| {
            t.states
                .windows(2)
                .all(|w| w[0].values[i] == w[1].values[i])
        });
        if constant {
            out.push(Predicate::PrevEq { signal });
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if widths[i] != widths[j] {
                continue;
            }
            let (a, b) = if order[i] <= order[j] { (i, j) } else { (j, i) };
            if all_rows(&|r| r[a] == r[b]) {
                out.push(Predicate::EqSig {
                    a: order[a].clone(),
                    b: order[b].clone(),
                });
            }
            if all_rows(&|r| r[a] != r[b]) {
                out.push(Predicate::NeqSig {
                    a: order[a].clone(),
                    b: order[b].clone(),
                });
            }
        }
    }

    out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(out)
}

/// Render cases with their mined conditions: each case header line is
/// followed by one `case <id>: <pos> <predicate>` line per condition.
pub fn format_conditions(cases: &[FlowCase], sets: &[ConditionSet]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for (case, cs) in cases.iter().zip(sets) {
        out.push_str(&crate::flows::format_flow_cases(std::slice::from_ref(case)));
        for c in &cs.conditions {
            writeln!(out, "case {}: {} {}", cs.case_id, c.pos.token(), c.pred).unwrap();
        }
    }
    out
}

pub fn parse_conditions(text: &str, path: &str) -> Result<Vec<(FlowCase, ConditionSet)>> {
    let err = |line_no: usize, msg: &str| Error::FileFormat {
        path: path.to_string(),
        msg: format!("line {line_no}: {msg}"),
    };
    let mut out: Vec<(FlowCase, ConditionSet)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rest = line
            .strip_prefix("case ")
            .ok_or_else(|| err(i + 1, "expected `case <id>: ...`"))?;
        let (id_str, rest) = rest
            .split_once(':')
            .ok_or_else(|| err(i + 1, "expected `case <id>: ...`"))?;
        let id: usize = id_str
            .trim()
            .parse()
            .map_err(|_| err(i + 1, "bad case id"))?;
        let rest = rest.trim();
        if rest.starts_with("times=") {
            let case = crate::flows::parse_flow_cases(line, path)?.remove(0);
            out.push((
                case,
                ConditionSet {
                    case_id: id,
                    conditions: Vec::new(),
                },
            ));
        } else {
            let (pos_tok, pred_str) = rest
                .split_once(' ')
                .ok_or_else(|| err(i + 1, "expected `<pos> <predicate>`"))?;
            let pos = RowPos::parse(pos_tok)
                .ok_or_else(|| err(i + 1, "row position must be prior, flow, or both"))?;
            let pred = parse_predicate(pred_str)
                .ok_or_else(|| err(i + 1, "unrecognized predicate"))?;
            let entry = out
                .iter_mut()
                .find(|(c, _)| c.id == id)
                .ok_or_else(|| err(i + 1, "condition precedes its case header"))?;
            entry.1.conditions.push(Condition { pos, pred });
        }
    }
    Ok(out)
}
