//! Phase 2: find when taint arrives, group equal-time flows, and
//! collect the pairs that never flow.
//!
//! A sink's flow times are the cycles where its taint rises from 0 to
//! 1, plus time 0 when it is already tainted in the initial state
//! (combinational fan-out of the source at reset). Taint can rise more
//! than once per pair because design events such as resets clear it.
//!
//! Pairs whose time-sets are exactly equal land in one `FlowCase` and
//! are mined together. Pairs with no taint anywhere form the no-flow
//! set; pairs whose source was never traced are unknown and belong to
//! neither set.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sim::{Trace, TraceSet};

/// All flow times for one (source, sink) pair, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeOfFlow {
    pub source: String,
    pub sink: String,
    pub times: Vec<usize>,
}

/// Pairs that flow at exactly the same set of times. Ids are assigned
/// in ascending lexicographic order of the time-sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowCase {
    pub id: usize,
    pub times: Vec<usize>,
    pub pairs: Vec<(String, String)>,
}

/// Ordered (source, sink) pairs with no taint at any cycle, relative
/// to the traced sources.
pub type NoFlowSet = Vec<(String, String)>;

/// Scan one trace for every sink's taint arrival times.
pub fn find_time_of_flow(trace: &Trace) -> Vec<TimeOfFlow> {
    let src_idx = trace
        .signal_index(&trace.source)
        .expect("trace source is one of its columns");
    let mut out = Vec::new();
    for (sink_idx, sink) in trace.signal_order.iter().enumerate() {
        if sink_idx == src_idx {
            continue;
        }
        let mut times = Vec::new();
        for cycle in 0..trace.cycles() {
            let now = trace.taint(cycle, sink_idx);
            let before = cycle > 0 && trace.taint(cycle - 1, sink_idx);
            if now && !before {
                times.push(cycle);
            }
        }
        if !times.is_empty() {
            out.push(TimeOfFlow {
                source: trace.source.clone(),
                sink: sink.clone(),
                times,
            });
        }
    }
    out
}

/// Partition tuples into cases by exact time-set equality.
pub fn group_flows(tuples: &[TimeOfFlow]) -> Vec<FlowCase> {
    let mut by_times: BTreeMap<Vec<usize>, Vec<(String, String)>> = BTreeMap::new();
    for t in tuples {
        by_times
            .entry(t.times.clone())
            .or_default()
            .push((t.source.clone(), t.sink.clone()));
    }
    by_times
        .into_iter()
        .enumerate()
        .map(|(id, (times, mut pairs))| {
            pairs.sort();
            pairs.dedup();
            FlowCase { id, times, pairs }
        })
        .collect()
}

/// Complement of the flow tuples over the traced pairs: every ordered
/// (traced source, other signal) pair without a tuple never saw taint.
pub fn no_flow_set(
    signal_order: &[String],
    traced_sources: &[String],
    tuples: &[TimeOfFlow],
) -> NoFlowSet {
    let mut flowing: BTreeMap<(&str, &str), ()> = BTreeMap::new();
    for t in tuples {
        flowing.insert((t.source.as_str(), t.sink.as_str()), ());
    }
    let mut out = Vec::new();
    for src in traced_sources {
        for sink in signal_order {
            if src == sink {
                continue;
            }
            if !flowing.contains_key(&(src.as_str(), sink.as_str())) {
                out.push((src.clone(), sink.clone()));
            }
        }
    }
    out.sort();
    out
}

/// Run flow identification over a whole trace set.
pub fn find_flows(set: &TraceSet) -> (Vec<TimeOfFlow>, Vec<FlowCase>, NoFlowSet) {
    let mut tuples = Vec::new();
    for trace in &set.traces {
        tuples.extend(find_time_of_flow(trace));
    }
    let cases = group_flows(&tuples);
    let sources: Vec<String> = set.sources();
    let no_flow = no_flow_set(&set.signal_order, &sources, &tuples);
    (tuples, cases, no_flow)
}

fn fmt_times(times: &[usize]) -> String {
    let strs: Vec<String> = times.iter().map(|t| t.to_string()).collect();
    format!("{{{}}}", strs.join(","))
}

/// Render cases in the flows-file format, one line per case:
/// `case 0: times={2,7} pairs={a->b, a->c}`.
pub fn format_flow_cases(cases: &[FlowCase]) -> String {
    let mut out = String::new();
    for c in cases {
        let pairs: Vec<String> = c
            .pairs
            .iter()
            .map(|(s, k)| format!("{s}->{k}"))
            .collect();
        writeln!(
            out,
            "case {}: times={} pairs={{{}}}",
            c.id,
            fmt_times(&c.times),
            pairs.join(", ")
        )
        .unwrap();
    }
    out
}

pub fn parse_flow_cases(text: &str, path: &str) -> Result<Vec<FlowCase>> {
    let err = |msg: String| Error::FileFormat {
        path: path.to_string(),
        msg,
    };
    let mut cases = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_line = || -> Option<FlowCase> {
            let rest = line.strip_prefix("case ")?;
            let (id_str, rest) = rest.split_once(':')?;
            let id: usize = id_str.trim().parse().ok()?;
            let rest = rest.trim();
            let rest = rest.strip_prefix("times={")?;
            let (times_str, rest) = rest.split_once('}')?;
            let times = if times_str.is_empty() {
                Vec::new()
            } else {
                times_str
                    .split(',')
                    .map(|t| t.trim().parse::<usize>().ok())
                    .collect::<Option<Vec<_>>>()?
            };
            let rest = rest.trim().strip_prefix("pairs={")?;
            let pairs_str = rest.strip_suffix('}')?;
            let pairs = if pairs_str.is_empty() {
                Vec::new()
            } else {
                pairs_str
                    .split(',')
                    .map(|p| {
                        let (s, k) = p.trim().split_once("->")?;
                        Some((s.trim().to_string(), k.trim().to_string()))
                    })
                    .collect::<Option<Vec<_>>>()?
            };
            Some(FlowCase { id, times, pairs })
        };
        let case =
            parse_line().ok_or_else(|| err(format!("line {}: malformed case line", i + 1)))?;
        cases.push(case);
    }
    Ok(cases)
}

/// One `src =/=> snk` line per pair.
pub fn format_no_flows(no_flow: &NoFlowSet) -> String {
    let mut out = String::new();
    for (s, k) in no_flow {
        writeln!(out, "{s} =/=> {k}").unwrap();
    }
    out
}

pub fn parse_no_flows(text: &str, path: &str) -> Result<NoFlowSet> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (s, k) = line.split_once(" =/=> ").ok_or_else(|| Error::FileFormat {
            path: path.to_string(),
            msg: format!("line {}: expected `src =/=> snk`", i + 1),
        })?;
        out.push((s.trim().to_string(), k.trim().to_string()));
    }
    Ok(out)
}
