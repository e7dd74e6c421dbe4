//! End-to-end driver chaining the four phases and writing every
//! artifact.
//!
//! Output layout under the chosen directory:
//!
//! ```text
//! traces/<source>.csv   per-source tainted traces
//! flows.txt             flow cases
//! no_flow.txt           pairs that never flow
//! conditions.txt        raw mined conditions per case
//! spec.txt              final specification
//! heatmap.csv           group-to-group counts (with a groups file)
//! ```
//!
//! Cross-phase sanity is checked on every run, not only under test:
//! the cases and no-flow set must partition the traced pairs, every
//! surviving condition must replay against its slices, and no emitted
//! predicate may be a trace-set invariant. A violation is a bug, not
//! bad input, and reports as such.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flows::{find_flows, format_flow_cases, format_no_flows, FlowCase, NoFlowSet, TimeOfFlow};
use crate::miner::{case_slices, format_conditions, mine_all, mine_trace_invariants, ConditionSet, Predicate};
use crate::netlist::Design;
use crate::sim::{gen_all_traces, Testbench, TraceSet};
use crate::spec::{
    format_heatmap, format_specification, group_heatmap, merge_properties, normalize_properties,
    parse_groups, postprocess_conditions, Property, Specification,
};
use crate::trace::write_trace_set;

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    /// Restrict tracing to these sources; all signals when empty.
    pub sources: Option<Vec<String>>,
    /// Signal-to-group map for heatmap emission.
    pub groups: Option<PathBuf>,
}

/// Counts reported after a successful run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineSummary {
    pub traces: usize,
    pub cases: usize,
    pub properties: usize,
    pub no_flow_pairs: usize,
}

/// Every ordered traced pair must land in exactly one case or the
/// no-flow set, and tuples must agree with their case's times.
pub fn check_flow_partition(
    set: &TraceSet,
    tuples: &[TimeOfFlow],
    cases: &[FlowCase],
    no_flow: &NoFlowSet,
) -> Result<()> {
    let mut seen: Vec<(String, String)> = Vec::new();
    for c in cases {
        for p in &c.pairs {
            seen.push(p.clone());
        }
    }
    for p in no_flow {
        seen.push(p.clone());
    }
    seen.sort();
    let before = seen.len();
    seen.dedup();
    if seen.len() != before {
        return Err(Error::Internal(
            "a source/sink pair appears in more than one flow partition".into(),
        ));
    }
    let mut expected: Vec<(String, String)> = Vec::new();
    for t in &set.traces {
        for sink in &set.signal_order {
            if sink != &t.source {
                expected.push((t.source.clone(), sink.clone()));
            }
        }
    }
    expected.sort();
    if seen != expected {
        return Err(Error::Internal(
            "flow cases and no-flow set do not partition the traced pairs".into(),
        ));
    }
    for t in tuples {
        let case = cases
            .iter()
            .find(|c| c.pairs.contains(&(t.source.clone(), t.sink.clone())));
        match case {
            Some(c) if c.times == t.times => {}
            _ => {
                return Err(Error::Internal(format!(
                    "tuple {}->{} disagrees with its flow case",
                    t.source, t.sink
                )))
            }
        }
    }
    Ok(())
}

/// Replay every surviving condition against every slice of its case.
pub fn check_replay(set: &TraceSet, cases: &[FlowCase], processed: &[ConditionSet]) -> Result<()> {
    for (case, cs) in cases.iter().zip(processed) {
        let slices = case_slices(set, case)?;
        for cond in &cs.conditions {
            for s in &slices {
                if !cond.holds(&set.signal_order, s)? {
                    return Err(Error::Internal(format!(
                        "condition `{} {}` fails replay on case {}",
                        cond.pos.token(),
                        cond.pred,
                        case.id
                    )));
                }
            }
        }
    }
    Ok(())
}

/// No predicate that survived into a property may be a trace-set
/// invariant.
pub fn check_no_invariants_emitted(props: &[Property], tis: &[Predicate]) -> Result<()> {
    for p in props {
        for c in &p.conditions {
            if tis.contains(&c.pred) {
                return Err(Error::Internal(format!(
                    "trace-set invariant `{}` leaked into property {}",
                    c.pred, p.number
                )));
            }
        }
    }
    Ok(())
}

fn check_property_cover(cases: &[FlowCase], props: &[Property]) -> Result<()> {
    let mut covered: Vec<usize> = props.iter().flat_map(|p| p.case_ids.clone()).collect();
    covered.sort_unstable();
    let expected: Vec<usize> = cases.iter().map(|c| c.id).collect();
    if covered != expected {
        return Err(Error::Internal(
            "merged properties do not cover every flow case exactly once".into(),
        ));
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Postprocess mined conditions for each case against the trace-set
/// invariants.
pub fn postprocess_all(
    design: &Design,
    mined: &[ConditionSet],
    tis: &[Predicate],
) -> Result<Vec<ConditionSet>> {
    mined
        .iter()
        .map(|cs| {
            Ok(ConditionSet {
                case_id: cs.case_id,
                conditions: postprocess_conditions(design, &cs.conditions, tis)?,
            })
        })
        .collect()
}

pub fn run_pipeline(
    design: &Design,
    tb: &Testbench,
    out_dir: &Path,
    opts: &PipelineOptions,
) -> Result<PipelineSummary> {
    design.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let sources = opts.sources.as_deref();
    let set = gen_all_traces(design, tb, sources)?;
    write_trace_set(&set, &out_dir.join("traces"))?;

    let (tuples, cases, no_flow) = find_flows(&set);
    check_flow_partition(&set, &tuples, &cases, &no_flow)?;
    write(&out_dir.join("flows.txt"), &format_flow_cases(&cases))?;
    write(&out_dir.join("no_flow.txt"), &format_no_flows(&no_flow))?;

    let mined = mine_all(design, &set, &cases)?;
    write(&out_dir.join("conditions.txt"), &format_conditions(&cases, &mined))?;

    let tis = mine_trace_invariants(design, &set)?;
    let processed = postprocess_all(design, &mined, &tis)?;
    check_replay(&set, &cases, &processed)?;

    let props = merge_properties(&cases, &processed);
    check_property_cover(&cases, &props)?;
    check_no_invariants_emitted(&props, &tis)?;

    let spec = Specification {
        properties: normalize_properties(design, &props)?,
        no_flow: no_flow.clone(),
    };
    write(&out_dir.join("spec.txt"), &format_specification(&spec))?;

    if let Some(groups_path) = &opts.groups {
        let text = fs::read_to_string(groups_path).map_err(|e| Error::io(groups_path, e))?;
        let groups = parse_groups(&text, &groups_path.display().to_string())?;
        let (names, matrix) = group_heatmap(&spec.properties, &groups);
        write(&out_dir.join("heatmap.csv"), &format_heatmap(&names, &matrix))?;
    }

    Ok(PipelineSummary {
        traces: set.traces.len(),
        cases: cases.len(),
        properties: spec.properties.len(),
        no_flow_pairs: no_flow.len(),
    })
}
