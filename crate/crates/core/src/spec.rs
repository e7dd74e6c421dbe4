//! Phase 4: postprocess mined conditions and render the specification.
//!
//! Conditions whose predicate is a trace-set invariant say nothing
//! about the flow and are dropped, constant comparisons implied by a
//! same-position membership are pruned, and cases with identical
//! (time-set, condition-set) merge into one property. Rendering
//! flattens row positions, normalizes single-value memberships into
//! `0 ==` / `0 !=` groups, and is byte-stable; a reader for the same
//! format supports downstream reporting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::flows::{FlowCase, NoFlowSet};
use crate::miner::{parse_predicate, Condition, ConditionSet, Predicate};
use crate::netlist::Design;

/// A merged conditional-flow statement covering one or more cases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub number: usize,
    pub case_ids: Vec<usize>,
    pub times: Vec<usize>,
    pub sources: Vec<String>,
    pub sinks: Vec<String>,
    pub conditions: Vec<Condition>,
}

/// One rendered property block, as written to or read from the
/// specification text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecProperty {
    pub number: usize,
    pub case_ids: Vec<usize>,
    pub sources: Vec<String>,
    pub sinks: Vec<String>,
    pub zero_eq: Vec<String>,
    pub zero_neq: Vec<String>,
    pub others: Vec<Predicate>,
}

impl SpecProperty {
    pub fn has_conditions(&self) -> bool {
        !self.zero_eq.is_empty() || !self.zero_neq.is_empty() || !self.others.is_empty()
    }
}

/// The full parsed specification file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Specification {
    pub properties: Vec<SpecProperty>,
    pub no_flow: NoFlowSet,
}

/// Drop trace-set invariants (matched by predicate alone, ignoring
/// position), then prune constant comparisons implied by a membership
/// at the same position.
pub fn postprocess_conditions(
    design: &Design,
    conds: &[Condition],
    tis: &[Predicate],
) -> Result<Vec<Condition>> {
    let kept: Vec<Condition> = conds
        .iter()
        .filter(|c| !tis.contains(&c.pred))
        .cloned()
        .collect();
    let mut out = Vec::new();
    for c in &kept {
        let drop = match &c.pred {
            Predicate::EqConst { signal, value } if *value == 0 => kept.iter().any(|o| {
                o.pos == c.pos
                    && matches!(&o.pred, Predicate::Membership { signal: s, values }
                        if s == signal && values.as_slice() == [0])
            }),
            Predicate::NeqConst { signal, value } if *value == 0 => {
                let w = design.width_of(signal).ok_or_else(|| {
                    Error::Internal(format!("condition references unknown signal `{signal}`"))
                })?;
                w == 1
                    && kept.iter().any(|o| {
                        o.pos == c.pos
                            && matches!(&o.pred, Predicate::Membership { signal: s, values }
                                if s == signal && !values.contains(&0))
                    })
            }
            _ => false,
        };
        if !drop {
            out.push(c.clone());
        }
    }
    Ok(out)
}

/// Merge cases with identical (time-set, condition-set) into one
/// property. Sources and sinks are unions over the member pairs;
/// properties are numbered from 1 in order of their lowest case id.
pub fn merge_properties(cases: &[FlowCase], processed: &[ConditionSet]) -> Vec<Property> {
    let mut props: Vec<Property> = Vec::new();
    for (case, cs) in cases.iter().zip(processed) {
        let found = props
            .iter_mut()
            .find(|p| p.times == case.times && p.conditions == cs.conditions);
        match found {
            Some(p) => {
                p.case_ids.push(case.id);
                p.sources.extend(case.pairs.iter().map(|(s, _)| s.clone()));
                p.sinks.extend(case.pairs.iter().map(|(_, k)| k.clone()));
            }
            None => props.push(Property {
                number: 0,
                case_ids: vec![case.id],
                times: case.times.clone(),
                sources: case.pairs.iter().map(|(s, _)| s.clone()).collect(),
                sinks: case.pairs.iter().map(|(_, k)| k.clone()).collect(),
                conditions: cs.conditions.clone(),
            }),
        }
    }
    for (i, p) in props.iter_mut().enumerate() {
        p.number = i + 1;
        p.case_ids.sort_unstable();
        p.sources.sort();
        p.sources.dedup();
        p.sinks.sort();
        p.sinks.dedup();
    }
    props
}

/// Flatten a property's conditions into display form: positions are
/// dropped, `r in {0}` becomes a `0 ==` entry, a 1-bit `r in {1}`
/// becomes a `0 !=` entry, and duplicates collapse.
pub fn normalize_properties(design: &Design, props: &[Property]) -> Result<Vec<SpecProperty>> {
    let mut out = Vec::new();
    for p in props {
        let mut zero_eq: BTreeSet<String> = BTreeSet::new();
        let mut zero_neq: BTreeSet<String> = BTreeSet::new();
        let mut others: Vec<Predicate> = Vec::new();
        for c in &p.conditions {
            let norm = match &c.pred {
                Predicate::Membership { signal, values } if values.as_slice() == [0] => {
                    Predicate::EqConst {
                        signal: signal.clone(),
                        value: 0,
                    }
                }
                Predicate::Membership { signal, values } if values.as_slice() == [1] => {
                    let w = design.width_of(signal).ok_or_else(|| {
                        Error::Internal(format!("condition references unknown signal `{signal}`"))
                    })?;
                    if w == 1 {
                        Predicate::NeqConst {
                            signal: signal.clone(),
                            value: 0,
                        }
                    } else {
                        c.pred.clone()
                    }
                }
                _ => c.pred.clone(),
            };
            match norm {
                Predicate::EqConst { signal, value: 0 } => {
                    zero_eq.insert(signal);
                }
                Predicate::NeqConst { signal, value: 0 } => {
                    zero_neq.insert(signal);
                }
                other => {
                    if !others.contains(&other) {
                        others.push(other);
                    }
                }
            }
        }
        others.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        out.push(SpecProperty {
            number: p.number,
            case_ids: p.case_ids.clone(),
            sources: p.sources.clone(),
            sinks: p.sinks.clone(),
            zero_eq: zero_eq.into_iter().collect(),
            zero_neq: zero_neq.into_iter().collect(),
            others,
        });
    }
    Ok(out)
}

fn name_set(names: &[String]) -> String {
    format!("{{{}}}", names.join(", "))
}

fn parse_name_set(s: &str) -> Option<Vec<String>> {
    let inner = s.strip_prefix('{')?.strip_suffix('}')?;
    if inner.trim().is_empty() {
        return Some(Vec::new());
    }
    Some(inner.split(',').map(|n| n.trim().to_string()).collect())
}

/// Render a specification: one block per property separated by blank
/// lines, then the no-flow pairs after a final blank line.
pub fn format_specification(spec: &Specification) -> String {
    let mut blocks: Vec<String> = Vec::new();
    for p in &spec.properties {
        let ids: Vec<String> = p.case_ids.iter().map(|i| i.to_string()).collect();
        let mut b = String::new();
        writeln!(b, "case {}: {}", p.number, ids.join("_")).unwrap();
        writeln!(b, "_src_ in {}", name_set(&p.sources)).unwrap();
        writeln!(b, "=/=>").unwrap();
        writeln!(b, "_snk_ in {}", name_set(&p.sinks)).unwrap();
        if p.has_conditions() {
            writeln!(b, "unless").unwrap();
            if !p.zero_eq.is_empty() {
                writeln!(b, "0 == _r_ in {}", name_set(&p.zero_eq)).unwrap();
            }
            if !p.zero_neq.is_empty() {
                writeln!(b, "0 != _inv_ in {}", name_set(&p.zero_neq)).unwrap();
            }
            for pred in &p.others {
                writeln!(b, "{pred}").unwrap();
            }
        }
        blocks.push(b);
    }
    let mut out = blocks.join("\n");
    if !spec.no_flow.is_empty() {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&crate::flows::format_no_flows(&spec.no_flow));
    }
    out
}

/// Produce the final specification text from postprocessed properties.
pub fn emit_specification(
    design: &Design,
    props: &[Property],
    no_flow: &NoFlowSet,
) -> Result<String> {
    let properties = normalize_properties(design, props)?;
    Ok(format_specification(&Specification {
        properties,
        no_flow: no_flow.clone(),
    }))
}

/// Read a specification file back into its block structure.
pub fn parse_specification(text: &str, path: &str) -> Result<Specification> {
    let err = |ln: usize, msg: String| Error::FileFormat {
        path: path.to_string(),
        msg: format!("line {}: {msg}", ln + 1),
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut spec = Specification::default();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i].trim();
        if line.is_empty() {
            i += 1;
            continue;
        }
        if let Some(rest) = line.strip_prefix("case ") {
            let (num_str, ids_str) = rest
                .split_once(':')
                .ok_or_else(|| err(i, "expected `case <n>: <ids>`".into()))?;
            let number: usize = num_str
                .trim()
                .parse()
                .map_err(|_| err(i, "bad property number".into()))?;
            let case_ids = ids_str
                .trim()
                .split('_')
                .map(|s| s.parse::<usize>().ok())
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| err(i, "bad case id list".into()))?;
            let src_line = lines
                .get(i + 1)
                .ok_or_else(|| err(i + 1, "missing `_src_ in {...}`".into()))?
                .trim();
            let sources = src_line
                .strip_prefix("_src_ in ")
                .and_then(parse_name_set)
                .ok_or_else(|| err(i + 1, "missing `_src_ in {...}`".into()))?;
            if lines.get(i + 2).map(|l| l.trim()) != Some("=/=>") {
                return Err(err(i + 2, "missing `=/=>`".into()));
            }
            let snk_line = lines
                .get(i + 3)
                .ok_or_else(|| err(i + 3, "missing `_snk_ in {...}`".into()))?
                .trim();
            let sinks = snk_line
                .strip_prefix("_snk_ in ")
                .and_then(parse_name_set)
                .ok_or_else(|| err(i + 3, "missing `_snk_ in {...}`".into()))?;
            i += 4;
            let mut zero_eq = Vec::new();
            let mut zero_neq = Vec::new();
            let mut others = Vec::new();
            if i < lines.len() && lines[i].trim() == "unless" {
                i += 1;
                while i < lines.len() && !lines[i].trim().is_empty() {
                    let l = lines[i].trim();
                    if let Some(set) = l.strip_prefix("0 == _r_ in ").and_then(parse_name_set) {
                        zero_eq = set;
                    } else if let Some(set) =
                        l.strip_prefix("0 != _inv_ in ").and_then(parse_name_set)
                    {
                        zero_neq = set;
                    } else {
                        others.push(
                            parse_predicate(l)
                                .ok_or_else(|| err(i, format!("unrecognized condition `{l}`")))?,
                        );
                    }
                    i += 1;
                }
            }
            spec.properties.push(SpecProperty {
                number,
                case_ids,
                sources,
                sinks,
                zero_eq,
                zero_neq,
                others,
            });
        } else if let Some((s, k)) = line.split_once(" =/=> ") {
            spec.no_flow.push((s.trim().to_string(), k.trim().to_string()));
            i += 1;
        } else {
            return Err(err(i, format!("unrecognized line `{line}`")));
        }
    }
    Ok(spec)
}

/// Parse a `signal,group` CSV. A literal `signal,group` header and
/// `#` comments are skipped; a signal may only be mapped once.
pub fn parse_groups(text: &str, path: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if i == 0 && line == "signal,group" {
            continue;
        }
        let (sig, group) = line.split_once(',').ok_or_else(|| Error::FileFormat {
            path: path.to_string(),
            msg: format!("line {}: expected `signal,group`", i + 1),
        })?;
        let (sig, group) = (sig.trim().to_string(), group.trim().to_string());
        if sig.is_empty() || group.is_empty() {
            return Err(Error::FileFormat {
                path: path.to_string(),
                msg: format!("line {}: empty signal or group name", i + 1),
            });
        }
        if map.insert(sig.clone(), group).is_some() {
            return Err(Error::FileFormat {
                path: path.to_string(),
                msg: format!("line {}: signal `{sig}` mapped twice", i + 1),
            });
        }
    }
    Ok(map)
}

/// Group-to-group property counts. Cell (G1, G2) is the number of
/// properties with at least one source in G1 and sink in G2; a
/// property spanning several group pairs increments each touched cell
/// once. Unmapped signals fall into group `other`.
pub fn group_heatmap(
    props: &[SpecProperty],
    groups: &BTreeMap<String, String>,
) -> (Vec<String>, Vec<Vec<usize>>) {
    let other = "other".to_string();
    let group_of = |sig: &String| groups.get(sig).unwrap_or(&other);
    let mut names: BTreeSet<String> = groups.values().cloned().collect();
    for p in props {
        for s in p.sources.iter().chain(&p.sinks) {
            if !groups.contains_key(s) {
                names.insert(other.clone());
            }
        }
    }
    let names: Vec<String> = names.into_iter().collect();
    let idx: BTreeMap<&String, usize> = names.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let n = names.len();
    let mut matrix = vec![vec![0usize; n]; n];
    for p in props {
        let mut touched: BTreeSet<(usize, usize)> = BTreeSet::new();
        for s in &p.sources {
            for k in &p.sinks {
                touched.insert((idx[group_of(s)], idx[group_of(k)]));
            }
        }
        for (r, c) in touched {
            matrix[r][c] += 1;
        }
    }
    (names, matrix)
}

/// CSV rendering: `group` header row, then one row per source group.
pub fn format_heatmap(names: &[String], matrix: &[Vec<usize>]) -> String {
    let mut out = String::new();
    out.push_str("group");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (i, name) in names.iter().enumerate() {
        out.push_str(name);
        for v in &matrix[i] {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}
