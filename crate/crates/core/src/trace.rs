//! Trace persistence and slicing.
//!
//! Trace file layout, one file per source:
//!
//! ```text
//! #source,a
//! cycle,a,a.t,b,b.t
//! 0,1,1,0,0
//! 1,0,1,1,1
//! ```
//!
//! Line 1 names the tainted source, line 2 interleaves value and taint
//! columns in declaration order, then one row per cycle with decimal
//! values and 0/1 taints. Files in this shape are accepted regardless
//! of who wrote them, so traces from third-party simulators can be
//! ingested.
//!
//! A slice is the pair of rows immediately prior to and concurrent
//! with a flow, with the taint columns dropped; mining never sees
//! tracking state.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::netlist::Design;
use crate::sim::{State, Testbench, Trace, TraceSet};

/// Two consecutive value rows around one flow time. `flow_time` is the
/// cycle of the second row; `prior` is the row for `flow_time - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slice {
    pub trace_source: String,
    pub flow_time: usize,
    pub prior: Vec<u64>,
    pub flow: Vec<u64>,
}

/// Render a trace in the on-disk format.
pub fn format_trace(trace: &Trace) -> String {
    let mut out = String::new();
    out.push_str(&format!("#source,{}\n", trace.source));
    out.push_str("cycle");
    for name in &trace.signal_order {
        out.push_str(&format!(",{name},{name}.t"));
    }
    out.push('\n');
    for (cycle, state) in trace.states.iter().enumerate() {
        out.push_str(&cycle.to_string());
        for (v, t) in state.values.iter().zip(&state.taints) {
            out.push_str(&format!(",{},{}", v, *t as u8));
        }
        out.push('\n');
    }
    out
}

pub fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    fs::write(path, format_trace(trace)).map_err(|e| Error::io(path, e))
}

/// Parse a trace file. `path` is used for error messages only.
pub fn parse_trace(text: &str, path: &str) -> Result<Trace> {
    let err = |row: usize, msg: String| Error::TraceFormat {
        path: path.to_string(),
        row,
        msg,
    };
    let mut lines = text.lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| err(1, "empty trace file".into()))?;
    let source = first
        .strip_prefix("#source,")
        .ok_or_else(|| err(1, "expected `#source,<name>` on line 1".into()))?
        .trim()
        .to_string();
    if source.is_empty() {
        return Err(err(1, "missing source name".into()));
    }

    let (_, header) = lines
        .next()
        .ok_or_else(|| err(2, "missing header row".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"cycle") {
        return Err(err(2, "header must start with `cycle`".into()));
    }
    if cols.len() < 3 || (cols.len() - 1) % 2 != 0 {
        return Err(err(2, "header must list `<sig>,<sig>.t` pairs".into()));
    }
    let mut signal_order = Vec::with_capacity((cols.len() - 1) / 2);
    for pair in cols[1..].chunks(2) {
        let name = pair[0];
        let taint_col = pair[1];
        if taint_col != format!("{name}.t") {
            return Err(err(
                2,
                format!("expected `{name}.t` after `{name}`, got `{taint_col}`"),
            ));
        }
        if signal_order.contains(&name.to_string()) {
            return Err(err(2, format!("duplicate column `{name}`")));
        }
        signal_order.push(name.to_string());
    }

    let mut states = Vec::new();
    for (line_idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row_no = line_idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(err(
                row_no,
                format!("expected {} fields, got {}", cols.len(), fields.len()),
            ));
        }
        let cycle: usize = fields[0]
            .parse()
            .map_err(|_| err(row_no, format!("bad cycle `{}`", fields[0])))?;
        if cycle != states.len() {
            return Err(err(
                row_no,
                format!("cycle column must count up from 0, got {cycle}"),
            ));
        }
        let mut values = Vec::with_capacity(signal_order.len());
        let mut taints = Vec::with_capacity(signal_order.len());
        for (k, pair) in fields[1..].chunks(2).enumerate() {
            let v: u64 = pair[0].parse().map_err(|_| {
                err(row_no, format!("bad value `{}` for `{}`", pair[0], signal_order[k]))
            })?;
            let t = match pair[1] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(err(
                        row_no,
                        format!("bad taint `{other}` for `{}`", signal_order[k]),
                    ))
                }
            };
            values.push(v);
            taints.push(t);
        }
        states.push(State { values, taints });
    }
    if states.is_empty() {
        return Err(err(3, "trace has no rows".into()));
    }
    if !signal_order.contains(&source) {
        return Err(err(1, format!("source `{source}` is not a trace column")));
    }
    Ok(Trace {
        source,
        signal_order,
        states,
    })
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text, &path.display().to_string())
}

/// Write one `<source>.csv` per trace into `dir`.
pub fn write_trace_set(set: &TraceSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for trace in &set.traces {
        write_trace(trace, &dir.join(format!("{}.csv", trace.source)))?;
    }
    Ok(())
}

/// Read every `*.csv` in `dir` as a trace. Traces are ordered by their
/// source's position in the shared signal order, which all files must
/// agree on.
pub fn read_trace_set(dir: &Path) -> Result<TraceSet> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(dir, e))?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::FileFormat {
            path: dir.display().to_string(),
            msg: "no trace files (*.csv) found".into(),
        });
    }
    let mut traces = Vec::with_capacity(paths.len());
    for p in &paths {
        traces.push(read_trace(p)?);
    }
    let signal_order = traces[0].signal_order.clone();
    for t in &traces[1..] {
        if t.signal_order != signal_order {
            return Err(Error::Inconsistent(format!(
                "trace for `{}` lists different signals than the others",
                t.source
            )));
        }
    }
    let mut seen = BTreeMap::new();
    for t in &traces {
        if seen.insert(t.source.clone(), ()).is_some() {
            return Err(Error::Inconsistent(format!(
                "two traces claim source `{}`",
                t.source
            )));
        }
    }
    traces.sort_by_key(|t| {
        signal_order
            .iter()
            .position(|s| *s == t.source)
            .unwrap_or(usize::MAX)
    });
    Ok(TraceSet {
        signal_order,
        traces,
    })
}

/// Cut two-cycle slices around the given flow times. Times must be at
/// least 1 (a flow at the initial state has no prior row to slice) and
/// within the trace.
pub fn slice(trace: &Trace, times: &[usize]) -> Result<Vec<Slice>> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t == 0 || t >= trace.cycles() {
            return Err(Error::Inconsistent(format!(
                "slice time {t} out of range for trace of {} cycles (times must be 1..={})",
                trace.cycles(),
                trace.cycles().saturating_sub(1)
            )));
        }
        out.push(Slice {
            trace_source: trace.source.clone(),
            flow_time: t,
            prior: trace.states[t - 1].values.clone(),
            flow: trace.states[t].values.clone(),
        });
    }
    Ok(out)
}

/// Parse a testbench CSV against a design: header `cycle,<inputs...>`
/// covering exactly the design's inputs, then one row per cycle.
pub fn parse_testbench(text: &str, design: &Design, path: &str) -> Result<Testbench> {
    let err = |row: usize, msg: String| Error::TraceFormat {
        path: path.to_string(),
        row,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty testbench file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"cycle") {
        return Err(err(1, "header must start with `cycle`".into()));
    }
    let mut inputs = Vec::with_capacity(cols.len() - 1);
    for name in &cols[1..] {
        let id = design
            .signal_id(name)
            .filter(|&id| design.decls[id].kind == crate::netlist::SignalKind::Input)
            .ok_or_else(|| err(1, format!("`{name}` is not an input of the design")))?;
        if inputs.contains(&id) {
            return Err(err(1, format!("duplicate column `{name}`")));
        }
        inputs.push(id);
    }
    let missing: Vec<&str> = design
        .inputs()
        .filter(|(id, _)| !inputs.contains(id))
        .map(|(_, d)| d.name.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(err(
            1,
            format!("testbench does not drive: {}", missing.join(", ")),
        ));
    }

    let mut rows = Vec::new();
    for (line_idx, line) in lines {
        let row_no = line_idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(err(
                row_no,
                format!("expected {} fields, got {}", cols.len(), fields.len()),
            ));
        }
        let cycle: usize = fields[0]
            .parse()
            .map_err(|_| err(row_no, format!("bad cycle `{}`", fields[0])))?;
        if cycle != rows.len() {
            return Err(err(
                row_no,
                format!("cycle column must count up from 0, got {cycle}"),
            ));
        }
        let mut row = Vec::with_capacity(inputs.len());
        for (k, f) in fields[1..].iter().enumerate() {
            let v: u64 = f
                .parse()
                .map_err(|_| err(row_no, format!("bad value `{f}`")))?;
            let width = design.decls[inputs[k]].width;
            if width < 64 && v >= (1u64 << width) {
                return Err(err(
                    row_no,
                    format!(
                        "value {v} does not fit width {width} of `{}`",
                        design.decls[inputs[k]].name
                    ),
                ));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(err(2, "testbench has no cycles".into()));
    }
    Ok(Testbench { inputs, rows })
}

pub fn read_testbench(path: &Path, design: &Design) -> Result<Testbench> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_testbench(&text, design, &path.display().to_string())
}
