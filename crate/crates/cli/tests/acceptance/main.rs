//! End-to-end acceptance checks. Each test prints a verdict line that
//! survives libtest's output capture so the run log shows one line per
//! criterion.

mod oracle;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use flowspec_core::gen::{chain_design, random_design, random_testbench};
use flowspec_core::{
    find_flows, gen_all_traces, mine_all, mine_trace_invariants, parse_specification,
    read_design, run_pipeline, Condition, Design, FlowCase, PipelineOptions, Predicate, RowPos,
    Slice, Testbench, TraceSet,
};

fn criterion(n: usize, name: &str, body: impl FnOnce()) {
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(body));
    let verdict = if result.is_ok() { "PASS" } else { "FAIL" };
    use std::io::Write as _;
    let mut out = std::io::stdout().lock();
    writeln!(out, "[acceptance] criterion {n} ({name}): {verdict}").unwrap();
    out.flush().ok();
    drop(out);
    if let Err(p) = result {
        std::panic::resume_unwind(p);
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn flowspec(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_flowspec"))
        .args(args)
        .output()
        .expect("spawn flowspec");
    assert!(
        out.status.success(),
        "flowspec {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn arg(p: &Path) -> String {
    p.to_str().unwrap().to_owned()
}

/// One corpus entry per seed: a random design and a random testbench
/// of 4 to 16 cycles.
fn corpus_entry(seed: u64) -> (Design, Testbench) {
    let design = random_design(seed);
    let cycles = 4 + ((seed as usize) * 7 + 3) % 13;
    let tb = random_testbench(&design, cycles, seed.wrapping_mul(0x9e3779b97f4a7c15) | 1);
    (design, tb)
}

const CORPUS_SEEDS: u64 = 210;

#[test]
fn criterion_1_gated_flow_recovery() {
    criterion(1, "gated flow recovery", || {
        let tb_text = fs::read_to_string(fixture("gated.tb.csv")).unwrap();
        assert!(tb_text.lines().count() - 1 >= 16, "testbench spans at least 16 cycles");

        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("out");
        let start = Instant::now();
        flowspec(&[
            "run",
            "--design",
            &arg(&fixture("gated.design")),
            "--testbench",
            &arg(&fixture("gated.tb.csv")),
            "--out",
            &arg(&out),
            "--groups",
            &arg(&fixture("gated.groups.csv")),
        ]);
        assert!(start.elapsed() < Duration::from_secs(5), "pipeline finishes under 5s");

        let spec_text = fs::read_to_string(out.join("spec.txt")).unwrap();
        assert_eq!(spec_text, fs::read_to_string(golden("gated.spec.txt")).unwrap());
        let heatmap = fs::read_to_string(out.join("heatmap.csv")).unwrap();
        assert_eq!(heatmap, fs::read_to_string(golden("gated.heatmap.csv")).unwrap());

        let spec = parse_specification(&spec_text, "spec.txt").unwrap();
        let a_to_b: Vec<_> = spec
            .properties
            .iter()
            .filter(|p| p.sources.contains(&"a".to_string()) && p.sinks.contains(&"b".to_string()))
            .collect();
        assert_eq!(a_to_b.len(), 1, "exactly one conditional property covers a -> b");
        assert_eq!(a_to_b[0].zero_neq, vec!["en".to_string(), "rstn".to_string()]);
        assert!(!spec.no_flow.contains(&("a".to_string(), "b".to_string())));
    });
}

#[test]
fn criterion_2_flow_oracle_agreement() {
    criterion(2, "flow oracle agreement", || {
        let mut designs = 0usize;
        let mut flowing_pairs = 0usize;
        for seed in 0..CORPUS_SEEDS {
            let (design, tb) = corpus_entry(seed);
            let set = gen_all_traces(&design, &tb, None).unwrap();
            let (_, cases, no_flow) = find_flows(&set);
            flowing_pairs += cases.iter().map(|c| c.pairs.len()).sum::<usize>();
            let names = design.list_signals();
            for src in &names {
                let ref_states = oracle::simulate(&design, &tb, src);
                for snk in &names {
                    if src == snk {
                        continue;
                    }
                    let pair = (src.clone(), snk.clone());
                    let holding: Vec<&FlowCase> =
                        cases.iter().filter(|c| c.pairs.contains(&pair)).collect();
                    let in_no_flow = no_flow.contains(&pair);
                    assert_eq!(
                        holding.len() + in_no_flow as usize,
                        1,
                        "seed {seed}: pair {src}->{snk} in exactly one record"
                    );
                    let expect = oracle::flow_times(&ref_states, snk);
                    if in_no_flow {
                        assert!(expect.is_empty(), "seed {seed}: {src}->{snk} no-flow but oracle saw {expect:?}");
                    } else {
                        assert_eq!(holding[0].times, expect, "seed {seed}: {src}->{snk} times");
                    }
                }
            }
            designs += 1;
        }
        assert!(designs >= 200);
        assert!(flowing_pairs > 500, "corpus exercises real flows, saw {flowing_pairs}");
    });
}

#[test]
fn criterion_3_non_interference() {
    criterion(3, "non-interference", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
        for seed in 0..CORPUS_SEEDS {
            let (design, tb) = corpus_entry(seed);
            let inputs: Vec<usize> = tb.inputs.clone();
            for (col, &src_id) in inputs.iter().enumerate() {
                let src = design.decls[src_id].name.clone();
                let width = design.decls[src_id].width;
                let base = flowspec_core::simulate_tainted(&design, &tb, &src).unwrap();

                let check = |perturbed: &Testbench, from_cycle: usize| {
                    let alt = flowspec_core::simulate_tainted(&design, perturbed, &src).unwrap();
                    for t in from_cycle..tb.cycles() {
                        for sig in 0..design.decls.len() {
                            if !base.taint(t, sig) {
                                assert_eq!(
                                    base.value(t, sig),
                                    alt.value(t, sig),
                                    "seed {seed}: untainted {}@{t} changed under {src} perturbation",
                                    design.decls[sig].name
                                );
                            }
                        }
                    }
                };

                // Exhaustive single-cycle perturbations.
                for c in 0..tb.cycles() {
                    let orig = tb.rows[c][col];
                    for alt_val in 0..(1u64 << width) {
                        if alt_val == orig {
                            continue;
                        }
                        let mut rows = tb.rows.clone();
                        rows[c][col] = alt_val;
                        check(&Testbench { inputs: tb.inputs.clone(), rows }, c);
                    }
                }
                // Random joint perturbations over every prefix length.
                for m in 0..tb.cycles() {
                    for _ in 0..2 {
                        let mut rows = tb.rows.clone();
                        let pivot = rng.gen_range(0..=m);
                        let orig = rows[pivot][col];
                        let mut v = rng.gen_range(0..(1u64 << width));
                        if v == orig {
                            v = (v + 1) % (1u64 << width);
                        }
                        rows[pivot][col] = v;
                        for c in 0..=m {
                            if c != pivot && rng.gen_bool(0.25) {
                                rows[c][col] = rng.gen_range(0..(1u64 << width));
                            }
                        }
                        check(&Testbench { inputs: tb.inputs.clone(), rows }, m);
                    }
                }
            }
        }
    });
}

/// Slices rebuilt straight from the trace states, bypassing the miner's
/// own slicing helpers.
fn raw_slices(set: &TraceSet, case: &FlowCase) -> Vec<Slice> {
    let mut sources: Vec<&String> = case.pairs.iter().map(|(s, _)| s).collect();
    sources.sort();
    sources.dedup();
    let mut out = Vec::new();
    for src in sources {
        let trace = set.traces.iter().find(|t| &t.source == src).unwrap();
        for &t in &case.times {
            if t == 0 {
                continue;
            }
            out.push(Slice {
                trace_source: src.clone(),
                flow_time: t,
                prior: trace.states[t - 1].values.clone(),
                flow: trace.states[t].values.clone(),
            });
        }
    }
    out
}

/// Predicate evaluation written from scratch for cross-checking.
fn raw_holds(cond: &Condition, order: &[String], s: &Slice) -> bool {
    let idx = |name: &str| order.iter().position(|n| n == name).unwrap();
    let row = match cond.pos {
        RowPos::Prior => &s.prior,
        RowPos::Flow | RowPos::Both => &s.flow,
    };
    match &cond.pred {
        Predicate::EqConst { signal, value } => row[idx(signal)] == *value,
        Predicate::NeqConst { signal, value } => row[idx(signal)] != *value,
        Predicate::Membership { signal, values } => values.contains(&row[idx(signal)]),
        Predicate::EqSig { a, b } => row[idx(a)] == row[idx(b)],
        Predicate::NeqSig { a, b } => row[idx(a)] != row[idx(b)],
        Predicate::PrevEq { signal } => s.prior[idx(signal)] == s.flow[idx(signal)],
    }
}

fn row_at(pos: RowPos, s: &Slice) -> &[u64] {
    match pos {
        RowPos::Prior => &s.prior,
        _ => &s.flow,
    }
}

/// Every template instance over the case's signals, paired with whether
/// the miner should emit it.
fn all_candidates(design: &Design, order: &[String], slices: &[Slice]) -> Vec<(Condition, bool)> {
    let width = |name: &str| design.width_of(name).unwrap();
    let mut out = Vec::new();
    for pos in [RowPos::Prior, RowPos::Flow] {
        for (i, name) in order.iter().enumerate() {
            let vals: Vec<u64> = slices.iter().map(|s| row_at(pos, s)[i]).collect();
            out.push((
                Condition { pos, pred: Predicate::EqConst { signal: name.clone(), value: 0 } },
                vals.iter().all(|&v| v == 0),
            ));
            out.push((
                Condition { pos, pred: Predicate::NeqConst { signal: name.clone(), value: 0 } },
                vals.iter().all(|&v| v != 0),
            ));
            let observed: BTreeSet<u64> = vals.iter().copied().collect();
            let emit = observed.len() <= 3;
            out.push((
                Condition {
                    pos,
                    pred: Predicate::Membership {
                        signal: name.clone(),
                        values: observed.into_iter().collect(),
                    },
                },
                emit,
            ));
        }
        for i in 0..order.len() {
            for j in i + 1..order.len() {
                if width(&order[i]) != width(&order[j]) {
                    continue;
                }
                let (a, b) = if order[i] <= order[j] {
                    (order[i].clone(), order[j].clone())
                } else {
                    (order[j].clone(), order[i].clone())
                };
                let all_eq = slices.iter().all(|s| row_at(pos, s)[i] == row_at(pos, s)[j]);
                let all_ne = slices.iter().all(|s| row_at(pos, s)[i] != row_at(pos, s)[j]);
                out.push((
                    Condition { pos, pred: Predicate::EqSig { a: a.clone(), b: b.clone() } },
                    all_eq,
                ));
                out.push((Condition { pos, pred: Predicate::NeqSig { a, b } }, all_ne));
            }
        }
    }
    for (i, name) in order.iter().enumerate() {
        out.push((
            Condition { pos: RowPos::Both, pred: Predicate::PrevEq { signal: name.clone() } },
            slices.iter().all(|s| s.prior[i] == s.flow[i]),
        ));
    }
    out
}

#[test]
fn criterion_4_miner_soundness_and_maximality() {
    criterion(4, "miner soundness and maximality", || {
        // Exhaustive check at fixture scale: the mined set must equal
        // the set of template instances that hold on every slice.
        let design = read_design(&fixture("gated.design")).unwrap();
        let tb = flowspec_core::trace::read_testbench(&fixture("gated.tb.csv"), &design).unwrap();
        let set = gen_all_traces(&design, &tb, None).unwrap();
        let (_, cases, _) = find_flows(&set);
        let mined = mine_all(&design, &set, &cases).unwrap();
        assert!(!cases.is_empty());
        for (case, cset) in cases.iter().zip(&mined) {
            let slices = raw_slices(&set, case);
            if slices.is_empty() {
                assert!(cset.conditions.is_empty());
                continue;
            }
            let candidates = all_candidates(&design, &set.signal_order, &slices);
            for (cond, should_emit) in &candidates {
                assert_eq!(
                    cset.conditions.contains(cond),
                    *should_emit,
                    "case {}: {:?}",
                    case.id,
                    cond
                );
            }
            for cond in &cset.conditions {
                assert!(
                    candidates.iter().any(|(c, _)| c == cond),
                    "case {}: emitted condition outside the template family: {:?}",
                    case.id,
                    cond
                );
                assert!(slices.iter().all(|s| raw_holds(cond, &set.signal_order, s)));
            }
        }

        // Replay soundness across part of the random corpus.
        for seed in 0..40 {
            let (design, tb) = corpus_entry(seed);
            let set = gen_all_traces(&design, &tb, None).unwrap();
            let (_, cases, _) = find_flows(&set);
            let mined = mine_all(&design, &set, &cases).unwrap();
            for (case, cset) in cases.iter().zip(&mined) {
                let slices = raw_slices(&set, case);
                if slices.is_empty() {
                    assert!(cset.conditions.is_empty());
                    continue;
                }
                for cond in &cset.conditions {
                    assert!(
                        slices.iter().all(|s| raw_holds(cond, &set.signal_order, s)),
                        "seed {seed} case {}: {:?} fails replay",
                        case.id,
                        cond
                    );
                }
            }
        }
    });
}

#[test]
fn criterion_5_trace_invariant_elimination() {
    criterion(5, "trace invariant elimination", || {
        let design = read_design(&fixture("gated.design")).unwrap();
        let tb = flowspec_core::trace::read_testbench(&fixture("gated.tb.csv"), &design).unwrap();
        let set = gen_all_traces(&design, &tb, None).unwrap();
        let (_, cases, _) = find_flows(&set);
        let mined = mine_all(&design, &set, &cases).unwrap();

        let clk_free_run = Predicate::Membership { signal: "clk".into(), values: vec![0, 1] };
        assert!(
            mined.iter().any(|cs| cs.conditions.iter().any(|c| c.pred == clk_free_run)),
            "clk in {{0,1}} survives mining"
        );
        assert!(mine_trace_invariants(&design, &set).unwrap().contains(&clk_free_run));

        let tmp = tempfile::tempdir().unwrap();
        run_pipeline(&design, &tb, tmp.path(), &PipelineOptions::default()).unwrap();
        let spec_text = fs::read_to_string(tmp.path().join("spec.txt")).unwrap();
        assert!(!spec_text.contains("clk in {0,1}"), "invariant absent from the final spec");
        let spec = parse_specification(&spec_text, "spec.txt").unwrap();
        for prop in &spec.properties {
            assert!(!prop.others.contains(&clk_free_run));
        }
    });
}

#[test]
fn criterion_6_determinism() {
    criterion(6, "determinism", || {
        let tmp = tempfile::tempdir().unwrap();
        let design = arg(&fixture("gated.design"));
        let tb = arg(&fixture("gated.tb.csv"));
        let groups = arg(&fixture("gated.groups.csv"));
        let runs = [
            (tmp.path().join("r1"), None),
            (tmp.path().join("r2"), None),
            (tmp.path().join("r3"), Some("b,clk,a,en,rstn")),
        ];
        for (dir, sources) in &runs {
            let mut args = vec![
                "run".to_string(),
                "--design".into(),
                design.clone(),
                "--testbench".into(),
                tb.clone(),
                "--out".into(),
                arg(dir),
                "--groups".into(),
                groups.clone(),
            ];
            if let Some(s) = sources {
                args.push("--sources".into());
                args.push((*s).into());
            }
            let argv: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
            flowspec(&argv);
        }
        let spec0 = fs::read(runs[0].0.join("spec.txt")).unwrap();
        let heat0 = fs::read(runs[0].0.join("heatmap.csv")).unwrap();
        for (dir, _) in &runs[1..] {
            assert_eq!(fs::read(dir.join("spec.txt")).unwrap(), spec0);
            assert_eq!(fs::read(dir.join("heatmap.csv")).unwrap(), heat0);
        }
    });
}

#[test]
fn criterion_7_format_fidelity() {
    criterion(7, "format fidelity", || {
        let design = read_design(&fixture("multi.design")).unwrap();
        let tb = flowspec_core::trace::read_testbench(&fixture("multi.tb.csv"), &design).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        run_pipeline(&design, &tb, tmp.path(), &PipelineOptions::default()).unwrap();
        let text = fs::read_to_string(tmp.path().join("spec.txt")).unwrap();

        let spec = parse_specification(&text, "spec.txt").unwrap();
        let rendered = flowspec_core::spec::format_specification(&spec);
        assert_eq!(rendered, text, "specification round-trips byte for byte");

        let multi = spec
            .properties
            .iter()
            .find(|p| p.sources == ["a", "b"] && p.sinks == ["c", "d"])
            .expect("merged multi-source multi-sink property");
        assert!(!multi.zero_eq.is_empty());
        assert!(!multi.zero_neq.is_empty());

        let block_start = format!("case {}: ", multi.number);
        let lines: Vec<&str> = text.lines().collect();
        let at = lines.iter().position(|l| l.starts_with(&block_start)).unwrap();
        assert_eq!(lines[at + 1], "_src_ in {a, b}");
        assert_eq!(lines[at + 2], "=/=>");
        assert_eq!(lines[at + 3], "_snk_ in {c, d}");
        assert_eq!(lines[at + 4], "unless");
        assert!(lines[at + 5].starts_with("0 == _r_ in {"));
        assert!(lines[at + 6].starts_with("0 != _inv_ in {"));
    });
}

#[test]
fn criterion_8_scale_sanity() {
    criterion(8, "scale sanity", || {
        let design = chain_design(49, 1); // 50 signals including the input
        assert_eq!(design.decls.len(), 50);
        let tb = random_testbench(&design, 500, 8);
        let tmp = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let summary = run_pipeline(&design, &tb, tmp.path(), &PipelineOptions::default()).unwrap();
        let elapsed = start.elapsed();
        assert_eq!(summary.traces, 50);
        assert!(elapsed < Duration::from_secs(60), "full pipeline took {elapsed:?}");

        // Per-source trace generation should grow about linearly with
        // the signal count: 4x the signals within 2x of 4x the time.
        let per_source = |n: usize| -> f64 {
            let d = chain_design(n - 1, 1);
            let stim = random_testbench(&d, 200, 9);
            let mut best = f64::INFINITY;
            for _ in 0..3 {
                let t0 = Instant::now();
                for decl in &d.decls {
                    flowspec_core::simulate_tainted(&d, &stim, &decl.name).unwrap();
                }
                let total = t0.elapsed().as_secs_f64();
                best = best.min(total / d.decls.len() as f64);
            }
            best
        };
        let small = per_source(12);
        let big = per_source(48);
        assert!(
            big < small * 8.0,
            "per-source time grew superlinearly: {small:.6}s -> {big:.6}s"
        );
    });
}
