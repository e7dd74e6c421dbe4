//! `flowspec` command line interface.
//!
//! Subcommands mirror the pipeline phases so intermediate artifacts
//! can be produced, inspected, and consumed independently; `run` chains
//! everything. Exit codes: 0 success, 1 bad input, 2 internal
//! invariant violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use flowspec_core::flows::{find_flows, format_flow_cases, format_no_flows, parse_flow_cases};
use flowspec_core::gen_all_traces;
use flowspec_core::miner::{format_conditions, mine_all, mine_trace_invariants, parse_conditions};
use flowspec_core::netlist::read_design;
use flowspec_core::pipeline::{
    check_flow_partition, check_no_invariants_emitted, postprocess_all, run_pipeline,
    PipelineOptions,
};
use flowspec_core::spec::{
    emit_specification, format_heatmap, group_heatmap, merge_properties, parse_groups,
    parse_specification,
};
use flowspec_core::trace::{read_testbench, read_trace_set, write_trace_set};

#[derive(Parser)]
#[command(name = "flowspec", version, about = "Mine information-flow specifications from tainted simulation traces")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the design once per source and write tainted traces
    GenTraces {
        /// Design file
        #[arg(long)]
        design: PathBuf,
        /// Testbench CSV driving every input
        #[arg(long)]
        testbench: PathBuf,
        /// Directory for per-source trace files
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated source signals; all signals when omitted
        #[arg(long, value_delimiter = ',')]
        sources: Option<Vec<String>>,
    },
    /// Group taint arrivals into flow cases and the no-flow set
    FindFlows {
        /// Directory of trace files
        #[arg(long)]
        traces: PathBuf,
        /// Flow-case output file
        #[arg(long)]
        out: PathBuf,
        /// No-flow output file; defaults to no_flow.txt beside OUT
        #[arg(long)]
        no_flow_out: Option<PathBuf>,
    },
    /// Mine conditions over each flow case's slices
    Mine {
        /// Design file (for signal widths)
        #[arg(long)]
        design: PathBuf,
        /// Directory of trace files
        #[arg(long)]
        traces: PathBuf,
        /// Flow-case file from find-flows
        #[arg(long)]
        flows: PathBuf,
        /// Conditions output file
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop trace-set invariants, merge cases, and emit spec.txt
    Post {
        /// Design file (for signal widths)
        #[arg(long)]
        design: PathBuf,
        /// Conditions file from mine
        #[arg(long)]
        conditions: PathBuf,
        /// Directory of trace files
        #[arg(long)]
        traces: PathBuf,
        /// Specification output file
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a group-to-group heatmap from a specification
    Report {
        /// Specification file
        #[arg(long)]
        spec: PathBuf,
        /// signal,group CSV
        #[arg(long)]
        groups: PathBuf,
        /// Heatmap CSV output file
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole pipeline
    Run {
        /// Design file
        #[arg(long)]
        design: PathBuf,
        /// Testbench CSV driving every input
        #[arg(long)]
        testbench: PathBuf,
        /// Output directory for all artifacts
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated source signals; all signals when omitted
        #[arg(long, value_delimiter = ',')]
        sources: Option<Vec<String>>,
        /// signal,group CSV; enables heatmap.csv
        #[arg(long)]
        groups: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let internal = err
                .downcast_ref::<flowspec_core::Error>()
                .is_some_and(|e| e.is_internal());
            ExitCode::from(if internal { 2 } else { 1 })
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenTraces {
            design,
            testbench,
            out,
            sources,
        } => {
            let d = read_design(&design)?;
            let tb = read_testbench(&testbench, &d)?;
            let set = gen_all_traces(&d, &tb, sources.as_deref())?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_trace_set(&set, &out)?;
            println!("wrote {} traces to {}", set.traces.len(), out.display());
        }
        Cmd::FindFlows {
            traces,
            out,
            no_flow_out,
        } => {
            let set = read_trace_set(&traces)?;
            let (tuples, cases, no_flow) = find_flows(&set);
            check_flow_partition(&set, &tuples, &cases, &no_flow)?;
            write(&out, &format_flow_cases(&cases))?;
            let nf_path = no_flow_out.unwrap_or_else(|| out.with_file_name("no_flow.txt"));
            write(&nf_path, &format_no_flows(&no_flow))?;
            println!("{} flow cases, {} no-flow pairs", cases.len(), no_flow.len());
        }
        Cmd::Mine {
            design,
            traces,
            flows,
            out,
        } => {
            let d = read_design(&design)?;
            let set = read_trace_set(&traces)?;
            let provided = parse_flow_cases(&read(&flows)?, &flows.display().to_string())?;
            let (_, cases, _) = find_flows(&set);
            if cases != provided {
                bail!(
                    "flow cases in {} do not match the traces in {}",
                    flows.display(),
                    traces.display()
                );
            }
            let mined = mine_all(&d, &set, &cases)?;
            write(&out, &format_conditions(&cases, &mined))?;
            let total: usize = mined.iter().map(|cs| cs.conditions.len()).sum();
            println!("mined {} conditions over {} cases", total, cases.len());
        }
        Cmd::Post {
            design,
            conditions,
            traces,
            out,
        } => {
            let d = read_design(&design)?;
            let set = read_trace_set(&traces)?;
            let provided =
                parse_conditions(&read(&conditions)?, &conditions.display().to_string())?;
            let (_, cases, no_flow) = find_flows(&set);
            let mined = mine_all(&d, &set, &cases)?;
            let recomputed: Vec<_> = cases.iter().cloned().zip(mined.iter().cloned()).collect();
            if recomputed != provided {
                bail!(
                    "conditions in {} do not match the traces in {}",
                    conditions.display(),
                    traces.display()
                );
            }
            let tis = mine_trace_invariants(&d, &set)?;
            let processed = postprocess_all(&d, &mined, &tis)?;
            let props = merge_properties(&cases, &processed);
            check_no_invariants_emitted(&props, &tis)?;
            write(&out, &emit_specification(&d, &props, &no_flow)?)?;
            println!("{} properties, {} no-flow pairs", props.len(), no_flow.len());
        }
        Cmd::Report { spec, groups, out } => {
            let parsed = parse_specification(&read(&spec)?, &spec.display().to_string())?;
            let map = parse_groups(&read(&groups)?, &groups.display().to_string())?;
            let (names, matrix) = group_heatmap(&parsed.properties, &map);
            write(&out, &format_heatmap(&names, &matrix))?;
            println!("heatmap over {} groups", names.len());
        }
        Cmd::Run {
            design,
            testbench,
            out,
            sources,
            groups,
        } => {
            let d = read_design(&design)?;
            let tb = read_testbench(&testbench, &d)?;
            let opts = PipelineOptions { sources, groups };
            let summary = run_pipeline(&d, &tb, &out, &opts)?;
            println!(
                "{} traces, {} cases, {} properties, {} no-flow pairs",
                summary.traces, summary.cases, summary.properties, summary.no_flow_pairs
            );
        }
    }
    Ok(())
}
