//! Information-flow specification mining for small synchronous designs.
//!
//! The pipeline has four phases:
//!
//! 1. [`sim`] simulates the design once per source signal with a 1-bit
//!    taint shadow on every signal.
//! 2. [`flows`] scans the traces for taint arrival times, grouping
//!    source/sink pairs that flow at identical times into flow cases,
//!    and collects the pairs that never flow.
//! 3. [`miner`] mines predicates that hold on every two-cycle trace
//!    slice around a case's flow times.
//! 4. [`spec`] drops trace-set invariants from the mined conditions,
//!    merges cases into properties, and renders the specification.
//!
//! [`netlist`] defines the design IR and its text format, [`trace`] the
//! on-disk trace format, and [`pipeline`] the end-to-end driver.

pub mod error;
pub mod flows;
pub mod gen;
pub mod miner;
pub mod netlist;
pub mod pipeline;
pub mod sim;
pub mod spec;
pub mod trace;

pub use error::{Error, Result};
pub use flows::{find_flows, find_time_of_flow, group_flows, no_flow_set, FlowCase, NoFlowSet, TimeOfFlow};
pub use miner::{mine_all, mine_case, mine_conditions, mine_trace_invariants, Condition, ConditionSet, Predicate, RowPos};
pub use netlist::{parse_design, read_design, BinOp, Design, Expr, SignalDecl, SignalId, SignalKind};
pub use pipeline::{run_pipeline, PipelineOptions, PipelineSummary};
pub use sim::{gen_all_traces, simulate_tainted, Simulator, State, Testbench, Trace, TraceSet};
pub use spec::{emit_specification, group_heatmap, merge_properties, parse_specification, postprocess_conditions, Property, SpecProperty, Specification};
pub use trace::{read_trace, read_trace_set, slice, write_trace, write_trace_set, Slice};
