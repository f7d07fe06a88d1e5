//! Scenario construction, simulation runs, sweeps and metrics.

mod metrics;
mod scenario;
mod sweep;
mod world;

pub use metrics::{
    aggregate, delivery_probability, expected_duplication_goodput, jain_index, run_scenario,
    FlowCounters, FlowSummary, LinkSummary, RunResult, Stat,
};
pub use scenario::{
    Connectivity, FlowSpec, Scenario, Topology, FAIRNESS_FILE_SIZE, FAIRNESS_WINDOW, MB,
    THROUGHPUT_FILE_SIZE,
};
pub use sweep::{
    parse_int_ratio, parse_ratio, parse_recv_buffer, parse_values, sweep, Parameter, SweepPoint,
};
pub use world::{run_cap, run_once, FlowRun, LinkRun, RepResult, World};
