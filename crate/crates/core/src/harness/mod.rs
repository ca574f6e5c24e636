//! Scenario runner, randomized attack instances and benchmarks.

mod am1;
mod bench;
mod scenario;

pub use am1::{run_am1, Am1Outcome, PolicyKind};
pub use bench::{bench, bench_one, to_csv, BenchRow, CSV_HEADER};
pub use scenario::{
    audit_with_tamper, run_scenario, Check, Scenario, ScenarioError, ScenarioReport, Step, Tamper,
};
