//! Scenario files, instance generators and the experiment harness.

mod config;
mod experiment;
mod instances;
mod verify;

pub use config::{load_scenario, DemandSpec, ScenarioConfig};
pub use experiment::{
    run_cell, run_experiment, write_curve_csv, write_energy_csv, write_energy_rows, Axis, Budgets,
    ExperimentConfig, ExperimentReport, RunRecord, RunStatus, Solver,
};
pub use instances::{tiny_instance, tiny_single_cluster, TINY_DEMAND_UNIT_BITS};
pub use verify::{
    check_action_map, compare_csv_trees, final_delivered_ratio, verify, CriterionResult, HeldOut,
    VerifyConfig, VerifyReport,
};
