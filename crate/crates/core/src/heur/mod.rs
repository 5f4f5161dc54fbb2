//! Heuristic solvers: golden-section search over hovering frames with a
//! guided-local-search inner solver, a channel-greedy baseline, and an
//! exact probe of the optimal communication energy as a function of the
//! hovering time.
//!
//! The golden-section search is exact only for unimodal energy curves; on
//! multimodal curves it may stop at a local minimum.

mod bound;
mod gls;
mod greedy;
mod gss;
mod lemma;

pub use bound::hovering_bound;
pub use gls::{mmkp_gls, GlsConfig, GlsState, MmkpInstance, MmkpSolution, Ranking};
pub use greedy::greedy_baseline;
pub use gss::{
    golden_search, gss_heu, iteration_cap, write_search_traces, ClusterTrace, GoldenSearch,
    GssConfig, GssOutcome, GssStep, ProbeRecord, Selection, VUpdate, GOLDEN,
};
pub use lemma::{lemma1_probe, LemmaPoint};

use crate::env::{objective_with_rates, EnergyBreakdown, FramePlan, RateTable, Scenario, Schedule};

/// A schedule with its recomputed energy.
#[derive(Debug, Clone)]
pub struct Solution {
    pub schedule: Schedule,
    pub energy: EnergyBreakdown,
    pub hover_frames: Vec<usize>,
}

/// Concatenate per-cluster blocks in cluster order and send the UAV to the
/// dock afterwards. `None` blocks hover zero frames.
fn assemble(scenario: &Scenario, rates: &RateTable, blocks: &[Option<MmkpSolution>]) -> Solution {
    let mut plans = Vec::new();
    let mut hover_frames = Vec::with_capacity(blocks.len());
    for (n, block) in blocks.iter().enumerate() {
        let frames = block.as_ref().map_or(0, MmkpSolution::hover_frames);
        for f in 0..frames {
            let sol = block.as_ref().expect("nonempty block");
            plans.push(FramePlan {
                cluster: Some(n),
                slots: sol.frame(f),
            });
        }
        hover_frames.push(frames);
    }
    let schedule = Schedule::from_plans(scenario, &plans);
    let energy = objective_with_rates(scenario, &schedule, rates);
    Solution {
        schedule,
        energy,
        hover_frames,
    }
}
