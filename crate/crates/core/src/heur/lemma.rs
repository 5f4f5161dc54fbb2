use crate::env::{ChannelTrace, RateTable, Scenario};
use crate::error::Result;
use crate::exact::ClusterSearch;

/// Exact minimum communication energy of one cluster at one hovering time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaPoint {
    pub t: usize,
    /// `None` when the demands cannot be met in `t` frames.
    pub comm_j: Option<f64>,
}

/// Optimal communication energy of cluster `n` hovering frames
/// `tau..tau + t`, for each `t` in `ts`, by exhaustive search.
///
/// Fails when a search visits more than `leaf_cap` leaves.
pub fn lemma1_probe(
    scenario: &Scenario,
    trace: &ChannelTrace,
    n: usize,
    tau: usize,
    ts: impl IntoIterator<Item = usize>,
    leaf_cap: f64,
) -> Result<Vec<LemmaPoint>> {
    trace.check(scenario)?;
    let rates = RateTable::new(scenario, trace);
    let mut search = ClusterSearch::with_visit_cap(scenario, &rates, leaf_cap);
    ts.into_iter()
        .map(|t| {
            Ok(LemmaPoint {
                t,
                comm_j: search.solve(n, tau, t)?.map(|o| o.comm_j),
            })
        })
        .collect()
}
