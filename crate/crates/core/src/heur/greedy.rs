use super::{assemble, MmkpSolution, Solution};
use crate::env::{ChannelTrace, RateTable, Scenario, DEMAND_TOL};
use crate::error::Result;
use crate::group;

/// Energy-blind baseline that schedules by channel quality.
///
/// Clusters are served in order. In every slot the group of still
/// unsatisfied users with the largest sum of diagonal effective gains is
/// scheduled (lowest mask on ties). The UAV leaves a cluster once its
/// demands are met, or when only one frame per later cluster is left.
pub fn greedy_baseline(scenario: &Scenario, trace: &ChannelTrace) -> Result<Solution> {
    trace.check(scenario)?;
    let rates = RateTable::new(scenario, trace);
    let n_clusters = scenario.num_clusters();
    let slots = scenario.slots();
    let mut blocks: Vec<Option<MmkpSolution>> = Vec::with_capacity(n_clusters);
    let mut tau = 0usize;
    for n in 0..n_clusters {
        let demands = &scenario.demands()[n];
        let mut residual = demands.clone();
        let unsatisfied = |residual: &[f64]| -> u32 {
            residual
                .iter()
                .zip(demands)
                .enumerate()
                .filter(|(_, (&r, &q))| r > q * DEMAND_TOL)
                .fold(0, |m, (k, _)| m | (1 << k))
        };
        let budget = scenario
            .max_frames()
            .saturating_sub(tau + (n_clusters - n - 1));
        let mut assignment = Vec::new();
        let mut comm_j = 0.0;
        let mut t = 0;
        while t < budget && unsatisfied(&residual) != 0 {
            let table = trace.frame(tau + t);
            let rate = rates.get(n, tau + t);
            for _ in 0..slots {
                let open = unsatisfied(&residual);
                let pick = group::all(demands.len())
                    .filter(|&g| g & !open == 0)
                    .map(|g| {
                        let score: f64 = (0..group::size(g)).map(|p| table.beta(n, g, p, p)).sum();
                        (score, g)
                    })
                    .fold(None, |best: Option<(f64, u32)>, (s, g)| match best {
                        Some((b, _)) if b >= s => best,
                        _ => Some((s, g)),
                    });
                let c = pick.map_or(0, |(_, g)| g);
                if c != 0 {
                    comm_j += rate.energy(c);
                    for (r, d) in residual.iter_mut().zip(rate.data_row(c)) {
                        *r -= d;
                    }
                }
                assignment.push(c);
            }
            t += 1;
        }
        let delivered: Vec<f64> = demands.iter().zip(&residual).map(|(q, r)| q - r).collect();
        let feasible = unsatisfied(&residual) == 0;
        blocks.push(Some(MmkpSolution {
            assignment,
            slots,
            comm_j,
            delivered,
            shortfall: 0.0,
            feasible,
        }));
        tau += t;
    }
    Ok(assemble(scenario, &rates, &blocks))
}
