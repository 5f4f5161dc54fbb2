use std::collections::BTreeMap;
use std::io::Write;

use super::bound::hovering_bound;
use super::gls::{mmkp_gls, GlsConfig, MmkpInstance, MmkpSolution};
use super::{assemble, Solution};
use crate::env::{ChannelTrace, RateTable, Scenario};
use crate::error::Result;

/// Golden ratio used to place the probes.
pub const GOLDEN: f64 = 0.618;

/// How the upper probe is refreshed after the lower probe wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VUpdate {
    /// `v = ceil(y - 0.618 (y - x))`, the same expression as the lower
    /// probe.
    #[default]
    AsPrinted,
    /// `v = ceil(x + 0.618 (y - x))`.
    Mirrored,
}

/// Which probe becomes a cluster's hovering time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selection {
    /// The best-scoring probe evaluated during the search (the final upper
    /// probe on ties).
    #[default]
    BestProbe,
    /// The final upper probe.
    FinalUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GssConfig {
    pub gls: GlsConfig,
    pub v_update: VUpdate,
    pub selection: Selection,
}

/// Bracket and probes at the start of one search iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GssStep {
    pub x: f64,
    pub y: f64,
    pub u: usize,
    pub v: usize,
}

/// Outcome of a golden-section search over integer points.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenSearch {
    /// Upper probe when the search stopped.
    pub final_v: usize,
    /// Lowest-scoring point evaluated, `final_v` included (`final_v` wins
    /// ties, then the smaller point).
    pub best: usize,
    pub steps: Vec<GssStep>,
}

/// Most iterations a search over `[0, upper]` may take.
pub fn iteration_cap(upper: f64) -> usize {
    if upper <= 1.0 {
        0
    } else {
        (upper.ln() / (1.0 / GOLDEN).ln()).ceil() as usize + 1
    }
}

/// Golden-section search for a minimum of `score` over the integers of
/// `[0, upper]`, with probes rounded up. Ends when the bracket is at most
/// one wide or after [`iteration_cap`] iterations.
pub fn golden_search(
    upper: f64,
    v_update: VUpdate,
    mut score: impl FnMut(usize) -> f64,
) -> GoldenSearch {
    let top = upper.max(0.0).floor() as usize;
    let probe = |p: f64| (p.ceil().max(0.0) as usize).min(top);
    let (mut x, mut y) = (0.0f64, upper.max(0.0));
    let mut u = probe(y - GOLDEN * (y - x));
    let mut v = probe(x + GOLDEN * (y - x));
    let mut steps = Vec::new();
    let mut seen: Vec<(usize, f64)> = Vec::new();
    let mut eval = |t: usize| {
        let s = score(t);
        if !seen.iter().any(|&(p, _)| p == t) {
            seen.push((t, s));
        }
        s
    };
    let cap = iteration_cap(upper);
    while (y - x).abs() > 1.0 && steps.len() < cap {
        steps.push(GssStep { x, y, u, v });
        if eval(u) < eval(v) {
            y = v as f64;
            v = u;
            u = probe(y - GOLDEN * (y - x));
        } else {
            x = u as f64;
            u = v;
            v = match v_update {
                VUpdate::AsPrinted => probe(y - GOLDEN * (y - x)),
                VUpdate::Mirrored => probe(x + GOLDEN * (y - x)),
            };
        }
    }
    let final_score = eval(v);
    let best = seen
        .iter()
        .filter(|&&(_, s)| s < final_score)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map_or(v, |&(t, _)| t);
    GoldenSearch {
        final_v: v,
        best,
        steps,
    }
}

/// One evaluated hovering time.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord {
    pub t: usize,
    pub comm_j: f64,
    pub hover_j: f64,
    pub feasible: bool,
}

impl ProbeRecord {
    /// Probe objective; infeasible probes score `+inf`.
    pub fn score(&self) -> f64 {
        if self.feasible {
            self.comm_j + self.hover_j
        } else {
            f64::INFINITY
        }
    }
}

/// Search record of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTrace {
    pub cluster: usize,
    /// Frames elapsed before the cluster.
    pub tau: usize,
    /// Upper end of the final search range.
    pub upper: f64,
    /// Whether the range was widened to the remaining frame budget.
    pub escalated: bool,
    /// Whether the choice was reduced to leave frames for later clusters.
    pub shrunk: bool,
    pub steps: Vec<GssStep>,
    /// Probes in evaluation order.
    pub probes: Vec<ProbeRecord>,
    pub chosen: usize,
}

/// Result of [`gss_heu`].
#[derive(Debug, Clone)]
pub struct GssOutcome {
    pub solution: Solution,
    pub traces: Vec<ClusterTrace>,
}

struct ClusterProbes<'a> {
    scenario: &'a Scenario,
    rates: &'a RateTable,
    cluster: usize,
    tau: usize,
    gls: GlsConfig,
    solved: BTreeMap<usize, MmkpSolution>,
    records: Vec<ProbeRecord>,
}

impl ClusterProbes<'_> {
    fn score(&mut self, t: usize) -> f64 {
        if !self.solved.contains_key(&t) {
            let inst = MmkpInstance::new(self.scenario, self.rates, self.cluster, self.tau, t)
                .expect("probe within the frame budget");
            let sol = mmkp_gls(&inst, &self.gls);
            self.records.push(ProbeRecord {
                t,
                comm_j: sol.comm_j,
                hover_j: t as f64 * self.scenario.hover_energy_per_frame(),
                feasible: sol.feasible,
            });
            self.solved.insert(t, sol);
        }
        self.record(t).score()
    }

    fn record(&self, t: usize) -> &ProbeRecord {
        self.records.iter().find(|r| r.t == t).expect("probed")
    }

    fn any_feasible(&self) -> bool {
        self.records.iter().any(|r| r.feasible)
    }

    /// `preferred` if feasible, else the best feasible probe, else the
    /// probe with the least shortfall.
    fn pick(&self, preferred: usize) -> usize {
        if self.record(preferred).feasible {
            return preferred;
        }
        let feasible = self
            .records
            .iter()
            .filter(|r| r.feasible)
            .min_by(|a, b| a.score().total_cmp(&b.score()).then(a.t.cmp(&b.t)));
        match feasible {
            Some(r) => r.t,
            None => self
                .solved
                .iter()
                .min_by(|a, b| {
                    a.1.shortfall
                        .total_cmp(&b.1.shortfall)
                        .then(a.1.comm_j.total_cmp(&b.1.comm_j))
                })
                .map(|(&t, _)| t)
                .unwrap_or(preferred),
        }
    }
}

/// Golden-section search over each cluster's hovering frames with the
/// guided local search as inner solver.
///
/// Clusters are handled in order. Cluster `n` searches `[0, b]` where `b`
/// is its demand-proportional bound clipped to the frames left after
/// reserving one frame for each later cluster. If no probe is feasible,
/// the range is widened once to that remaining budget.
///
/// When a cluster still cannot meet its demands, the latest earlier
/// cluster that stays feasible with fewer frames is shrunk to its smallest
/// feasible hovering time and the clusters after it are searched again.
pub fn gss_heu(scenario: &Scenario, trace: &ChannelTrace, cfg: &GssConfig) -> Result<GssOutcome> {
    trace.check(scenario)?;
    let rates = RateTable::new(scenario, trace);
    let n_clusters = scenario.num_clusters();
    if scenario.total_demand() == 0.0 {
        let blocks = vec![None; n_clusters];
        let solution = assemble(scenario, &rates, &blocks);
        return Ok(GssOutcome {
            solution,
            traces: Vec::new(),
        });
    }
    let bounds = hovering_bound(scenario);
    let mut done: Vec<(ClusterTrace, ClusterProbes<'_>)> = Vec::with_capacity(n_clusters);
    search_from(scenario, &rates, cfg, &bounds, &mut done);
    while let Some(bad) = done
        .iter()
        .position(|(tr, p)| !p.record(tr.chosen).feasible)
    {
        let mut shrunk = false;
        for m in (0..bad).rev() {
            let (tr, probes) = &mut done[m];
            let smaller = (1..tr.chosen).find(|&t| probes.score(t).is_finite());
            if let Some(t) = smaller {
                log::debug!("cluster {m}: shrunk from {} to {t} frames", tr.chosen);
                tr.chosen = t;
                tr.shrunk = true;
                done.truncate(m + 1);
                search_from(scenario, &rates, cfg, &bounds, &mut done);
                shrunk = true;
                break;
            }
        }
        if !shrunk {
            log::warn!("cluster {bad}: demands cannot be met in the remaining frames");
            break;
        }
    }
    let mut blocks = Vec::with_capacity(n_clusters);
    let mut traces = Vec::with_capacity(n_clusters);
    for (tr, mut probes) in done {
        blocks.push(probes.solved.remove(&tr.chosen));
        traces.push(ClusterTrace {
            probes: probes.records,
            ..tr
        });
    }
    Ok(GssOutcome {
        solution: assemble(scenario, &rates, &blocks),
        traces,
    })
}

/// Search the clusters after the ones in `done`.
fn search_from<'a>(
    scenario: &'a Scenario,
    rates: &'a RateTable,
    cfg: &GssConfig,
    bounds: &[f64],
    done: &mut Vec<(ClusterTrace, ClusterProbes<'a>)>,
) {
    let n_clusters = scenario.num_clusters();
    let mut tau: usize = done.iter().map(|(tr, _)| tr.chosen).sum();
    for n in done.len()..n_clusters {
        let budget = scenario
            .max_frames()
            .saturating_sub(tau + (n_clusters - n - 1));
        let mut probes = ClusterProbes {
            scenario,
            rates,
            cluster: n,
            tau,
            gls: cfg.gls,
            solved: BTreeMap::new(),
            records: Vec::new(),
        };
        let mut upper = bounds[n].min(budget as f64);
        let mut search = golden_search(upper, cfg.v_update, |t| probes.score(t));
        let mut escalated = false;
        if !probes.any_feasible() && (budget as f64) > upper {
            escalated = true;
            upper = budget as f64;
            let mut more = golden_search(upper, cfg.v_update, |t| probes.score(t));
            more.steps.splice(0..0, search.steps);
            search = more;
        }
        let chosen = probes.pick(match cfg.selection {
            Selection::BestProbe => search.best,
            Selection::FinalUpper => search.final_v,
        });
        let trace = ClusterTrace {
            cluster: n,
            tau,
            upper,
            escalated,
            shrunk: false,
            steps: search.steps,
            probes: Vec::new(),
            chosen,
        };
        tau += chosen;
        done.push((trace, probes));
    }
}

/// Write the probes of every cluster as CSV.
pub fn write_search_traces<W: Write>(traces: &[ClusterTrace], mut w: W) -> Result<()> {
    writeln!(w, "cluster,order,t,comm_j,hover_j,total_j,feasible,chosen")?;
    for tr in traces {
        for (i, p) in tr.probes.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{:.8e},{:.8e},{:.8e},{},{}",
                tr.cluster,
                i,
                p.t,
                p.comm_j,
                p.hover_j,
                p.comm_j + p.hover_j,
                p.feasible,
                p.t == tr.chosen
            )?;
        }
    }
    Ok(())
}
