use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use super::config::ScenarioConfig;
use crate::agent::{train, Agent, EpisodeStats, Hyperparams, RewardVariant};
use crate::env::{objective, ChannelTrace, EnergyBreakdown, Scenario, Schedule};
use crate::error::{Error, Result};
use crate::exact::{
    branch_and_bound, brute_force, linearize, BnbStatus, Budget, DEFAULT_LEAF_CAP,
    DEFAULT_VARIABLE_BUDGET,
};
use crate::heur::{greedy_baseline, gss_heu, GssConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Solver {
    Exact,
    BruteForce,
    GssHeu,
    Greedy,
    Acdsos,
    AcdsosNoRestrict,
    AcdsosDetPolicy,
    AcdsosInverseEnergy,
    AcdsosNegativeEnergy,
}

impl Solver {
    pub const ALL: [Solver; 9] = [
        Solver::Exact,
        Solver::BruteForce,
        Solver::GssHeu,
        Solver::Greedy,
        Solver::Acdsos,
        Solver::AcdsosNoRestrict,
        Solver::AcdsosDetPolicy,
        Solver::AcdsosInverseEnergy,
        Solver::AcdsosNegativeEnergy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Exact => "exact",
            Solver::BruteForce => "bruteforce",
            Solver::GssHeu => "gss-heu",
            Solver::Greedy => "greedy",
            Solver::Acdsos => "acdsos",
            Solver::AcdsosNoRestrict => "acdsos-norestrict",
            Solver::AcdsosDetPolicy => "acdsos-detpolicy",
            Solver::AcdsosInverseEnergy => "acdsos-inverse-energy",
            Solver::AcdsosNegativeEnergy => "acdsos-negative-energy",
        }
    }

    pub fn is_learning(self) -> bool {
        self.agent_settings(&Hyperparams::default()).is_some()
    }

    /// Agent settings of a learning solver derived from `base`.
    pub fn agent_settings(self, base: &Hyperparams) -> Option<Hyperparams> {
        let mut h = base.clone();
        match self {
            Solver::Acdsos => {}
            Solver::AcdsosNoRestrict => h.restrict = false,
            Solver::AcdsosDetPolicy => h.deterministic = true,
            Solver::AcdsosInverseEnergy => h.reward = RewardVariant::InverseEnergy,
            Solver::AcdsosNegativeEnergy => h.reward = RewardVariant::NegativeEnergy,
            _ => return None,
        }
        Some(h)
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Solver::ALL.iter().map(|v| v.name()).collect();
                Error::config(
                    "solver",
                    format!("unknown solver `{s}` (known: {})", known.join(", ")),
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    K,
    TMax,
    Epsilon,
    AlphaA,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::K => "K",
            Axis::TMax => "T_max",
            Axis::Epsilon => "epsilon",
            Axis::AlphaA => "alpha_a",
        }
    }

    fn is_integral(self) -> bool {
        matches!(self, Axis::K | Axis::TMax)
    }

    /// Axis value as written to CSV.
    pub fn format_value(self, v: f64) -> String {
        if self.is_integral() {
            format!("{}", v as u64)
        } else {
            format!("{v:.8e}")
        }
    }

    /// Scenario and agent settings at axis value `v`.
    pub fn apply(self, cfg: &ScenarioConfig, v: f64) -> Result<(Scenario, Hyperparams)> {
        let mut hyper = cfg.agent.clone();
        let scenario = match self {
            Axis::K => cfg.with_users(v as usize)?,
            Axis::TMax => cfg.scenario.with_max_frames(v as usize)?,
            Axis::Epsilon => {
                hyper.epsilon = v;
                cfg.scenario.clone()
            }
            Axis::AlphaA => {
                hyper.alpha_actor = v;
                cfg.scenario.clone()
            }
        };
        hyper.validate()?;
        Ok((scenario, hyper))
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(Axis::K),
            "T_max" | "t_max" | "tmax" => Ok(Axis::TMax),
            "epsilon" => Ok(Axis::Epsilon),
            "alpha_a" => Ok(Axis::AlphaA),
            _ => Err(Error::config(
                "axis",
                format!("unknown axis `{s}` (known: K, T_max, epsilon, alpha_a)"),
            )),
        }
    }
}

/// Size and time limits for the exact solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budgets {
    pub bnb: Budget,
    pub ilp_variables: usize,
    pub leaf_cap: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            bnb: Budget::default(),
            ilp_variables: DEFAULT_VARIABLE_BUDGET,
            leaf_cap: DEFAULT_LEAF_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub solvers: Vec<Solver>,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub budgets: Budgets,
    /// Record wall times; when off the column reads `NA` and the output is
    /// byte-reproducible.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return Err(Error::config("solvers", "need at least one solver"));
        }
        if self.values.is_empty() {
            return Err(Error::config("values", "need at least one axis value"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::config("seeds", "seeds must be distinct"));
        }
        for &v in &self.values {
            let ok = if self.axis.is_integral() {
                v >= 1.0 && v.fract() == 0.0
            } else {
                v.is_finite() && v > 0.0
            };
            if !ok {
                return Err(Error::config(
                    "values",
                    format!("invalid {} value {v}", self.axis),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Proven optimal or, for heuristics and agents, demands met.
    Ok,
    /// The schedule misses some demand, or no feasible schedule exists.
    Infeasible,
    /// A budget ran out; energies come from the incumbent if there is one.
    Budget,
    /// The solver refused the instance size.
    TooLarge,
    /// Training stopped on a non-finite value.
    Diverged,
    /// Unexpected solver error.
    Failed,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Infeasible => "infeasible",
            RunStatus::Budget => "budget",
            RunStatus::TooLarge => "too-large",
            RunStatus::Diverged => "diverged",
            RunStatus::Failed => "failed",
        }
    }
}

/// One (solver, axis value, seed) cell.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub solver: Solver,
    pub value: f64,
    pub seed: u64,
    pub status: RunStatus,
    /// Energies recomputed from the schedule; `None` without a schedule.
    pub energy: Option<EnergyBreakdown>,
    pub wall_ms: f64,
    pub curve: Vec<EpisodeStats>,
    /// Trained agent of a learning run.
    pub agent: Option<Agent>,
    pub message: Option<String>,
}

impl RunRecord {
    /// A record with status `ok`, no energies and no curve.
    pub fn empty(solver: Solver, value: f64, seed: u64) -> Self {
        Self {
            solver,
            value,
            seed,
            status: RunStatus::Ok,
            energy: None,
            wall_ms: 0.0,
            curve: Vec::new(),
            agent: None,
            message: None,
        }
    }

    fn with_schedule(
        mut self,
        scenario: &Scenario,
        trace: &ChannelTrace,
        schedule: &Schedule,
    ) -> Self {
        let e = objective(scenario, schedule, trace);
        if self.status == RunStatus::Ok && !e.feasible {
            self.status = RunStatus::Infeasible;
        }
        self.energy = Some(e);
        self
    }

    fn failed(mut self, err: Error) -> Self {
        self.status = match err {
            Error::TooLarge { .. } => RunStatus::TooLarge,
            _ => RunStatus::Failed,
        };
        self.message = Some(err.to_string());
        self
    }
}

/// Solve one instance with one solver. Offline solvers see the frozen
/// trace of `seed`; learning solvers train on their own episodes (seeded
/// by `seed`) and are evaluated greedily on that trace. The wall time
/// covers the solve, or for agents the evaluation rollout only.
pub fn run_cell(
    scenario: &Scenario,
    hyper: &Hyperparams,
    solver: Solver,
    value: f64,
    seed: u64,
    budgets: &Budgets,
) -> RunRecord {
    let rec = RunRecord::empty(solver, value, seed);
    let trace = ChannelTrace::generate(scenario, seed);
    let start = Instant::now();
    let elapsed = |start: Instant| start.elapsed().as_secs_f64() * 1e3;
    match solver {
        Solver::Exact => {
            let ilp = match linearize(scenario, &trace, budgets.ilp_variables) {
                Ok(ilp) => ilp,
                Err(e) => return rec.failed(e),
            };
            let start = Instant::now();
            let report = match branch_and_bound(&ilp, budgets.bnb) {
                Ok(r) => r,
                Err(e) => return rec.failed(e),
            };
            let mut rec = RunRecord {
                wall_ms: elapsed(start),
                status: match report.status {
                    BnbStatus::Optimal => RunStatus::Ok,
                    BnbStatus::Infeasible => RunStatus::Infeasible,
                    BnbStatus::Feasible | BnbStatus::Unknown => RunStatus::Budget,
                },
                ..rec
            };
            if let Some(s) = &report.schedule {
                rec = rec.with_schedule(scenario, &trace, s);
            }
            rec
        }
        Solver::BruteForce => match brute_force(scenario, &trace, budgets.leaf_cap) {
            Ok(r) => {
                let rec = RunRecord {
                    wall_ms: elapsed(start),
                    ..rec
                };
                match &r.schedule {
                    Some(s) => rec.with_schedule(scenario, &trace, s),
                    None => RunRecord {
                        status: RunStatus::Infeasible,
                        ..rec
                    },
                }
            }
            Err(e) => rec.failed(e),
        },
        Solver::GssHeu => match gss_heu(scenario, &trace, &GssConfig::default()) {
            Ok(out) => RunRecord {
                wall_ms: elapsed(start),
                ..rec
            }
            .with_schedule(scenario, &trace, &out.solution.schedule),
            Err(e) => rec.failed(e),
        },
        Solver::Greedy => match greedy_baseline(scenario, &trace) {
            Ok(sol) => RunRecord {
                wall_ms: elapsed(start),
                ..rec
            }
            .with_schedule(scenario, &trace, &sol.schedule),
            Err(e) => rec.failed(e),
        },
        _ => {
            let hyper = solver.agent_settings(hyper).expect("learning solver");
            let report = match train(scenario, &hyper, seed) {
                Ok(r) => r,
                Err(e) => return rec.failed(e),
            };
            let start = Instant::now();
            let plans = match report.agent.greedy_rollout(scenario, seed) {
                Ok((plans, _)) => plans,
                Err(e) => return rec.failed(e),
            };
            let wall_ms = elapsed(start);
            let status = if report.diverged.is_some() {
                RunStatus::Diverged
            } else {
                RunStatus::Ok
            };
            RunRecord {
                wall_ms,
                status,
                curve: report.curve,
                agent: Some(report.agent),
                message: report.diverged,
                ..rec
            }
            .with_schedule(scenario, &trace, &Schedule::from_plans(scenario, &plans))
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub records: Vec<RunRecord>,
    pub energy_csv: PathBuf,
    pub curve_csv: Option<PathBuf>,
}

impl ExperimentReport {
    /// Any run that failed unexpectedly (size refusals and budget stops do
    /// not count).
    pub fn hard_failures(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.status == RunStatus::Failed)
            .count()
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.8e}")
}

/// Energy table: one row per (solver, axis value, seed) in that order.
pub fn write_energy_csv<W: Write>(
    w: W,
    axis: Axis,
    records: &[RunRecord],
    timing: bool,
) -> Result<()> {
    write_energy_rows(w, axis.name(), |v| axis.format_value(v), records, timing)
}

/// Energy table with a custom label and format for the value column.
pub fn write_energy_rows<W: Write>(
    mut w: W,
    label: &str,
    format_value: impl Fn(f64) -> String,
    records: &[RunRecord],
    timing: bool,
) -> Result<()> {
    writeln!(
        w,
        "solver,{label},seed,status,total_J,comm_J,hover_J,delivered_ratio,wall_ms"
    )?;
    for r in records {
        let (total, comm, hover, ratio) = match &r.energy {
            Some(e) => (
                fmt_f(e.total_j),
                fmt_f(e.comm_j),
                fmt_f(e.hover_j),
                fmt_f(e.delivered_ratio()),
            ),
            None => ("NA".into(), "NA".into(), "NA".into(), "NA".into()),
        };
        let wall = if timing {
            fmt_f(r.wall_ms)
        } else {
            "NA".into()
        };
        writeln!(
            w,
            "{},{},{},{},{total},{comm},{hover},{ratio},{wall}",
            r.solver,
            format_value(r.value),
            r.seed,
            r.status.name()
        )?;
    }
    Ok(())
}

/// Per-episode training curves of the learning runs.
pub fn write_curve_csv<W: Write>(mut w: W, axis: Axis, records: &[RunRecord]) -> Result<()> {
    writeln!(
        w,
        "solver,{},seed,episode,reward,energy_J,delivered_ratio",
        axis.name()
    )?;
    for r in records {
        for e in &r.curve {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.solver,
                axis.format_value(r.value),
                r.seed,
                e.episode,
                fmt_f(e.reward),
                fmt_f(e.energy_j),
                fmt_f(e.delivered_ratio)
            )?;
        }
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Run every (solver, axis value, seed) cell and write
/// `energy_vs_<axis>.csv`, plus `learning_curve.csv` when any learning
/// solver is requested.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let mut settings = Vec::with_capacity(cfg.values.len());
    for &v in &cfg.values {
        settings.push(cfg.axis.apply(&cfg.scenario, v)?);
    }
    let mut records = Vec::new();
    for &solver in &cfg.solvers {
        for (&v, (scenario, hyper)) in cfg.values.iter().zip(&settings) {
            for &seed in &cfg.seeds {
                let rec = run_cell(scenario, hyper, solver, v, seed, &cfg.budgets);
                log::info!(
                    "{solver} {}={} seed {seed}: {} total {}",
                    cfg.axis,
                    cfg.axis.format_value(v),
                    rec.status.name(),
                    rec.energy
                        .as_ref()
                        .map_or("NA".into(), |e| fmt_f(e.total_j))
                );
                if let Some(msg) = &rec.message {
                    log::warn!("{solver} seed {seed}: {msg}");
                }
                records.push(rec);
            }
        }
    }
    let energy_csv = cfg
        .out_dir
        .join(format!("energy_vs_{}.csv", cfg.axis.name()));
    write_file(&energy_csv, |w| {
        write_energy_csv(w, cfg.axis, &records, cfg.timing)
    })?;
    let curve_csv = if cfg.solvers.iter().any(|s| s.is_learning()) {
        let path = cfg.out_dir.join("learning_curve.csv");
        write_file(&path, |w| write_curve_csv(w, cfg.axis, &records))?;
        Some(path)
    } else {
        None
    };
    Ok(ExperimentReport {
        records,
        energy_csv,
        curve_csv,
    })
}
