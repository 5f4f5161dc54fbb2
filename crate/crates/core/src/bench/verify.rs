use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use super::experiment::{
    run_cell, run_experiment, write_energy_rows, Axis, Budgets, ExperimentConfig, RunRecord,
    RunStatus, Solver,
};
use super::instances::{tiny_instance, tiny_single_cluster};
use crate::agent::{check_loss_gradients, map_action, train, Agent};
use crate::env::{objective, ChannelTrace, Scenario, Schedule};
use crate::error::Result;
use crate::exact::{linearize, DEFAULT_LEAF_CAP};
use crate::heur::{greedy_baseline, gss_heu, lemma1_probe, GssConfig};

/// First channel seed of the held-out evaluation traces.
const EVAL_TRACE_BASE: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    /// The desk scenario used by the learning and timing criteria.
    pub scenario: ScenarioConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Training seeds per learning configuration.
    pub seeds: usize,
    pub tiny_instances: usize,
    pub lemma_instances: usize,
    /// Held-out traces per trained agent for the energy comparisons.
    pub eval_traces: usize,
    pub timing_runs: usize,
    pub timing_users: usize,
    pub grad_checks: usize,
    /// Regenerate every CSV in a scratch directory and compare bytes.
    pub determinism_check: bool,
}

impl VerifyConfig {
    pub fn new(scenario: ScenarioConfig, out_dir: PathBuf) -> Self {
        Self {
            scenario,
            out_dir,
            seed: 0,
            seeds: 5,
            tiny_instances: 20,
            lemma_instances: 10,
            eval_traces: 20,
            timing_runs: 5,
            timing_users: 7,
            grad_checks: 50,
            determinism_check: true,
        }
    }

    fn seeds(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.seed + i).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "criterion {:>2} [{verdict}] {}: {}",
            self.id, self.name, self.detail
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub criteria: Vec<CriterionResult>,
    /// Observations that are recorded but never fail a criterion.
    pub notes: Vec<String>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn get(&self, id: u8) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.id == id)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.criteria {
            writeln!(f, "{c}")?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Mean total energy and delivered ratio over the held-out traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldOut {
    pub energy_j: f64,
    pub delivered_ratio: f64,
}

fn held_out_agent(agent: &Agent, scenario: &Scenario, traces: usize) -> Result<HeldOut> {
    held_out(scenario, traces, |seed, trace| {
        let (plans, _) = agent.greedy_rollout(scenario, seed)?;
        Ok(objective(
            scenario,
            &Schedule::from_plans(scenario, &plans),
            trace,
        ))
    })
}

fn held_out_greedy(scenario: &Scenario, traces: usize) -> Result<HeldOut> {
    held_out(scenario, traces, |_, trace| {
        Ok(greedy_baseline(scenario, trace)?.energy)
    })
}

fn held_out(
    scenario: &Scenario,
    traces: usize,
    mut run: impl FnMut(u64, &ChannelTrace) -> Result<crate::env::EnergyBreakdown>,
) -> Result<HeldOut> {
    let mut energy = 0.0;
    let mut ratio = 0.0;
    for j in 0..traces as u64 {
        let seed = EVAL_TRACE_BASE + j;
        let trace = ChannelTrace::generate(scenario, seed);
        let e = run(seed, &trace)?;
        energy += e.total_j;
        ratio += e.delivered_ratio();
    }
    let n = traces.max(1) as f64;
    Ok(HeldOut {
        energy_j: energy / n,
        delivered_ratio: ratio / n,
    })
}

/// Mean delivered ratio of the last ten training episodes.
pub fn final_delivered_ratio(rec: &RunRecord) -> f64 {
    let c = &rec.curve;
    let tail = &c[c.len().saturating_sub(10)..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().map(|e| e.delivered_ratio).sum::<f64>() / tail.len() as f64
}

struct EvalRow {
    solver: Solver,
    value: f64,
    seed: u64,
    held: HeldOut,
}

fn write_eval_csv(path: &Path, axis: Axis, traces: usize, rows: &[EvalRow]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(
        buf,
        "solver,{},seed,traces,mean_total_J,mean_delivered_ratio",
        axis.name()
    )?;
    for r in rows {
        writeln!(
            buf,
            "{},{},{},{traces},{:.8e},{:.8e}",
            r.solver,
            axis.format_value(r.value),
            r.seed,
            r.held.energy_j,
            r.held.delivered_ratio
        )?;
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Everything the deterministic part of the suite produces.
struct Artifacts {
    tiny_brute: Vec<RunRecord>,
    tiny_exact: Vec<RunRecord>,
    tiny_gss: Vec<RunRecord>,
    mccormick_products: usize,
    mccormick_failures: usize,
    lemma_checked: usize,
    lemma_violations: Vec<String>,
    epsilon_records: Vec<RunRecord>,
    epsilon_eval: Vec<EvalRow>,
    ablation_records: Vec<RunRecord>,
    ablation_eval: Vec<EvalRow>,
}

const EPSILONS: [f64; 3] = [1.0, 1.2, 1.5];

const ABLATION_SOLVERS: [Solver; 7] = [
    Solver::Greedy,
    Solver::GssHeu,
    Solver::Acdsos,
    Solver::AcdsosNoRestrict,
    Solver::AcdsosDetPolicy,
    Solver::AcdsosInverseEnergy,
    Solver::AcdsosNegativeEnergy,
];

fn produce(cfg: &VerifyConfig, dir: &Path) -> Result<Artifacts> {
    let budgets = Budgets::default();
    let desk = &cfg.scenario;

    // tiny suite: exhaustive search, branch and bound, heuristics
    let tiny_dir = dir.join("tiny");
    fs::create_dir_all(&tiny_dir)?;
    let mut tiny_brute = Vec::new();
    let mut tiny_exact = Vec::new();
    let mut tiny_gss = Vec::new();
    let mut tiny_greedy = Vec::new();
    let mut mc_rows = String::from("instance,seed,products,failures\n");
    let mut mccormick_products = 0;
    let mut mccormick_failures = 0;
    for i in 0..cfg.tiny_instances {
        let seed = cfg.seed + i as u64;
        let (s, trace) = tiny_instance(seed)?;
        let hyper = desk.agent.clone();
        let idx = i as f64;
        log::info!("tiny instance {i}: users {:?}", s.users_per_cluster());
        tiny_brute.push(run_cell(
            &s,
            &hyper,
            Solver::BruteForce,
            idx,
            seed,
            &budgets,
        ));
        tiny_exact.push(run_cell(&s, &hyper, Solver::Exact, idx, seed, &budgets));
        tiny_gss.push(run_cell(&s, &hyper, Solver::GssHeu, idx, seed, &budgets));
        tiny_greedy.push(run_cell(&s, &hyper, Solver::Greedy, idx, seed, &budgets));
        let rep = linearize(&s, &trace, budgets.ilp_variables)?.mccormick_check();
        mccormick_products += rep.products;
        mccormick_failures += rep.failures;
        mc_rows.push_str(&format!("{i},{seed},{},{}\n", rep.products, rep.failures));
    }
    let all: Vec<RunRecord> = [&tiny_brute, &tiny_exact, &tiny_gss, &tiny_greedy]
        .into_iter()
        .flatten()
        .cloned()
        .collect();
    let mut buf = Vec::new();
    write_energy_rows(
        &mut buf,
        "instance",
        |v| format!("{}", v as u64),
        &all,
        false,
    )?;
    fs::write(tiny_dir.join("energy_vs_instance.csv"), buf)?;
    fs::write(tiny_dir.join("mccormick.csv"), mc_rows)?;

    // monotonicity of the exact per-cluster communication energy
    let lemma_dir = dir.join("lemma");
    fs::create_dir_all(&lemma_dir)?;
    let mut lemma_rows = String::from("instance,seed,users,t,comm_J\n");
    let mut lemma_violations = Vec::new();
    let mut lemma_checked = 0;
    for i in 0..cfg.lemma_instances {
        let seed = cfg.seed + i as u64;
        let (s, trace) = tiny_single_cluster(seed, 12)?;
        let head = lemma1_probe(&s, &trace, 0, 0, 1..=6, DEFAULT_LEAF_CAP)?;
        let Some(t_min) = head.iter().find(|p| p.comm_j.is_some()).map(|p| p.t) else {
            lemma_violations.push(format!("instance {i}: infeasible within 6 frames"));
            continue;
        };
        let pts = lemma1_probe(&s, &trace, 0, 0, t_min..=t_min + 5, DEFAULT_LEAF_CAP)?;
        for p in &pts {
            let e = p.comm_j.map_or("NA".to_string(), |e| format!("{e:.8e}"));
            lemma_rows.push_str(&format!("{i},{seed},{},{},{e}\n", s.users(0), p.t));
        }
        for w in pts.windows(2) {
            match (w[0].comm_j, w[1].comm_j) {
                (Some(a), Some(b)) if b <= a * (1.0 + 1e-12) => {}
                _ => lemma_violations.push(format!("instance {i}: t {} -> {}", w[0].t, w[1].t)),
            }
        }
        lemma_checked += 1;
    }
    fs::write(lemma_dir.join("lemma.csv"), lemma_rows)?;

    // reward exponent sweep
    let seeds = cfg.seeds();
    let eps_cfg = ExperimentConfig {
        scenario: desk.clone(),
        solvers: vec![Solver::Acdsos],
        axis: Axis::Epsilon,
        values: EPSILONS.to_vec(),
        seeds: seeds.clone(),
        out_dir: dir.join("epsilon"),
        budgets,
        timing: false,
    };
    let epsilon_records = run_experiment(&eps_cfg)?.records;
    let mut epsilon_eval = Vec::new();
    for rec in &epsilon_records {
        if let Some(agent) = &rec.agent {
            epsilon_eval.push(EvalRow {
                solver: rec.solver,
                value: rec.value,
                seed: rec.seed,
                held: held_out_agent(agent, &desk.scenario, cfg.eval_traces)?,
            });
        }
    }
    write_eval_csv(
        &eps_cfg.out_dir.join("evaluation.csv"),
        Axis::Epsilon,
        cfg.eval_traces,
        &epsilon_eval,
    )?;

    // ablations and baselines at the desk cluster size
    let k = desk.scenario.users(0) as f64;
    let abl_cfg = ExperimentConfig {
        solvers: ABLATION_SOLVERS.to_vec(),
        axis: Axis::K,
        values: vec![k],
        out_dir: dir.join("ablation"),
        ..eps_cfg.clone()
    };
    let ablation_records = run_experiment(&abl_cfg)?.records;
    let (abl_scenario, _) = Axis::K.apply(desk, k)?;
    let mut ablation_eval = Vec::new();
    let greedy_held = held_out_greedy(&abl_scenario, cfg.eval_traces)?;
    for rec in &ablation_records {
        let held = match (&rec.agent, rec.solver) {
            (Some(agent), _) => held_out_agent(agent, &abl_scenario, cfg.eval_traces)?,
            (None, Solver::Greedy) => greedy_held,
            _ => continue,
        };
        ablation_eval.push(EvalRow {
            solver: rec.solver,
            value: rec.value,
            seed: rec.seed,
            held,
        });
    }
    write_eval_csv(
        &abl_cfg.out_dir.join("evaluation.csv"),
        Axis::K,
        cfg.eval_traces,
        &ablation_eval,
    )?;

    Ok(Artifacts {
        tiny_brute,
        tiny_exact,
        tiny_gss,
        mccormick_products,
        mccormick_failures,
        lemma_checked,
        lemma_violations,
        epsilon_records,
        epsilon_eval,
        ablation_records,
        ablation_eval,
    })
}

fn criterion(id: u8, name: &'static str, passed: bool, detail: String) -> CriterionResult {
    CriterionResult {
        id,
        name,
        passed,
        detail,
    }
}

fn exact_oracle(a: &Artifacts) -> CriterionResult {
    let mut matched = 0;
    let mut slowest: f64 = 0.0;
    let mut problems = Vec::new();
    for (b, x) in a.tiny_brute.iter().zip(&a.tiny_exact) {
        slowest = slowest.max(x.wall_ms);
        let ok = match (&b.energy, &x.energy, b.status, x.status) {
            (Some(eb), Some(ex), RunStatus::Ok, RunStatus::Ok) => {
                rel_diff(eb.total_j, ex.total_j) <= 1e-9
            }
            (None, None, RunStatus::Infeasible, RunStatus::Infeasible) => true,
            _ => false,
        };
        if ok && x.wall_ms < 60_000.0 {
            matched += 1;
        } else {
            problems.push(format!("instance {}", b.value as u64));
        }
    }
    let n = a.tiny_brute.len();
    let mut detail = format!(
        "{matched}/{n} instances agree to 1e-9, slowest branch and bound {:.1} s",
        slowest / 1e3
    );
    if !problems.is_empty() {
        detail.push_str(&format!(" (mismatch: {})", problems.join(", ")));
    }
    criterion(
        1,
        "exact solver matches exhaustive search",
        n > 0 && matched == n,
        detail,
    )
}

fn gss_quality(a: &Artifacts) -> CriterionResult {
    let mut feasible = 0;
    let mut within = 0;
    let mut slowest: f64 = 0.0;
    for (b, g) in a.tiny_brute.iter().zip(&a.tiny_gss) {
        slowest = slowest.max(g.wall_ms);
        let Some(opt) = b.energy.as_ref().filter(|_| b.status == RunStatus::Ok) else {
            continue;
        };
        feasible += 1;
        if let Some(e) = g.energy.as_ref().filter(|_| g.status == RunStatus::Ok) {
            if e.total_j <= 1.15 * opt.total_j {
                within += 1;
            }
        }
    }
    let share = within as f64 / feasible.max(1) as f64;
    criterion(
        4,
        "gss-heu within 15% of the optimum",
        feasible > 0 && share >= 0.9 && slowest < 10_000.0,
        format!(
            "{within}/{feasible} feasible instances within 15% ({:.0}%), slowest solve {:.2} s",
            100.0 * share,
            slowest / 1e3
        ),
    )
}

fn per_seed(records: &[RunRecord], solver: Solver, value: f64) -> impl Iterator<Item = &RunRecord> {
    records
        .iter()
        .filter(move |r| r.solver == solver && r.value == value)
}

fn eval_median(rows: &[EvalRow], solver: Solver, value: Option<f64>) -> (f64, f64) {
    let sel: Vec<&EvalRow> = rows
        .iter()
        .filter(|r| r.solver == solver && value.is_none_or(|v| r.value == v))
        .collect();
    let e: Vec<f64> = sel.iter().map(|r| r.held.energy_j).collect();
    let d: Vec<f64> = sel.iter().map(|r| r.held.delivered_ratio).collect();
    (median(&e), median(&d))
}

fn feasibility_shaping(a: &Artifacts) -> CriterionResult {
    let med = |records: &[RunRecord], solver, value| {
        let v: Vec<f64> = per_seed(records, solver, value)
            .map(final_delivered_ratio)
            .collect();
        median(&v)
    };
    let a10 = med(&a.epsilon_records, Solver::Acdsos, 1.0);
    let a12 = med(&a.epsilon_records, Solver::Acdsos, 1.2);
    let k = a.ablation_records.first().map_or(0.0, |r| r.value);
    let c = med(&a.ablation_records, Solver::AcdsosNegativeEnergy, k);
    criterion(
        5,
        "feasibility-shaped reward meets demand",
        a10 == 1.0 && a12 == 1.0 && c < 1.0,
        format!("median final delivered ratio: A eps=1.0 {a10:.4}, A eps=1.2 {a12:.4}, C {c:.4}"),
    )
}

fn epsilon_ordering(a: &Artifacts, notes: &mut Vec<String>) -> CriterionResult {
    let (e10, _) = eval_median(&a.epsilon_eval, Solver::Acdsos, Some(1.0));
    let (e12, _) = eval_median(&a.epsilon_eval, Solver::Acdsos, Some(1.2));
    let (e15, d15) = eval_median(&a.epsilon_eval, Solver::Acdsos, Some(1.5));
    notes.push(format!(
        "eps=1.5 median held-out delivered ratio {d15:.4} (recorded, not a criterion)"
    ));
    let margin = 1.05;
    criterion(
        6,
        "energy ordering over eps",
        e15 <= e12 * margin && e12 <= e10 * margin,
        format!(
            "median held-out energy eps=1.0 {e10:.4} J, eps=1.2 {e12:.4} J, eps=1.5 {e15:.4} J (5% margin)"
        ),
    )
}

fn ablation_ordering(a: &Artifacts, notes: &mut Vec<String>) -> CriterionResult {
    let (full, full_d) = eval_median(&a.ablation_eval, Solver::Acdsos, None);
    let (norestrict, nr_d) = eval_median(&a.ablation_eval, Solver::AcdsosNoRestrict, None);
    let (greedy, greedy_d) = eval_median(&a.ablation_eval, Solver::Greedy, None);
    let (det, det_d) = eval_median(&a.ablation_eval, Solver::AcdsosDetPolicy, None);
    notes.push(format!(
        "held-out delivered ratio: acdsos {full_d:.4}, no-restriction {nr_d:.4}, greedy {greedy_d:.4}, deterministic policy {det_d:.4} ({det:.4} J)"
    ));
    criterion(
        7,
        "ablation ordering",
        full <= norestrict && full <= greedy,
        format!(
            "median held-out energy acdsos {full:.4} J, no-restriction {norestrict:.4} J, greedy {greedy:.4} J"
        ),
    )
}

fn gradient_check(cfg: &VerifyConfig) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6772_6164);
    let rep = check_loss_gradients(&mut rng, cfg.grad_checks);
    criterion(
        8,
        "actor and critic gradients",
        rep.worst_actor <= 1e-4 && rep.worst_critic <= 1e-4,
        format!(
            "{} checks each, worst relative error actor {:.2e}, critic {:.2e}",
            rep.checks, rep.worst_actor, rep.worst_critic
        ),
    )
}

/// Exhaustive surjectivity, monotonicity and clamp check of the action map
/// for 1..=16 groups on a 0.01 grid over `[-kappa, kappa]`.
pub fn check_action_map(kappa: f64) -> (usize, Vec<String>) {
    let mut failures = Vec::new();
    let steps = (2.0 * kappa / 0.01).round() as usize;
    let mut points = 0;
    for g in 1..=16 {
        let mut hit = vec![false; g + 1];
        let mut prev = 0;
        for i in 0..=steps {
            let a = (-kappa + 0.01 * i as f64).min(kappa);
            points += 1;
            let idx = match map_action(a, kappa, g) {
                Ok(v) => v,
                Err(e) => {
                    failures.push(format!("G={g} a={a}: {e}"));
                    continue;
                }
            };
            if !(1..=g).contains(&idx) {
                failures.push(format!("G={g} a={a}: index {idx} out of range"));
                continue;
            }
            if idx < prev {
                failures.push(format!("G={g} a={a}: decreases {prev} -> {idx}"));
            }
            prev = idx;
            hit[idx] = true;
        }
        if let Some(missed) = (1..=g).find(|&i| !hit[i]) {
            failures.push(format!("G={g}: index {missed} never reached"));
        }
        if map_action(-kappa, kappa, g).ok() != Some(1) {
            failures.push(format!("G={g}: lower end does not clamp to 1"));
        }
        if map_action(kappa, kappa, g).ok() != Some(g) {
            failures.push(format!("G={g}: upper end does not map to {g}"));
        }
    }
    if map_action(0.0, kappa, 0).is_ok() {
        failures.push("G=0 accepted".into());
    }
    (points, failures)
}

fn action_map(cfg: &VerifyConfig) -> CriterionResult {
    let (points, failures) = check_action_map(cfg.scenario.agent.kappa);
    criterion(
        9,
        "action map properties",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{points} grid points over G = 1..16, no violations")
        } else {
            format!("{} violations, first: {}", failures.len(), failures[0])
        },
    )
}

fn timing(cfg: &VerifyConfig) -> Result<CriterionResult> {
    let scenario = cfg.scenario.with_users(cfg.timing_users)?;
    let agent = train(&scenario, &cfg.scenario.agent, cfg.seed)?.agent;
    let trace = ChannelTrace::generate(&scenario, cfg.seed);
    let mut agent_ms = Vec::new();
    let mut gss_ms = Vec::new();
    for _ in 0..cfg.timing_runs {
        let start = Instant::now();
        agent.greedy_rollout(&scenario, cfg.seed)?;
        agent_ms.push(start.elapsed().as_secs_f64() * 1e3);
        let start = Instant::now();
        gss_heu(&scenario, &trace, &GssConfig::default())?;
        gss_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let (a, g) = (median(&agent_ms), median(&gss_ms));
    let speedup = g / a;
    Ok(criterion(
        10,
        "agent inference faster than gss-heu",
        speedup >= 10.0,
        format!(
            "K={}: median agent mission {a:.3} ms, gss-heu {g:.1} ms, speed-up {speedup:.0}x",
            cfg.timing_users
        ),
    ))
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                out.push(path.strip_prefix(dir).expect("inside dir").to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Compare every CSV below `a` with its namesake below `b`.
pub fn compare_csv_trees(a: &Path, b: &Path) -> Result<(usize, Vec<String>)> {
    let files_a = csv_files(a)?;
    let files_b = csv_files(b)?;
    let mut diffs = Vec::new();
    if files_a != files_b {
        diffs.push("file sets differ".to_string());
    }
    for f in &files_a {
        let same = match (fs::read(a.join(f)), fs::read(b.join(f))) {
            (Ok(x), Ok(y)) => x == y,
            _ => false,
        };
        if !same {
            diffs.push(f.display().to_string());
        }
    }
    Ok((files_a.len(), diffs))
}

/// Run the acceptance suite, writing its CSVs below `cfg.out_dir`.
pub fn verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let first = cfg.out_dir.join("run");
    if first.exists() {
        fs::remove_dir_all(&first)?;
    }
    fs::create_dir_all(&first)?;
    let art = produce(cfg, &first)?;
    let mut report = VerifyReport::default();
    let mut notes = Vec::new();

    report.criteria.push(exact_oracle(&art));
    report.criteria.push(criterion(
        2,
        "McCormick rows exact at binary points",
        art.mccormick_products > 0 && art.mccormick_failures == 0,
        format!(
            "{} product variables checked, {} failures",
            art.mccormick_products, art.mccormick_failures
        ),
    ));
    report.criteria.push(criterion(
        3,
        "optimal communication energy non-increasing in hovering time",
        art.lemma_checked == cfg.lemma_instances && art.lemma_violations.is_empty(),
        if art.lemma_violations.is_empty() {
            format!("{} instances, zero violations", art.lemma_checked)
        } else {
            format!(
                "{} violations: {}",
                art.lemma_violations.len(),
                art.lemma_violations.join("; ")
            )
        },
    ));
    report.criteria.push(gss_quality(&art));
    report.criteria.push(feasibility_shaping(&art));
    report.criteria.push(epsilon_ordering(&art, &mut notes));
    report.criteria.push(ablation_ordering(&art, &mut notes));
    report.criteria.push(gradient_check(cfg));
    report.criteria.push(action_map(cfg));
    report.criteria.push(timing(cfg)?);

    if cfg.determinism_check {
        let second = cfg.out_dir.join("rerun");
        if second.exists() {
            fs::remove_dir_all(&second)?;
        }
        produce(cfg, &second)?;
        let (count, diffs) = compare_csv_trees(&first, &second)?;
        report.criteria.push(criterion(
            11,
            "byte-identical CSVs across runs",
            count > 0 && diffs.is_empty(),
            if diffs.is_empty() {
                format!("{count} CSV files identical")
            } else {
                format!("{} of {count} differ: {}", diffs.len(), diffs.join(", "))
            },
        ));
        fs::remove_dir_all(&second)?;
    }
    report.notes = notes;
    let mut text = Vec::new();
    write!(text, "{report}")?;
    fs::write(cfg.out_dir.join("report.txt"), text)?;
    Ok(report)
}
