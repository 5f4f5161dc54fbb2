use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uavsched::agent::{train, Agent};
use uavsched::bench::{
    run_cell, run_experiment, verify, write_curve_csv, write_energy_csv, Axis, Budgets,
    ExperimentConfig, RunRecord, RunStatus, ScenarioConfig, Solver, VerifyConfig,
};
use uavsched::env::{objective, ChannelTrace, Schedule};
use uavsched::exact::Budget;

#[derive(Parser)]
#[command(
    name = "uavsched",
    version,
    about = "UAV downlink scheduling and hovering-time benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario with one solver on the trace of one seed.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        solver: Solver,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the result row as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a solver sweep over one axis and write the CSV tables.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated solver names.
        #[arg(long, value_delimiter = ',', required = true)]
        solver: Vec<Solver>,
        #[arg(long)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seed: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Write `NA` instead of wall times so output is reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Train an agent and save its parameters.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Parameter file to write.
        #[arg(long)]
        out: PathBuf,
        /// Learning curve CSV to write.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Evaluate a saved agent greedily on the trace of one seed.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Parameter file written by `train`.
        #[arg(long)]
        agent: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the acceptance suite and print one line per criterion.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "verify-out")]
        out: PathBuf,
        /// Skip the second run that checks byte-identical CSVs.
        #[arg(long)]
        skip_determinism: bool,
    },
    /// Write the channel trace of one seed as a flat table.
    DumpTrace {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file; built-in defaults when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override the number of training episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Override the reward exponent.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Node limit for branch and bound.
    #[arg(long)]
    budget_nodes: Option<usize>,
    /// Time limit in seconds for branch and bound.
    #[arg(long)]
    budget_seconds: Option<f64>,
}

impl Common {
    fn load(&self) -> uavsched::Result<ScenarioConfig> {
        let mut cfg = match &self.scenario {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::defaults(),
        };
        if let Some(e) = self.episodes {
            cfg.agent.episodes = e;
        }
        if let Some(e) = self.epsilon {
            cfg.agent.epsilon = e;
        }
        cfg.agent.validate()?;
        Ok(cfg)
    }

    fn budgets(&self) -> Budgets {
        Budgets {
            bnb: Budget {
                max_nodes: self.budget_nodes,
                max_seconds: self.budget_seconds,
            },
            ..Budgets::default()
        }
    }
}

fn create(path: &Path) -> uavsched::Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn run(cli: Cli) -> uavsched::Result<bool> {
    match cli.command {
        Command::Solve {
            common,
            solver,
            seed,
            out,
        } => {
            let cfg = common.load()?;
            let rec = run_cell(
                &cfg.scenario,
                &cfg.agent,
                solver,
                cfg.scenario.users(0) as f64,
                seed,
                &common.budgets(),
            );
            match &rec.energy {
                Some(e) => println!(
                    "{solver} seed {seed}: {} total {:.6} J (comm {:.6} J, hover {:.6} J), delivered {:.4}, {:.1} ms",
                    rec.status.name(),
                    e.total_j,
                    e.comm_j,
                    e.hover_j,
                    e.delivered_ratio(),
                    rec.wall_ms
                ),
                None => println!("{solver} seed {seed}: {}", rec.status.name()),
            }
            if let Some(msg) = &rec.message {
                eprintln!("{msg}");
            }
            if let Some(path) = out {
                let mut w = create(&path)?;
                let rows = std::slice::from_ref(&rec);
                write_energy_csv(&mut w, Axis::K, rows, true)?;
                w.flush()?;
            }
            Ok(rec.status != RunStatus::Failed)
        }
        Command::Sweep {
            common,
            solver,
            axis,
            values,
            seed,
            out,
            no_timing,
        } => {
            let cfg = ExperimentConfig {
                scenario: common.load()?,
                solvers: solver,
                axis,
                values,
                seeds: seed,
                out_dir: out,
                budgets: common.budgets(),
                timing: !no_timing,
            };
            let rep = run_experiment(&cfg)?;
            println!("wrote {}", rep.energy_csv.display());
            if let Some(p) = &rep.curve_csv {
                println!("wrote {}", p.display());
            }
            let failures = rep.hard_failures();
            if failures > 0 {
                eprintln!("{failures} runs failed");
            }
            Ok(failures == 0)
        }
        Command::Train {
            common,
            seed,
            out,
            curve,
        } => {
            let cfg = common.load()?;
            let rep = train(&cfg.scenario, &cfg.agent, seed)?;
            rep.agent.save(&out)?;
            if let Some(last) = rep.curve.last() {
                println!(
                    "trained {} episodes; last episode energy {:.6} J, delivered {:.4}",
                    rep.curve.len(),
                    last.energy_j,
                    last.delivered_ratio
                );
            }
            if let Some(path) = curve {
                let rec = RunRecord {
                    curve: rep.curve.clone(),
                    ..RunRecord::empty(Solver::Acdsos, cfg.agent.epsilon, seed)
                };
                let mut w = create(&path)?;
                write_curve_csv(&mut w, Axis::Epsilon, &[rec])?;
                w.flush()?;
            }
            if let Some(msg) = &rep.diverged {
                eprintln!("training diverged: {msg}");
                return Ok(false);
            }
            println!("saved {}", out.display());
            Ok(true)
        }
        Command::Eval {
            common,
            agent,
            seed,
        } => {
            let cfg = common.load()?;
            let agent = Agent::load(&agent)?;
            let s = &cfg.scenario;
            let (plans, _) = agent.greedy_rollout(s, seed)?;
            let trace = ChannelTrace::generate(s, seed);
            let e = objective(s, &Schedule::from_plans(s, &plans), &trace);
            println!(
                "seed {seed}: total {:.6} J (comm {:.6} J, hover {:.6} J), delivered {:.4}",
                e.total_j,
                e.comm_j,
                e.hover_j,
                e.delivered_ratio()
            );
            Ok(true)
        }
        Command::Verify {
            common,
            seed,
            out,
            skip_determinism,
        } => {
            let cfg = common.load()?;
            let mut vcfg = VerifyConfig::new(cfg, out);
            vcfg.seed = seed;
            vcfg.determinism_check = !skip_determinism;
            let report = verify(&vcfg)?;
            print!("{report}");
            Ok(report.all_passed())
        }
        Command::DumpTrace { common, seed, out } => {
            let cfg = common.load()?;
            let trace = ChannelTrace::generate(&cfg.scenario, seed);
            match out {
                Some(path) => {
                    let mut w = create(&path)?;
                    trace.write_table(&mut w)?;
                    w.flush()?;
                }
                None => {
                    let stdout = io::stdout();
                    trace.write_table(stdout.lock())?;
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
