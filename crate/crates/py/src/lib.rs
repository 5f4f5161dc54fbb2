//! Python bindings: scenarios, solvers and the learning agent.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use uavsched::agent::{self, RewardVariant};
use uavsched::bench::{run_cell, Budgets, RunRecord, ScenarioConfig, Solver};
use uavsched::env::{objective, ChannelTrace, Schedule};

fn to_py(e: uavsched::Error) -> PyErr {
    match e {
        uavsched::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// A problem instance with its agent settings.
#[pyclass(name = "Scenario", module = "uavsched", skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    cfg: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    /// Load a scenario file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            cfg: ScenarioConfig::load(&path).map_err(to_py)?,
        })
    }

    /// Parse scenario text.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            cfg: ScenarioConfig::parse(text, "inline").map_err(to_py)?,
        })
    }

    /// Built-in defaults.
    #[staticmethod]
    fn defaults() -> Self {
        Self {
            cfg: ScenarioConfig::defaults(),
        }
    }

    #[getter]
    fn name(&self) -> &str {
        &self.cfg.name
    }

    #[getter]
    fn num_clusters(&self) -> usize {
        self.cfg.scenario.num_clusters()
    }

    #[getter]
    fn users(&self) -> Vec<usize> {
        self.cfg.scenario.users_per_cluster()
    }

    /// Demands in bits, one list per cluster.
    #[getter]
    fn demands(&self) -> Vec<Vec<f64>> {
        self.cfg.scenario.demands().to_vec()
    }

    #[getter]
    fn max_frames(&self) -> usize {
        self.cfg.scenario.max_frames()
    }

    #[getter]
    fn slots_per_frame(&self) -> usize {
        self.cfg.scenario.slots()
    }

    #[getter]
    fn hover_energy_per_frame(&self) -> f64 {
        self.cfg.scenario.hover_energy_per_frame()
    }

    /// Copy with `users` users per cluster (random demands are redrawn).
    fn with_users(&self, users: usize) -> PyResult<Self> {
        let mut cfg = self.cfg.clone();
        cfg.scenario = cfg.with_users(users).map_err(to_py)?;
        Ok(Self { cfg })
    }

    fn with_max_frames(&self, frames: usize) -> PyResult<Self> {
        let mut cfg = self.cfg.clone();
        cfg.scenario = cfg.scenario.with_max_frames(frames).map_err(to_py)?;
        Ok(Self { cfg })
    }

    /// Channel trace of `seed` as CSV text.
    fn trace_table(&self, seed: u64) -> PyResult<String> {
        let mut buf = Vec::new();
        ChannelTrace::generate(&self.cfg.scenario, seed)
            .write_table(&mut buf)
            .map_err(to_py)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, users={:?}, max_frames={})",
            self.cfg.name,
            self.users(),
            self.max_frames()
        )
    }
}

fn record_dict<'py>(py: Python<'py>, rec: &RunRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("solver", rec.solver.name())?;
    d.set_item("seed", rec.seed)?;
    d.set_item("status", rec.status.name())?;
    d.set_item("wall_ms", rec.wall_ms)?;
    let e = rec.energy.as_ref();
    d.set_item("total_j", e.map(|e| e.total_j))?;
    d.set_item("comm_j", e.map(|e| e.comm_j))?;
    d.set_item("hover_j", e.map(|e| e.hover_j))?;
    d.set_item("delivered_ratio", e.map(|e| e.delivered_ratio()))?;
    d.set_item("message", rec.message.clone())?;
    Ok(d)
}

/// Solve `scenario` with a named solver on the channel trace of `seed`.
/// Learning solvers train first and are evaluated greedily.
#[pyfunction]
#[pyo3(signature = (scenario, solver, seed=0))]
fn solve<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    solver: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let solver: Solver = solver.parse().map_err(to_py)?;
    let s = &scenario.cfg.scenario;
    let rec = run_cell(
        s,
        &scenario.cfg.agent,
        solver,
        s.users(0) as f64,
        seed,
        &Budgets::default(),
    );
    record_dict(py, &rec)
}

/// A trained policy.
#[pyclass(name = "Agent", module = "uavsched")]
struct PyAgent {
    inner: agent::Agent,
}

#[pymethods]
impl PyAgent {
    /// Train on `scenario`; returns the agent and its learning curve as a
    /// list of dicts.
    #[staticmethod]
    #[pyo3(signature = (scenario, seed=0, episodes=None, epsilon=None))]
    fn train<'py>(
        py: Python<'py>,
        scenario: &PyScenario,
        seed: u64,
        episodes: Option<usize>,
        epsilon: Option<f64>,
    ) -> PyResult<(Self, Vec<Bound<'py, PyDict>>)> {
        let mut hyper = scenario.cfg.agent.clone();
        if let Some(e) = episodes {
            hyper.episodes = e;
        }
        if let Some(e) = epsilon {
            hyper.epsilon = e;
        }
        let rep = agent::train(&scenario.cfg.scenario, &hyper, seed).map_err(to_py)?;
        let curve = rep
            .curve
            .iter()
            .map(|c| {
                let d = PyDict::new(py);
                d.set_item("episode", c.episode)?;
                d.set_item("reward", c.reward)?;
                d.set_item("energy_j", c.energy_j)?;
                d.set_item("delivered_ratio", c.delivered_ratio)?;
                Ok(d)
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok((Self { inner: rep.agent }, curve))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: agent::Agent::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    /// Greedy rollout on the trace of `seed`, energies recomputed from the
    /// schedule.
    #[pyo3(signature = (scenario, seed=0))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        scenario: &PyScenario,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let s = &scenario.cfg.scenario;
        let (plans, _) = self.inner.greedy_rollout(s, seed).map_err(to_py)?;
        let trace = ChannelTrace::generate(s, seed);
        let e = objective(s, &Schedule::from_plans(s, &plans), &trace);
        let d = PyDict::new(py);
        d.set_item("total_j", e.total_j)?;
        d.set_item("comm_j", e.comm_j)?;
        d.set_item("hover_j", e.hover_j)?;
        d.set_item("delivered_ratio", e.delivered_ratio())?;
        d.set_item("frames", plans.len())?;
        Ok(d)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.actor.input_dim()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.actor.param_count() + self.inner.critic.param_count()
    }
}

/// Quantize a continuous action onto `groups` group indices (1-based).
#[pyfunction]
fn map_action(a: f64, kappa: f64, groups: usize) -> PyResult<usize> {
    agent::map_action(a, kappa, groups).map_err(to_py)
}

/// Per-frame reward; `variant` is `data-per-energy`, `inverse-energy` or
/// `negative-energy`.
#[pyfunction]
#[pyo3(signature = (delivered, energy_j, variant="data-per-energy", epsilon=1.2))]
fn reward(delivered: f64, energy_j: f64, variant: &str, epsilon: f64) -> PyResult<f64> {
    let v = match variant {
        "data-per-energy" => RewardVariant::DataPerEnergy,
        "inverse-energy" => RewardVariant::InverseEnergy,
        "negative-energy" => RewardVariant::NegativeEnergy,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown reward variant `{other}`"
            )))
        }
    };
    Ok(agent::reward(delivered, energy_j, v, epsilon))
}

/// Names accepted by `solve`.
#[pyfunction]
fn solvers() -> Vec<&'static str> {
    Solver::ALL.iter().map(|s| s.name()).collect()
}

#[pymodule]
#[pyo3(name = "uavsched")]
fn uavsched_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyAgent>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(map_action, m)?)?;
    m.add_function(wrap_pyfunction!(reward, m)?)?;
    m.add_function(wrap_pyfunction!(solvers, m)?)?;
    Ok(())
}
