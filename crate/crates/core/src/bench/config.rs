use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::agent::{Features, Hyperparams, RewardVariant, ScorePoint, TdMode};
use crate::channel::{FsmcModel, PropulsionParams, RadioConfig};
use crate::env::Scenario;
use crate::error::{Error, Result};

const BITS_PER_MBIT: f64 = 1e6;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    #[serde(default)]
    clusters: ClustersSection,
    #[serde(default)]
    radio: RadioSection,
    #[serde(default)]
    propulsion: PropulsionParams,
    #[serde(default)]
    fsmc: FsmcSection,
    #[serde(default)]
    limits: LimitsSection,
    #[serde(default)]
    agent: AgentSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClustersSection {
    count: Option<usize>,
    /// Users per cluster: one number for all clusters or one per cluster.
    users: Option<UsersField>,
    /// Inclusive range of whole-Mbit demands.
    demand_mbit: Option<(u32, u32)>,
    demand_seed: Option<u64>,
    /// Explicit demands; overrides count, users and the random draw.
    demands_mbit: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum UsersField {
    Same(usize),
    PerCluster(Vec<usize>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadioSection {
    bandwidth_hz: Option<f64>,
    noise_power_w: Option<f64>,
    tx_power_w: Option<f64>,
    antennas: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FsmcSection {
    levels: Option<Vec<f64>>,
    transition: Option<Vec<Vec<f64>>>,
    preset: Option<String>,
    stay: Option<f64>,
    step: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitsSection {
    max_frames: Option<usize>,
    slots_per_frame: Option<usize>,
    slot_duration_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentSection {
    gamma: Option<f64>,
    alpha_actor: Option<f64>,
    alpha_critic: Option<f64>,
    batch: Option<usize>,
    memory: Option<usize>,
    warmup: Option<usize>,
    episodes: Option<usize>,
    kappa: Option<f64>,
    epsilon: Option<f64>,
    reward: Option<String>,
    hidden: Option<usize>,
    hidden_layers: Option<usize>,
    var_min: Option<f64>,
    var_max: Option<f64>,
    restrict: Option<bool>,
    deterministic: Option<bool>,
    features: Option<String>,
    td: Option<String>,
    score_point: Option<String>,
    data_unit_bits: Option<f64>,
}

/// How cluster demands are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum DemandSpec {
    /// Whole-Mbit demands drawn uniformly from `lo..=hi` with `seed`.
    Random {
        users: Vec<usize>,
        lo_mbit: u32,
        hi_mbit: u32,
        seed: u64,
    },
    /// Demands in bits, as written in the file.
    Explicit(Vec<Vec<f64>>),
}

impl DemandSpec {
    pub fn demands(&self) -> Vec<Vec<f64>> {
        match self {
            DemandSpec::Explicit(d) => d.clone(),
            DemandSpec::Random {
                users,
                lo_mbit,
                hi_mbit,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                users
                    .iter()
                    .map(|&k| {
                        (0..k)
                            .map(|_| rng.random_range(*lo_mbit..=*hi_mbit) as f64 * BITS_PER_MBIT)
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

/// A parsed scenario file: the instance, the agent settings and the demand
/// rule used to rebuild the instance along a sweep axis.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub scenario: Scenario,
    pub agent: Hyperparams,
    pub demand: DemandSpec,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let fallback = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
        Self::parse(&text, &fallback).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parse scenario text; `fallback_name` is used when the file has no
    /// `name`.
    pub fn parse(text: &str, fallback_name: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        build(file, fallback_name)
    }

    /// The defaults: three clusters of ten users with 1..5 Mbit demands.
    pub fn defaults() -> Self {
        build(ScenarioFile::default(), "default").expect("valid defaults")
    }

    /// Same settings with `users` users in every cluster. Random demands
    /// are redrawn from the same seed; explicit demands cannot be resized.
    pub fn with_users(&self, users: usize) -> Result<Scenario> {
        match &self.demand {
            DemandSpec::Random {
                users: old,
                lo_mbit,
                hi_mbit,
                seed,
            } => {
                let spec = DemandSpec::Random {
                    users: vec![users; old.len()],
                    lo_mbit: *lo_mbit,
                    hi_mbit: *hi_mbit,
                    seed: *seed,
                };
                self.scenario.with_demands(spec.demands())
            }
            DemandSpec::Explicit(_) => Err(Error::config(
                "clusters.demands_mbit",
                "explicit demands cannot be resized along the K axis",
            )),
        }
    }
}

/// Load a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    Ok(ScenarioConfig::load(path)?.scenario)
}

fn build(file: ScenarioFile, fallback_name: &str) -> Result<ScenarioConfig> {
    let demand = demand_spec(&file.clusters)?;

    let mut radio = RadioConfig::default();
    let r = &file.radio;
    radio.bandwidth_hz = r.bandwidth_hz.unwrap_or(radio.bandwidth_hz);
    radio.noise_power_w = r.noise_power_w.unwrap_or(radio.noise_power_w);
    radio.tx_power_w = r.tx_power_w.unwrap_or(radio.tx_power_w);
    radio.antennas = r.antennas.unwrap_or(radio.antennas);
    let l = &file.limits;
    radio.slots_per_frame = l.slots_per_frame.unwrap_or(radio.slots_per_frame);
    radio.slot_duration_s = l.slot_duration_s.unwrap_or(radio.slot_duration_s);
    let max_frames = l.max_frames.unwrap_or(160);

    let fsmc = fsmc_model(&file.fsmc)?;
    let scenario = Scenario::new(
        demand.demands(),
        max_frames,
        radio,
        file.propulsion,
        Arc::new(fsmc),
    )?;
    let agent = hyperparams(&file.agent)?;
    Ok(ScenarioConfig {
        name: file.name.unwrap_or_else(|| fallback_name.to_string()),
        scenario,
        agent,
        demand,
    })
}

fn demand_spec(c: &ClustersSection) -> Result<DemandSpec> {
    if let Some(explicit) = &c.demands_mbit {
        if c.count.is_some() || c.users.is_some() || c.demand_mbit.is_some() {
            return Err(Error::config(
                "clusters.demands_mbit",
                "cannot be combined with count, users or demand_mbit",
            ));
        }
        if explicit
            .iter()
            .flatten()
            .any(|q| !(q.is_finite() && *q >= 0.0))
        {
            return Err(Error::config(
                "clusters.demands_mbit",
                "demands must be finite and >= 0",
            ));
        }
        let bits = explicit
            .iter()
            .map(|row| row.iter().map(|q| q * BITS_PER_MBIT).collect())
            .collect();
        return Ok(DemandSpec::Explicit(bits));
    }
    let count = c.count.unwrap_or(3);
    let users = match c.users.clone().unwrap_or(UsersField::Same(10)) {
        UsersField::Same(k) => vec![k; count],
        UsersField::PerCluster(v) => {
            if c.count.is_some_and(|n| n != v.len()) {
                return Err(Error::config(
                    "clusters.users",
                    format!("{} entries for {count} clusters", v.len()),
                ));
            }
            v
        }
    };
    let (lo, hi) = c.demand_mbit.unwrap_or((1, 5));
    if lo == 0 || hi < lo {
        return Err(Error::config(
            "clusters.demand_mbit",
            format!("need 1 <= lo <= hi, got [{lo}, {hi}]"),
        ));
    }
    Ok(DemandSpec::Random {
        users,
        lo_mbit: lo,
        hi_mbit: hi,
        seed: c.demand_seed.unwrap_or(0),
    })
}

fn fsmc_model(f: &FsmcSection) -> Result<FsmcModel> {
    let levels = f.levels.clone().unwrap_or_else(FsmcModel::standard_levels);
    match (&f.transition, f.preset.as_deref()) {
        (Some(_), Some(_)) => Err(Error::config(
            "fsmc.preset",
            "give either transition rows or a preset, not both",
        )),
        (Some(rows), None) => {
            if f.stay.is_some() || f.step.is_some() {
                return Err(Error::config(
                    "fsmc.stay",
                    "stay and step only apply to the birth-death preset",
                ));
            }
            FsmcModel::new(levels, rows.clone())
        }
        (None, None) | (None, Some("birth-death")) => {
            FsmcModel::birth_death(levels, f.stay.unwrap_or(0.4), f.step.unwrap_or(0.3))
        }
        (None, Some(other)) => Err(Error::config(
            "fsmc.preset",
            format!("unknown preset `{other}` (known: birth-death)"),
        )),
    }
}

fn parse_choice<T: Copy>(key: &str, value: &str, choices: &[(&str, T)]) -> Result<T> {
    choices
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let known: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
            Error::config(
                key,
                format!("unknown value `{value}` (known: {})", known.join(", ")),
            )
        })
}

fn hyperparams(a: &AgentSection) -> Result<Hyperparams> {
    let mut h = Hyperparams::default();
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = a.$field { h.$field = v; })*
        };
    }
    set!(
        gamma,
        alpha_actor,
        alpha_critic,
        batch,
        memory,
        warmup,
        episodes,
        kappa,
        epsilon,
        hidden,
        hidden_layers,
        var_min,
        var_max,
        restrict,
        deterministic,
        data_unit_bits
    );
    if let Some(v) = &a.reward {
        h.reward = parse_choice("agent.reward", v, &REWARDS)?;
    }
    if let Some(v) = &a.features {
        h.features = parse_choice(
            "agent.features",
            v,
            &[
                ("compact", Features::Compact),
                ("full-table", Features::FullTable),
            ],
        )?;
    }
    if let Some(v) = &a.td {
        h.td = parse_choice(
            "agent.td",
            v,
            &[
                ("recomputed", TdMode::Recomputed),
                ("stored", TdMode::Stored),
            ],
        )?;
    }
    if let Some(v) = &a.score_point {
        h.score_point = parse_choice(
            "agent.score_point",
            v,
            &[
                ("pre-clip", ScorePoint::PreClip),
                ("clipped", ScorePoint::Clipped),
            ],
        )?;
    }
    h.validate()?;
    Ok(h)
}

const REWARDS: [(&str, RewardVariant); 3] = [
    ("data-per-energy", RewardVariant::DataPerEnergy),
    ("inverse-energy", RewardVariant::InverseEnergy),
    ("negative-energy", RewardVariant::NegativeEnergy),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ScenarioConfig::parse("", "x").unwrap();
        let s = &c.scenario;
        assert_eq!(c.name, "x");
        assert_eq!(s.num_clusters(), 3);
        assert_eq!(s.users_per_cluster(), vec![10, 10, 10]);
        assert_eq!(s.radio.antennas, 10);
        assert_eq!(s.radio.bandwidth_hz, 10e6);
        assert_eq!(s.radio.noise_power_w, 1e-4);
        assert_eq!(s.radio.tx_power_w, 3.0);
        assert_eq!(s.propulsion.hover_power_w, 10.0);
        assert_eq!(s.fsmc.levels(), FsmcModel::standard_levels().as_slice());
        for q in s.demands().iter().flatten() {
            let mbit = q / 1e6;
            assert!((1.0..=5.0).contains(&mbit) && mbit.fract() == 0.0);
        }
        assert_eq!(c.agent, Hyperparams::default());
    }

    #[test]
    fn missing_levels_take_nine_level_default() {
        let c = ScenarioConfig::parse("[fsmc]\nstay = 0.5\nstep = 0.25\n", "x").unwrap();
        assert_eq!(c.scenario.fsmc.num_levels(), 9);
        assert_eq!(c.scenario.fsmc.top_level(), 2.4);
        assert_eq!(c.scenario.fsmc.transition()[4][4], 0.5);
    }

    #[test]
    fn negative_demand_is_rejected() {
        let err = ScenarioConfig::parse("[clusters]\ndemands_mbit = [[1.0, -2.0]]\n", "x")
            .unwrap_err()
            .to_string();
        assert!(err.contains("clusters.demands_mbit"), "{err}");
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ScenarioConfig::parse("[radio]\nbandwith_hz = 1.0\n", "x")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bandwith_hz"), "{err}");
        let err = ScenarioConfig::parse("[limits]\nmax_frames = -3\n", "x")
            .unwrap_err()
            .to_string();
        assert!(err.contains("max_frames"), "{err}");
    }

    #[test]
    fn corrupted_transition_is_reported() {
        let text = "[fsmc]\nlevels = [0.0, 1.0]\ntransition = [[0.5, 0.6], [0.5, 0.5]]\n";
        let err = ScenarioConfig::parse(text, "x").unwrap_err().to_string();
        assert!(
            err.contains("fsmc.transition") && err.contains("row 0"),
            "{err}"
        );
    }

    #[test]
    fn explicit_demands_and_overrides() {
        let text = r#"
name = "two"
[clusters]
demands_mbit = [[1.0, 2.0], [0.5]]
[limits]
max_frames = 12
slots_per_frame = 4
[propulsion]
hover_power_w = 20.0
[agent]
hidden = 32
reward = "negative-energy"
"#;
        let c = ScenarioConfig::parse(text, "x").unwrap();
        assert_eq!(c.name, "two");
        assert_eq!(c.scenario.demands(), &[vec![1e6, 2e6], vec![5e5]]);
        assert_eq!(c.scenario.max_frames(), 12);
        assert_eq!(c.scenario.slots(), 4);
        assert!((c.scenario.hover_energy_per_frame() - 0.08).abs() < 1e-15);
        assert_eq!(c.agent.hidden, 32);
        assert_eq!(c.agent.reward, RewardVariant::NegativeEnergy);
        assert!(c.with_users(3).is_err());
        let err = ScenarioConfig::parse("[agent]\nreward = \"bogus\"\n", "x")
            .unwrap_err()
            .to_string();
        assert!(err.contains("agent.reward"), "{err}");
    }

    #[test]
    fn with_users_redraws_from_seed() {
        let text = "[clusters]\ncount = 2\nusers = 4\ndemand_mbit = [1, 2]\ndemand_seed = 5\n";
        let c = ScenarioConfig::parse(text, "x").unwrap();
        let s7 = c.with_users(7).unwrap();
        assert_eq!(s7.users_per_cluster(), vec![7, 7]);
        assert_eq!(s7.demands(), c.with_users(7).unwrap().demands());
        let s4 = c.with_users(4).unwrap();
        assert_eq!(s4.demands(), c.scenario.demands());
    }
}
