//! Actor-critic scheduling agent.
//!
//! The actor maps the state vector to a diagonal Gaussian over one continuous
//! action per timeslot; each action is clipped to `[-kappa, kappa]` and
//! quantized onto the cluster's active group list. The critic estimates the
//! state value and supplies the TD error that weights the policy gradient.
//! Transitions go to a FIFO replay memory and both networks take one Adam
//! step on a uniformly sampled batch after every frame.

mod gradcheck;
mod mlp;
mod policy;
mod replay;

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use gradcheck::{check_loss_gradients, GradCheckReport};
pub use mlp::{Adam, ForwardCache, Gradients, Layer, Mlp};
pub use policy::{
    action_order, clip_action, encode_state, feature_len, greedy_action, map_action,
    restrict_groups, sample_action, sample_gaussian, Features, Heads, PolicyOutput,
};
pub use replay::{Experience, ReplayMemory};

use crate::env::{new_episode, EnvState, FramePlan, Scenario};
use crate::error::{Error, Result};

/// Per-frame reward.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum RewardVariant {
    /// Delivered data over energy raised to `epsilon`.
    #[default]
    DataPerEnergy,
    /// Inverse energy.
    InverseEnergy,
    /// Negative energy.
    NegativeEnergy,
}

/// Where the policy log-density is evaluated for a clipped sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ScorePoint {
    /// The Gaussian draw before clipping.
    #[default]
    PreClip,
    /// The clipped action that was played.
    Clipped,
}

/// Which TD error weights the policy gradient.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TdMode {
    /// Recomputed with the current critic at update time.
    #[default]
    Recomputed,
    /// The value stored with the transition when it was played.
    Stored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub gamma: f64,
    pub alpha_actor: f64,
    pub alpha_critic: f64,
    pub batch: usize,
    pub memory: usize,
    /// Updates start once the memory holds this many transitions (at least
    /// one batch).
    pub warmup: usize,
    pub episodes: usize,
    pub kappa: f64,
    pub epsilon: f64,
    pub reward: RewardVariant,
    /// Width of every hidden layer.
    pub hidden: usize,
    pub hidden_layers: usize,
    pub var_min: f64,
    pub var_max: f64,
    /// Drop groups with satisfied users from the action range.
    pub restrict: bool,
    /// Pin the policy variance to `var_min`.
    pub deterministic: bool,
    pub features: Features,
    pub td: TdMode,
    pub score_point: ScorePoint,
    /// Delivered data enters the reward in units of this many bits.
    pub data_unit_bits: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            alpha_actor: 0.003,
            alpha_critic: 0.002,
            batch: 64,
            memory: 10_000,
            warmup: 2000,
            episodes: 400,
            kappa: 2.0,
            epsilon: 1.2,
            reward: RewardVariant::DataPerEnergy,
            hidden: 300,
            hidden_layers: 3,
            var_min: 0.01,
            var_max: 1.0,
            restrict: true,
            deterministic: false,
            features: Features::Compact,
            td: TdMode::Recomputed,
            score_point: ScorePoint::PreClip,
            data_unit_bits: 1e6,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("agent.gamma", "must lie in [0, 1]"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::config("agent.epsilon", "must be > 0"));
        }
        for (key, v) in [
            ("agent.alpha_actor", self.alpha_actor),
            ("agent.alpha_critic", self.alpha_critic),
            ("agent.data_unit_bits", self.data_unit_bits),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, "must be > 0"));
            }
        }
        if self.batch == 0 || self.memory == 0 || self.hidden == 0 {
            return Err(Error::config(
                "agent.batch",
                "batch, memory and hidden width must be >= 1",
            ));
        }
        self.heads().validate()
    }

    pub fn heads(&self) -> Heads {
        Heads {
            kappa: self.kappa,
            var_min: self.var_min,
            var_max: self.var_max,
            fixed_variance: self.deterministic,
        }
    }
}

/// Reward of one frame. An idle frame with no energy earns 0.
pub fn reward(delivered: f64, energy_j: f64, variant: RewardVariant, epsilon: f64) -> f64 {
    if energy_j <= 0.0 {
        return 0.0;
    }
    match variant {
        RewardVariant::DataPerEnergy => delivered / energy_j.powf(epsilon),
        RewardVariant::InverseEnergy => 1.0 / energy_j,
        RewardVariant::NegativeEnergy => -energy_j,
    }
}

/// `r + gamma V(s') (1 - terminal) - V(s)`.
pub fn td_error(v_s: f64, v_next: f64, r: f64, gamma: f64, terminal: bool) -> f64 {
    let bootstrap = if terminal { 0.0 } else { gamma * v_next };
    r + bootstrap - v_s
}

fn stack<'a>(rows: impl ExactSizeIterator<Item = &'a Array1<f64>>) -> Array2<f64> {
    let n = rows.len();
    let mut rows = rows.peekable();
    let width = rows.peek().map_or(0, |r| r.len());
    let mut out = Array2::zeros((n, width));
    for (i, r) in rows.enumerate() {
        out.row_mut(i).assign(r);
    }
    out
}

/// Semi-gradient critic loss `mean(delta^2)` with its gradient and the
/// per-sample TD errors.
pub fn critic_loss_grad(
    critic: &Mlp,
    batch: &[&Experience],
    gamma: f64,
) -> Result<(f64, Gradients, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let x = stack(batch.iter().map(|e| &e.state));
    let x_next = stack(batch.iter().map(|e| &e.next_state));
    let (v, cache) = critic.forward_cached(x.view())?;
    let v_next = critic.forward(x_next.view())?;
    let b = batch.len() as f64;
    let deltas: Vec<f64> = batch
        .iter()
        .enumerate()
        .map(|(i, e)| td_error(v[[i, 0]], v_next[[i, 0]], e.reward, gamma, e.terminal))
        .collect();
    let loss = deltas.iter().map(|d| d * d).sum::<f64>() / b;
    let d_out = Array2::from_shape_fn((batch.len(), 1), |(i, _)| -2.0 * deltas[i] / b);
    let grads = critic.backward(&cache, d_out);
    Ok((loss, grads, deltas))
}

/// Actor loss `-mean(delta * log pi(a | s))` and its gradient.
pub fn actor_loss_grad(
    actor: &Mlp,
    heads: &Heads,
    batch: &[&Experience],
    deltas: &[f64],
) -> Result<(f64, Gradients)> {
    if batch.is_empty() || batch.len() != deltas.len() {
        return Err(Error::Contract(
            "batch and TD errors differ in length".into(),
        ));
    }
    let x = stack(batch.iter().map(|e| &e.state));
    let (raw, cache) = actor.forward_cached(x.view())?;
    let b = batch.len() as f64;
    let mut loss = 0.0;
    let mut d_out = Array2::zeros(raw.raw_dim());
    for (i, e) in batch.iter().enumerate() {
        let row = raw.row(i);
        loss -= deltas[i] * heads.apply(row).log_prob(&e.scored_action) / b;
        let g = heads.log_prob_grad(row, &e.scored_action);
        d_out.row_mut(i).assign(&(g * (-deltas[i] / b)));
    }
    let grads = actor.backward(&cache, d_out);
    Ok((loss, grads))
}

/// A trained (or freshly initialized) policy with its critic.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub heads: Heads,
    pub features: Features,
    pub restrict: bool,
}

const AGENT_MAGIC: &[u8; 8] = b"UAVAGNT1";

impl Agent {
    pub fn new(scenario: &Scenario, hyper: &Hyperparams, rng: &mut ChaCha8Rng) -> Result<Self> {
        hyper.validate()?;
        let input = feature_len(scenario, hyper.features);
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat_n(hyper.hidden, hyper.hidden_layers));
        let mut actor_sizes = sizes.clone();
        actor_sizes.push(2 * scenario.slots());
        sizes.push(1);
        Ok(Self {
            actor: Mlp::new(&actor_sizes, rng)?,
            critic: Mlp::new(&sizes, rng)?,
            heads: hyper.heads(),
            features: hyper.features,
            restrict: hyper.restrict,
        })
    }

    pub fn check_scenario(&self, scenario: &Scenario) -> Result<()> {
        let want = feature_len(scenario, self.features);
        if self.actor.input_dim() != want || self.actor.output_dim() != 2 * scenario.slots() {
            return Err(Error::Contract(format!(
                "agent built for {} features / {} outputs, scenario needs {want} / {}",
                self.actor.input_dim(),
                self.actor.output_dim(),
                2 * scenario.slots()
            )));
        }
        Ok(())
    }

    pub fn policy(&self, state: &Array1<f64>) -> Result<PolicyOutput> {
        Ok(self
            .heads
            .apply(self.actor.forward_one(state.view())?.view()))
    }

    pub fn value(&self, state: &Array1<f64>) -> Result<f64> {
        Ok(self.critic.forward_one(state.view())?[0])
    }

    /// Groups the action range is quantized onto at `state`.
    pub fn active_groups(&self, state: &EnvState, scenario: &Scenario) -> Vec<u32> {
        if state.at_dock(scenario) {
            return Vec::new();
        }
        let n = state.pointer();
        if self.restrict {
            restrict_groups(state.user_residual(n))
        } else {
            action_order(scenario.users(n))
        }
    }

    /// Decode a continuous action into the frame assignment and the chosen
    /// 1-based indices. An empty active set idles the frame.
    pub fn decode(&self, raw: &[f64], active: &[u32]) -> Result<(Vec<Option<u32>>, Vec<usize>)> {
        if active.is_empty() {
            return Ok((vec![None; raw.len()], vec![0; raw.len()]));
        }
        let idx = raw
            .iter()
            .map(|&a| map_action(a, self.heads.kappa, active.len()))
            .collect::<Result<Vec<_>>>()?;
        Ok((idx.iter().map(|&i| Some(active[i - 1])).collect(), idx))
    }

    /// Deterministic action: the clipped mean, quantized.
    pub fn act_greedy(&self, state: &EnvState, scenario: &Scenario) -> Result<Vec<Option<u32>>> {
        let s = encode_state(state, scenario, self.features);
        let pi = self.policy(&s)?;
        let active = self.active_groups(state, scenario);
        Ok(self
            .decode(&greedy_action(&pi, self.heads.kappa), &active)?
            .0)
    }

    /// Sampled action.
    pub fn act_stochastic(
        &self,
        state: &EnvState,
        scenario: &Scenario,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Option<u32>>> {
        let s = encode_state(state, scenario, self.features);
        let pi = self.policy(&s)?;
        let active = self.active_groups(state, scenario);
        Ok(self
            .decode(&sample_action(&pi, self.heads.kappa, rng), &active)?
            .0)
    }

    /// Play one episode on the channel realization of `seed` with the
    /// greedy policy.
    pub fn greedy_rollout(
        &self,
        scenario: &Scenario,
        seed: u64,
    ) -> Result<(Vec<FramePlan>, EnvState)> {
        self.check_scenario(scenario)?;
        let (plans, _, end) =
            crate::env::rollout(scenario, seed, |st| self.act_greedy(st, scenario))?;
        Ok((plans, end))
    }

    /// Play one episode with sampled actions.
    pub fn stochastic_rollout(
        &self,
        scenario: &Scenario,
        seed: u64,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Vec<FramePlan>, EnvState)> {
        self.check_scenario(scenario)?;
        let (plans, _, end) =
            crate::env::rollout(scenario, seed, |st| self.act_stochastic(st, scenario, rng))?;
        Ok((plans, end))
    }

    /// Binary layout (little-endian): magic `UAVAGNT1`; `u64` feature mode,
    /// restriction flag and fixed-variance flag; `f64` kappa, var_min and
    /// var_max; then the actor and the critic as written by
    /// [`Mlp::write_to`].
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(AGENT_MAGIC)?;
        let features: u64 = match self.features {
            Features::Compact => 0,
            Features::FullTable => 1,
        };
        for v in [
            features,
            self.restrict as u64,
            self.heads.fixed_variance as u64,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [self.heads.kappa, self.heads.var_min, self.heads.var_max] {
            w.write_all(&v.to_le_bytes())?;
        }
        self.actor.write_to(w)?;
        self.critic.write_to(w)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != AGENT_MAGIC {
            return Err(Error::Parse("not an agent parameter file".into()));
        }
        let features = match mlp::read_u64(r)? {
            0 => Features::Compact,
            1 => Features::FullTable,
            v => return Err(Error::Parse(format!("unknown feature mode {v}"))),
        };
        let restrict = mlp::read_u64(r)? != 0;
        let fixed_variance = mlp::read_u64(r)? != 0;
        let heads = Heads {
            kappa: mlp::read_f64(r)?,
            var_min: mlp::read_f64(r)?,
            var_max: mlp::read_f64(r)?,
            fixed_variance,
        };
        heads
            .validate()
            .map_err(|e| Error::Parse(format!("bad policy heads: {e}")))?;
        let actor = Mlp::read_from(r)?;
        let critic = Mlp::read_from(r)?;
        if actor.input_dim() != critic.input_dim() || critic.output_dim() != 1 {
            return Err(Error::Parse("actor and critic shapes disagree".into()));
        }
        Ok(Self {
            actor,
            critic,
            heads,
            features,
            restrict,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Totals of one training episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub reward: f64,
    pub energy_j: f64,
    pub delivered_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub agent: Agent,
    pub curve: Vec<EpisodeStats>,
    /// Set when training stopped on a non-finite loss or gradient.
    pub diverged: Option<String>,
}

/// Channel seed of training episode `episode`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    let mut z = seed ^ (episode as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31) ^ 0x7472_6169_6e00_0000
}

/// Learner state: the agent, its optimizers, the memory and the RNG.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub agent: Agent,
    pub hyper: Hyperparams,
    actor_opt: Adam,
    critic_opt: Adam,
    memory: ReplayMemory,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(scenario: &Scenario, hyper: Hyperparams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agent = Agent::new(scenario, &hyper, &mut rng)?;
        Ok(Self {
            actor_opt: Adam::new(&agent.actor, hyper.alpha_actor),
            critic_opt: Adam::new(&agent.critic, hyper.alpha_critic),
            memory: ReplayMemory::new(hyper.memory),
            agent,
            hyper,
            rng,
        })
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    /// One Adam step for the critic and the actor on a sampled batch.
    /// Returns the critic loss.
    pub fn update(&mut self) -> Result<f64> {
        let batch = self.memory.sample(self.hyper.batch, &mut self.rng);
        let (c_loss, c_grads, deltas) =
            critic_loss_grad(&self.agent.critic, &batch, self.hyper.gamma)?;
        let weights: Vec<f64> = match self.hyper.td {
            TdMode::Recomputed => deltas,
            TdMode::Stored => batch.iter().map(|e| e.td_at_store).collect(),
        };
        let (a_loss, a_grads) =
            actor_loss_grad(&self.agent.actor, &self.agent.heads, &batch, &weights)?;
        if !(c_loss.is_finite() && c_grads.is_finite()) {
            return Err(Error::Diverged(format!("critic loss {c_loss}")));
        }
        if !(a_loss.is_finite() && a_grads.is_finite()) {
            return Err(Error::Diverged(format!("actor loss {a_loss}")));
        }
        self.critic_opt.step(&mut self.agent.critic, &c_grads);
        self.actor_opt.step(&mut self.agent.actor, &a_grads);
        Ok(c_loss)
    }

    /// Play one training episode, updating after every frame once the
    /// memory holds a full batch.
    pub fn episode(
        &mut self,
        scenario: &Scenario,
        episode: usize,
        seed: u64,
    ) -> Result<EpisodeStats> {
        let mut env = new_episode(scenario, episode_seed(seed, episode));
        let mut total_reward = 0.0;
        let mut energy = 0.0;
        let features = self.agent.features;
        let mut s = encode_state(&env, scenario, features);
        while !env.is_done(scenario) {
            let pi = self.agent.policy(&s)?;
            let drawn = sample_gaussian(&pi, &mut self.rng);
            let raw = clip_action(&drawn, self.agent.heads.kappa);
            let scored_action = match self.hyper.score_point {
                ScorePoint::PreClip => drawn,
                ScorePoint::Clipped => raw.clone(),
            };
            let active = self.agent.active_groups(&env, scenario);
            let (slots, action) = self.agent.decode(&raw, &active)?;
            let out = env.frame_step(scenario, &slots)?;
            let r = reward(
                out.delivered_total / self.hyper.data_unit_bits,
                out.energy_j(),
                self.hyper.reward,
                self.hyper.epsilon,
            );
            let next = encode_state(&env, scenario, features);
            let terminal = env.is_done(scenario);
            let td_at_store = match self.hyper.td {
                TdMode::Recomputed => 0.0,
                TdMode::Stored => td_error(
                    self.agent.value(&s)?,
                    self.agent.value(&next)?,
                    r,
                    self.hyper.gamma,
                    terminal,
                ),
            };
            total_reward += r;
            energy += out.energy_j();
            self.memory.push(Experience {
                state: std::mem::replace(&mut s, next.clone()),
                raw_action: raw,
                scored_action,
                action,
                reward: r,
                next_state: next,
                terminal,
                td_at_store,
            });
            if self.memory.len() >= self.hyper.batch.max(self.hyper.warmup) {
                self.update()?;
            }
        }
        Ok(EpisodeStats {
            episode,
            reward: total_reward,
            energy_j: energy,
            delivered_ratio: env.delivered_ratio(scenario),
        })
    }
}

/// Train for `hyper.episodes` episodes. A non-finite loss stops training
/// early and is reported in [`TrainReport::diverged`].
pub fn train(scenario: &Scenario, hyper: &Hyperparams, seed: u64) -> Result<TrainReport> {
    let mut trainer = Trainer::new(scenario, hyper.clone(), seed)?;
    let mut curve = Vec::with_capacity(hyper.episodes);
    let mut diverged = None;
    for ep in 0..hyper.episodes {
        match trainer.episode(scenario, ep, seed) {
            Ok(stats) => {
                log::debug!(
                    "episode {ep}: reward {:.4} energy {:.4} J delivered {:.3}",
                    stats.reward,
                    stats.energy_j,
                    stats.delivered_ratio
                );
                curve.push(stats);
            }
            Err(Error::Diverged(msg)) => {
                log::warn!("training stopped at episode {ep}: {msg}");
                diverged = Some(format!("episode {ep}: {msg}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TrainReport {
        agent: trainer.agent,
        curve,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group;

    fn small() -> (Scenario, Hyperparams) {
        let mut s = Scenario::with_defaults(vec![vec![4e5, 3e5], vec![5e5]], 8).unwrap();
        s.radio.slots_per_frame = 3;
        let h = Hyperparams {
            hidden: 16,
            batch: 8,
            warmup: 0,
            episodes: 5,
            ..Hyperparams::default()
        };
        (s, h)
    }

    #[test]
    fn reward_values() {
        let r = reward(20_000.0, 0.01, RewardVariant::DataPerEnergy, 1.2);
        let oracle = 20_000.0 * (1.2 * 100f64.ln()).exp();
        assert!((r - oracle).abs() < 1e-6 * oracle);
        assert!((r - 5.024e6).abs() < 1e3);
        assert_eq!(reward(0.0, 0.3, RewardVariant::DataPerEnergy, 1.2), 0.0);
        assert_eq!(reward(0.0, 0.5, RewardVariant::NegativeEnergy, 1.2), -0.5);
        assert_eq!(reward(1.0, 0.25, RewardVariant::InverseEnergy, 1.2), 4.0);
        assert_eq!(reward(0.0, 0.0, RewardVariant::DataPerEnergy, 1.2), 0.0);
    }

    #[test]
    fn td_values() {
        assert!((td_error(2.0, 3.0, 1.0, 0.9, false) - 1.7).abs() < 1e-12);
        assert_eq!(td_error(1.0, 5.0, 1.0, 0.9, true), 0.0);
        assert_eq!(td_error(0.0, 0.0, 0.7, 0.9, false), 0.7);
    }

    #[test]
    fn zero_episodes_returns_initial_agent() {
        let (s, mut h) = small();
        h.episodes = 0;
        let rep = train(&s, &h, 9).unwrap();
        let fresh = Trainer::new(&s, h, 9).unwrap().agent;
        assert_eq!(rep.agent, fresh);
        assert!(rep.curve.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let (s, h) = small();
        let a = train(&s, &h, 3).unwrap();
        let b = train(&s, &h, 3).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.agent, b.agent);
        assert_eq!(a.curve.len(), 5);
        assert!(a.agent.actor.is_finite());
    }

    #[test]
    fn stored_td_mode_trains() {
        let (s, mut h) = small();
        h.td = TdMode::Stored;
        let rep = train(&s, &h, 1).unwrap();
        assert!(rep.diverged.is_none());
        assert_eq!(rep.curve.len(), 5);
    }

    #[test]
    fn greedy_action_is_repeatable_and_valid() {
        let (s, h) = small();
        let agent = train(&s, &h, 4).unwrap().agent;
        let env = new_episode(&s, 17);
        let a = agent.act_greedy(&env, &s).unwrap();
        assert_eq!(a, agent.act_greedy(&env, &s).unwrap());
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|g| g.is_some_and(|g| (1..=3).contains(&g))));
        let (plans, end) = agent.greedy_rollout(&s, 17).unwrap();
        assert!(!plans.is_empty());
        assert!(end.is_done(&s));
    }

    #[test]
    fn restricted_range_shrinks_during_service() {
        let (s, h) = small();
        let agent = train(&s, &h, 2).unwrap().agent;
        let mut env = new_episode(&s, 5);
        let mut last: Option<(usize, usize)> = None;
        while !env.is_done(&s) {
            let active = agent.active_groups(&env, &s);
            let n = env.pointer();
            for &g in &active {
                for k in group::members(g) {
                    assert!(env.user_residual(n)[k] > 0.0);
                }
            }
            if let Some((c, len)) = last {
                if c == n {
                    assert!(active.len() <= len);
                }
            }
            last = Some((n, active.len()));
            let a = agent.act_greedy(&env, &s).unwrap();
            env.frame_step(&s, &a).unwrap();
        }
    }

    #[test]
    fn empty_active_set_idles() {
        let (s, h) = small();
        let agent = Trainer::new(&s, h, 0).unwrap().agent;
        let (slots, _) = agent.decode(&[0.1, -0.3, 1.0], &[]).unwrap();
        assert_eq!(slots, vec![None; 3]);
    }

    #[test]
    fn agent_file_round_trip() {
        let (s, mut h) = small();
        h.deterministic = true;
        h.restrict = false;
        let agent = Trainer::new(&s, h, 6).unwrap().agent;
        let mut buf = Vec::new();
        agent.write_to(&mut buf).unwrap();
        let back = Agent::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, agent);
        buf[0] = b'X';
        assert!(Agent::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn duplicated_sample_gives_same_gradient_direction() {
        let (s, h) = small();
        let t = Trainer::new(&s, h, 8).unwrap();
        let env = new_episode(&s, 0);
        let st = encode_state(&env, &s, Features::Compact);
        let e = Experience {
            state: st.clone(),
            raw_action: vec![0.5, -0.2, 1.0],
            scored_action: vec![0.5, -0.2, 1.0],
            action: vec![2, 1, 3],
            reward: 3.0,
            next_state: st,
            terminal: false,
            td_at_store: 0.0,
        };
        let (_, once, _) = critic_loss_grad(&t.agent.critic, &[&e], 0.9).unwrap();
        let (_, twice, _) = critic_loss_grad(&t.agent.critic, &[&e, &e], 0.9).unwrap();
        for (a, b) in once.flat().iter().zip(twice.flat()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rep = check_loss_gradients(&mut rng, 50);
        assert!(rep.worst_actor <= 1e-4, "{rep:?}");
        assert!(rep.worst_critic <= 1e-4, "{rep:?}");
    }
}
