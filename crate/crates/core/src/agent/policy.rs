use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::env::{EnvState, Scenario};
use crate::error::{Error, Result};
use crate::group;

/// How the per-cluster channel tables enter the state vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Features {
    /// Singleton gains of every user plus the off-diagonal gains of the full
    /// group: `K + K(K-1)` values per cluster.
    #[default]
    Compact,
    /// Every coefficient of every group: `sum_g |g|^2` values per cluster.
    FullTable,
}

/// Length of the state vector for `scenario`.
pub fn feature_len(scenario: &Scenario, features: Features) -> usize {
    let n = scenario.num_clusters();
    let channel: usize = (0..n)
        .map(|c| {
            let k = scenario.users(c);
            match features {
                Features::Compact => k + k * (k - 1),
                Features::FullTable => group::all(k).map(|g| group::size(g).pow(2)).sum(),
            }
        })
        .sum();
    channel + n + n + 1
}

/// State vector: channel levels scaled by the top FSMC level, residual
/// demand per cluster as a fraction of its initial demand, and a one-hot
/// position over the clusters and the dock.
pub fn encode_state(state: &EnvState, scenario: &Scenario, features: Features) -> Array1<f64> {
    let n = scenario.num_clusters();
    let table = state.table();
    let top = scenario.fsmc.top_level();
    let scale = if top > 0.0 { 1.0 / top } else { 0.0 };
    let mut out = Vec::with_capacity(feature_len(scenario, features));
    for c in 0..n {
        let k = scenario.users(c);
        match features {
            Features::Compact => {
                for u in 0..k {
                    out.push(table.beta(c, 1 << u, 0, 0) * scale);
                }
                let full = group::catalog_size(k) as u32;
                for i in 0..k {
                    for j in (0..k).filter(|&j| j != i) {
                        out.push(table.beta(c, full, i, j) * scale);
                    }
                }
            }
            Features::FullTable => {
                for g in group::all(k) {
                    let d = group::size(g);
                    for i in 0..d {
                        for j in 0..d {
                            out.push(table.beta(c, g, i, j) * scale);
                        }
                    }
                }
            }
        }
    }
    for c in 0..n {
        let b0 = state.initial_residual(c);
        out.push(if b0 > 0.0 {
            state.cluster_residual(c) / b0
        } else {
            0.0
        });
    }
    let pos = state.pointer().min(n);
    out.extend((0..=n).map(|i| if i == pos { 1.0 } else { 0.0 }));
    Array1::from(out)
}

/// Output squashing of the actor: means in `[-kappa, kappa]`, variances in
/// `[var_min, var_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Heads {
    pub kappa: f64,
    pub var_min: f64,
    pub var_max: f64,
    /// Pin every variance to `var_min` (the deterministic-policy ablation).
    pub fixed_variance: bool,
}

impl Default for Heads {
    fn default() -> Self {
        Self {
            kappa: 2.0,
            var_min: 0.01,
            var_max: 1.0,
            fixed_variance: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Heads {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::config("agent.kappa", "must be > 0"));
        }
        if !(self.var_min > 0.0 && self.var_min <= self.var_max && self.var_max.is_finite()) {
            return Err(Error::config(
                "agent.var_min",
                "need 0 < var_min <= var_max",
            ));
        }
        Ok(())
    }

    /// Map the `2I` raw network outputs to means and variances.
    pub fn apply(&self, raw: ArrayView1<f64>) -> PolicyOutput {
        let slots = raw.len() / 2;
        let mean = (0..slots)
            .map(|i| self.kappa * (2.0 * sigmoid(raw[i]) - 1.0))
            .collect();
        let var = (0..slots)
            .map(|i| {
                if self.fixed_variance {
                    self.var_min
                } else {
                    self.var_min + (self.var_max - self.var_min) * sigmoid(raw[slots + i])
                }
            })
            .collect();
        PolicyOutput { mean, var }
    }

    /// Gradient of `log pi(a | raw)` with respect to the raw outputs.
    pub fn log_prob_grad(&self, raw: ArrayView1<f64>, action: &[f64]) -> Array1<f64> {
        let slots = raw.len() / 2;
        let mut g = Array1::zeros(raw.len());
        for i in 0..slots {
            let s = sigmoid(raw[i]);
            let mu = self.kappa * (2.0 * s - 1.0);
            let sv = sigmoid(raw[slots + i]);
            let var = if self.fixed_variance {
                self.var_min
            } else {
                self.var_min + (self.var_max - self.var_min) * sv
            };
            let diff = action[i] - mu;
            g[i] = diff / var * 2.0 * self.kappa * s * (1.0 - s);
            if !self.fixed_variance {
                let d_var = -0.5 / var + diff * diff / (2.0 * var * var);
                g[slots + i] = d_var * (self.var_max - self.var_min) * sv * (1.0 - sv);
            }
        }
        g
    }
}

impl PolicyOutput {
    /// Diagonal Gaussian log-density of `action`.
    pub fn log_prob(&self, action: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.var)
            .zip(action)
            .map(|((&m, &v), &a)| {
                -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (a - m) * (a - m) / (2.0 * v)
            })
            .sum()
    }
}

/// Draw `a_i ~ N(mean_i, var_i)` without clipping.
pub fn sample_gaussian<R: Rng + ?Sized>(pi: &PolicyOutput, rng: &mut R) -> Vec<f64> {
    pi.mean
        .iter()
        .zip(&pi.var)
        .map(|(&m, &v)| {
            let z: f64 = StandardNormal.sample(rng);
            m + v.sqrt() * z
        })
        .collect()
}

pub fn clip_action(a: &[f64], kappa: f64) -> Vec<f64> {
    a.iter().map(|x| x.clamp(-kappa, kappa)).collect()
}

/// Draw `a_i ~ N(mean_i, var_i)` and clip to `[-kappa, kappa]`.
pub fn sample_action<R: Rng + ?Sized>(pi: &PolicyOutput, kappa: f64, rng: &mut R) -> Vec<f64> {
    clip_action(&sample_gaussian(pi, rng), kappa)
}

/// The mean action, clipped.
pub fn greedy_action(pi: &PolicyOutput, kappa: f64) -> Vec<f64> {
    pi.mean.iter().map(|m| m.clamp(-kappa, kappa)).collect()
}

/// The group catalog in action order: by group size, then by mask.
pub fn action_order(users: usize) -> Vec<u32> {
    let mut groups: Vec<u32> = group::all(users).collect();
    groups.sort_by_key(|&g| (g.count_ones(), g));
    groups
}

/// Groups that contain no satisfied user, in action order.
/// `residual[k] == 0` marks user `k` as satisfied.
pub fn restrict_groups(residual: &[f64]) -> Vec<u32> {
    let open = residual
        .iter()
        .enumerate()
        .filter(|(_, &b)| b > 0.0)
        .fold(0u32, |m, (k, _)| m | (1 << k));
    action_order(residual.len())
        .into_iter()
        .filter(|&g| g & !open == 0)
        .collect()
}

/// Uniform quantization of `a` in `[-kappa, kappa]` onto `1..=groups`:
/// `ceil((kappa + a) / (2 kappa / groups))`, clamped.
pub fn map_action(a: f64, kappa: f64, groups: usize) -> Result<usize> {
    if groups == 0 {
        return Err(Error::Contract("map_action with no active group".into()));
    }
    let width = 2.0 * kappa / groups as f64;
    let idx = ((kappa + a) / width).ceil();
    Ok((idx.max(1.0) as usize).min(groups))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::new_episode;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario(k: usize) -> Scenario {
        Scenario::with_defaults(vec![vec![1e6; k]; 3], 20).unwrap()
    }

    #[test]
    fn feature_length() {
        let s = scenario(4);
        assert_eq!(feature_len(&s, Features::Compact), 55);
        let e = new_episode(&s, 0);
        assert_eq!(encode_state(&e, &s, Features::Compact).len(), 55);
        assert_eq!(
            encode_state(&e, &s, Features::FullTable).len(),
            feature_len(&s, Features::FullTable)
        );
    }

    #[test]
    fn fresh_state() {
        let s = scenario(4);
        let f = encode_state(&new_episode(&s, 3), &s, Features::Compact);
        assert_eq!(f.slice(ndarray::s![48..51]).to_vec(), vec![1.0; 3]);
        assert_eq!(
            f.slice(ndarray::s![51..]).to_vec(),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn served_state_has_zero_demand() {
        let s = Scenario::with_defaults(vec![vec![1.0]], 30).unwrap();
        let mut e = new_episode(&s, 0);
        while !e.at_dock(&s) {
            e.frame_step(&s, &[Some(1); 10]).unwrap();
        }
        let f = encode_state(&e, &s, Features::Compact);
        assert_eq!(f.slice(ndarray::s![1..]).to_vec(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn zero_network_gives_mid_range() {
        let h = Heads::default();
        let pi = h.apply(Array1::zeros(6).view());
        assert_eq!(pi.mean, vec![0.0; 3]);
        assert!(pi.var.iter().all(|&v| (v - 0.505).abs() < 1e-12));
    }

    #[test]
    fn degenerate_variance_returns_mean() {
        let pi = PolicyOutput {
            mean: vec![0.3, 10.0, -5.0],
            var: vec![0.0; 3],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_action(&pi, 2.0, &mut rng), vec![0.3, 2.0, -2.0]);
    }

    #[test]
    fn standard_normal_sample_mean() {
        // pre-clip mean: use a huge kappa so nothing is clipped
        let pi = PolicyOutput {
            mean: vec![0.0],
            var: vec![1.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let sum: f64 = (0..n).map(|_| sample_action(&pi, 1e9, &mut rng)[0]).sum();
        assert!((sum / n as f64).abs() < 0.02);
    }

    #[test]
    fn restriction_counts() {
        assert_eq!(restrict_groups(&[1.0, 2.0, 3.0, 4.0]).len(), 15);
        let r = restrict_groups(&[1.0, 0.0, 3.0]);
        assert_eq!(r, vec![0b001, 0b100, 0b101]);
        assert_eq!(
            restrict_groups(&[1.0, 1.0, 1.0]),
            vec![0b001, 0b010, 0b100, 0b011, 0b101, 0b110, 0b111]
        );
        assert!(restrict_groups(&[0.0, 0.0]).is_empty());
    }

    #[test]
    fn map_action_hand_values() {
        assert_eq!(map_action(0.0, 2.0, 4).unwrap(), 2);
        assert_eq!(map_action(-2.0, 2.0, 4).unwrap(), 1);
        assert_eq!(map_action(2.0, 2.0, 4).unwrap(), 4);
        assert!(map_action(0.0, 2.0, 0).is_err());
    }

    #[test]
    fn map_action_exhaustive() {
        for g in 1..=16usize {
            let mut seen = vec![false; g + 1];
            let mut prev = 0;
            for step in -200..=200 {
                let a = step as f64 * 0.01;
                let m = map_action(a, 2.0, g).unwrap();
                assert!((1..=g).contains(&m));
                assert!(m >= prev);
                prev = m;
                seen[m] = true;
            }
            assert!(seen[1..].iter().all(|&s| s), "G = {g}");
        }
    }

    proptest! {
        #[test]
        fn restricted_groups_avoid_satisfied_users(
            residual in proptest::collection::vec(prop_oneof![Just(0.0), 1.0..5.0f64], 1..7)
        ) {
            let groups = restrict_groups(&residual);
            let open = residual.iter().filter(|&&b| b > 0.0).count();
            prop_assert_eq!(groups.len(), (1usize << open) - 1);
            for g in groups {
                for k in group::members(g) {
                    prop_assert!(residual[k] > 0.0);
                }
            }
        }

        #[test]
        fn log_prob_grad_matches_differences(
            raw in proptest::collection::vec(-2.0..2.0f64, 4),
            action in proptest::collection::vec(-2.0..2.0f64, 2),
            fixed in any::<bool>(),
        ) {
            let h = Heads { fixed_variance: fixed, ..Heads::default() };
            let raw = Array1::from(raw);
            let g = h.log_prob_grad(raw.view(), &action);
            for j in 0..4 {
                let mut up = raw.clone();
                up[j] += 1e-6;
                let mut down = raw.clone();
                down[j] -= 1e-6;
                let fd = (h.apply(up.view()).log_prob(&action)
                    - h.apply(down.view()).log_prob(&action)) / 2e-6;
                prop_assert!((fd - g[j]).abs() <= 1e-5 * (1.0 + fd.abs()));
            }
        }

        #[test]
        fn positive_advantage_pushes_mean_toward_action(
            raw_mu in -2.0..2.0f64,
            offset in 0.01..1.0f64,
        ) {
            let h = Heads::default();
            let raw = Array1::from(vec![raw_mu, 0.0]);
            let mu = h.apply(raw.view()).mean[0];
            let g = h.log_prob_grad(raw.view(), &[mu + offset]);
            prop_assert!(g[0] > 0.0);
        }
    }
}
