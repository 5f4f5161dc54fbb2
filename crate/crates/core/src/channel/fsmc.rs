use std::sync::Arc;

use rand::Rng;

use super::EffectiveGains;
use crate::error::{Error, Result};
use crate::group;

/// Quantization levels and the Markov transition matrix shared by every
/// effective-gain coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct FsmcModel {
    levels: Vec<f64>,
    transition: Vec<Vec<f64>>,
    cumulative: Vec<Vec<f64>>,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl FsmcModel {
    pub fn new(levels: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() || levels.len() > u8::MAX as usize {
            return Err(Error::config(
                "fsmc.levels",
                "need between 1 and 255 levels",
            ));
        }
        if levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::config(
                "fsmc.levels",
                "levels must be finite and >= 0",
            ));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(
                "fsmc.levels",
                "levels must be strictly increasing",
            ));
        }
        if transition.len() != levels.len() {
            return Err(Error::config(
                "fsmc.transition",
                format!("expected {} rows, got {}", levels.len(), transition.len()),
            ));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != levels.len() {
                return Err(Error::config(
                    "fsmc.transition",
                    format!("row {i} has {} entries", row.len()),
                ));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::config(
                    "fsmc.transition",
                    format!("row {i} has a negative entry"),
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::config(
                    "fsmc.transition",
                    format!("row {i} sums to {sum}, not 1"),
                ));
            }
        }
        let cumulative = transition
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            levels,
            transition,
            cumulative,
        })
    }

    /// Nine evenly spaced levels 0, 0.3, ..., 2.4.
    pub fn standard_levels() -> Vec<f64> {
        (0..9).map(|i| 0.3 * i as f64).collect()
    }

    /// Neighbour-only chain: stay with `stay`, move to each neighbour with
    /// `step`; boundary states keep the missing neighbour's mass.
    pub fn birth_death(levels: Vec<f64>, stay: f64, step: f64) -> Result<Self> {
        let n = levels.len();
        let transition = (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                if n == 1 {
                    row[0] = 1.0;
                    return row;
                }
                row[i] = stay;
                if i > 0 {
                    row[i - 1] = step;
                } else {
                    row[i] += step;
                }
                if i + 1 < n {
                    row[i + 1] = step;
                } else {
                    row[i] += step;
                }
                row
            })
            .collect();
        Self::new(levels, transition)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn top_level(&self) -> f64 {
        *self.levels.last().expect("nonempty levels")
    }

    fn next_state(&self, current: u8, u: f64) -> u8 {
        let row = &self.cumulative[current as usize];
        row.iter().position(|&c| u < c).unwrap_or(row.len() - 1) as u8
    }
}

impl Default for FsmcModel {
    fn default() -> Self {
        Self::birth_death(Self::standard_levels(), 0.4, 0.3).expect("valid default chain")
    }
}

/// Index of the level nearest to `raw` (ties go to the lower index).
pub fn fsmc_quantize(raw: f64, levels: &[f64]) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, l) in levels.iter().enumerate() {
        let d = (raw - l).abs();
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
struct ClusterStates {
    users: usize,
    /// Start of each group's `K_g x K_g` block, indexed by group mask.
    offsets: Vec<usize>,
    states: Vec<u8>,
}

impl ClusterStates {
    fn layout(users: usize) -> Vec<usize> {
        let groups = 1usize << users;
        let mut offsets = Vec::with_capacity(groups + 1);
        let mut acc = 0;
        for mask in 0..groups {
            offsets.push(acc);
            let k = (mask as u32).count_ones() as usize;
            acc += k * k;
        }
        offsets.push(acc);
        offsets
    }
}

/// Level index of every effective-gain coefficient of every group of every
/// cluster, evolving as independent Markov chains between frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FsmcChannelTable {
    model: Arc<FsmcModel>,
    clusters: Vec<ClusterStates>,
}

impl FsmcChannelTable {
    /// All coefficients drawn uniformly over the levels.
    pub fn random<R: Rng + ?Sized>(model: Arc<FsmcModel>, users: &[usize], rng: &mut R) -> Self {
        let n_levels = model.num_levels();
        let clusters = users
            .iter()
            .map(|&k| {
                let offsets = ClusterStates::layout(k);
                let len = *offsets.last().unwrap();
                let states = (0..len)
                    .map(|_| rng.random_range(0..n_levels) as u8)
                    .collect();
                ClusterStates {
                    users: k,
                    offsets,
                    states,
                }
            })
            .collect();
        Self { model, clusters }
    }

    /// Every coefficient at the same level.
    pub fn constant(model: Arc<FsmcModel>, users: &[usize], level: u8) -> Result<Self> {
        if level as usize >= model.num_levels() {
            return Err(Error::Contract(format!("level {level} out of range")));
        }
        let clusters = users
            .iter()
            .map(|&k| {
                let offsets = ClusterStates::layout(k);
                let len = *offsets.last().unwrap();
                ClusterStates {
                    users: k,
                    offsets,
                    states: vec![level; len],
                }
            })
            .collect();
        Ok(Self { model, clusters })
    }

    pub fn model(&self) -> &Arc<FsmcModel> {
        &self.model
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn users(&self, cluster: usize) -> usize {
        self.clusters[cluster].users
    }

    /// Number of coefficients stored for one cluster.
    pub fn coefficient_count(&self, cluster: usize) -> usize {
        self.clusters[cluster].states.len()
    }

    /// Raw level indices of one cluster, groups in mask order, each group's
    /// block row-major.
    pub fn cluster_states(&self, cluster: usize) -> &[u8] {
        &self.clusters[cluster].states
    }

    #[inline]
    fn index(&self, cluster: usize, mask: u32, k: usize, j: usize) -> usize {
        let c = &self.clusters[cluster];
        let dim = mask.count_ones() as usize;
        debug_assert!(k < dim && j < dim);
        c.offsets[mask as usize] + k * dim + j
    }

    /// Level index of entry `(k, j)` (positions within the group).
    pub fn level(&self, cluster: usize, mask: u32, k: usize, j: usize) -> u8 {
        self.clusters[cluster].states[self.index(cluster, mask, k, j)]
    }

    pub fn set_level(
        &mut self,
        cluster: usize,
        mask: u32,
        k: usize,
        j: usize,
        level: u8,
    ) -> Result<()> {
        if level as usize >= self.model.num_levels() {
            return Err(Error::Contract(format!("level {level} out of range")));
        }
        let idx = self.index(cluster, mask, k, j);
        self.clusters[cluster].states[idx] = level;
        Ok(())
    }

    #[inline]
    pub fn beta(&self, cluster: usize, mask: u32, k: usize, j: usize) -> f64 {
        self.model.levels[self.level(cluster, mask, k, j) as usize]
    }

    /// Dequantized gain table of one group.
    pub fn gains(&self, cluster: usize, mask: u32) -> EffectiveGains {
        let dim = mask.count_ones() as usize;
        EffectiveGains::from_fn(dim, |k, j| self.beta(cluster, mask, k, j))
    }

    /// Overwrite a group's levels by quantizing real-valued gains.
    pub fn quantize_group(&mut self, cluster: usize, mask: u32, gains: &EffectiveGains) {
        let dim = group::size(mask);
        debug_assert_eq!(dim, gains.dim());
        for k in 0..dim {
            for j in 0..dim {
                let level = fsmc_quantize(gains.get(k, j), &self.model.levels) as u8;
                let idx = self.index(cluster, mask, k, j);
                self.clusters[cluster].states[idx] = level;
            }
        }
    }

    /// Advance every coefficient by one independent Markov transition.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let model = Arc::clone(&self.model);
        for c in &mut self.clusters {
            for s in &mut c.states {
                let u: f64 = rng.random();
                *s = model.next_state(*s, u);
            }
        }
    }

    pub fn stepped<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut next = self.clone();
        next.step(rng);
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quantize_examples() {
        let levels = FsmcModel::standard_levels();
        assert_eq!(fsmc_quantize(0.0, &levels), 0);
        assert_eq!(fsmc_quantize(0.44, &levels), 1);
        assert_eq!(fsmc_quantize(99.0, &levels), 8);
        // exact midpoint goes low
        assert_eq!(fsmc_quantize(0.15, &[0.0, 0.3]), 0);
    }

    #[test]
    fn quantize_is_idempotent_on_levels() {
        let levels = FsmcModel::standard_levels();
        for (i, l) in levels.iter().enumerate() {
            assert_eq!(fsmc_quantize(*l, &levels), i);
        }
    }

    #[test]
    fn default_chain_rows_sum_to_one() {
        let m = FsmcModel::default();
        assert_eq!(m.num_levels(), 9);
        for row in m.transition() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        assert_eq!(m.transition()[0][0], 0.7);
        assert_eq!(m.transition()[4][4], 0.4);
        assert_eq!(m.transition()[4][5], 0.3);
    }

    #[test]
    fn rejects_bad_matrices() {
        let levels = vec![0.0, 1.0];
        assert!(FsmcModel::new(levels.clone(), vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(FsmcModel::new(levels.clone(), vec![vec![1.0, 0.0]]).is_err());
        assert!(FsmcModel::new(vec![1.0, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(FsmcModel::new(levels, vec![vec![1.5, -0.5], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn identity_chain_is_frozen() {
        let levels = FsmcModel::standard_levels();
        let id: Vec<Vec<f64>> = (0..9)
            .map(|i| (0..9).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let model = Arc::new(FsmcModel::new(levels, id).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let table = FsmcChannelTable::random(model, &[3, 2], &mut rng);
        assert_eq!(table.stepped(&mut rng), table);
    }

    #[test]
    fn layout_sizes() {
        let model = Arc::new(FsmcModel::default());
        let t = FsmcChannelTable::constant(model, &[1, 4], 0).unwrap();
        assert_eq!(t.coefficient_count(0), 1);
        // sum over subsets of |g|^2 = K (K + 1) 2^(K - 2)
        assert_eq!(t.coefficient_count(1), 4 * 5 * 4);
    }

    #[test]
    fn empirical_transitions_match() {
        let model = Arc::new(FsmcModel::default());
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts = vec![vec![0usize; 9]; 9];
        let mut state = 4u8;
        for _ in 0..100_000 {
            let u: f64 = rng.random();
            let next = model.next_state(state, u);
            counts[state as usize][next as usize] += 1;
            state = next;
        }
        for (i, row) in counts.iter().enumerate() {
            let total: usize = row.iter().sum();
            for (j, c) in row.iter().enumerate() {
                let freq = *c as f64 / total as f64;
                assert!(
                    (freq - model.transition()[i][j]).abs() < 0.02,
                    "({i},{j}) {freq}"
                );
            }
        }
    }

    #[test]
    fn table_step_matches_frequencies() {
        // Same check through the public table step on a single coefficient.
        let model = Arc::new(FsmcModel::default());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut table = FsmcChannelTable::constant(Arc::clone(&model), &[1], 4).unwrap();
        let mut counts = vec![vec![0usize; 9]; 9];
        for _ in 0..100_000 {
            let before = table.level(0, 1, 0, 0);
            table.step(&mut rng);
            counts[before as usize][table.level(0, 1, 0, 0) as usize] += 1;
        }
        for (i, row) in counts.iter().enumerate() {
            let total: usize = row.iter().sum();
            if total < 2000 {
                continue;
            }
            for (j, c) in row.iter().enumerate() {
                let freq = *c as f64 / total as f64;
                assert!((freq - model.transition()[i][j]).abs() < 0.02);
            }
        }
    }

    #[test]
    fn step_preserves_level_membership() {
        let model = Arc::new(FsmcModel::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut table = FsmcChannelTable::random(Arc::clone(&model), &[3, 3], &mut rng);
        for _ in 0..50 {
            table.step(&mut rng);
            for n in 0..2 {
                assert!(table.cluster_states(n).iter().all(|&s| (s as usize) < 9));
            }
        }
        let g = table.gains(0, 0b101);
        assert!(g.as_slice().iter().all(|b| model.levels().contains(b)));
    }
}
