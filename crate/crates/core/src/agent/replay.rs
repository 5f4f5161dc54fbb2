use std::collections::VecDeque;

use ndarray::Array1;
use rand::seq::index;
use rand::Rng;

/// One stored transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Array1<f64>,
    /// Clipped sampled action, one entry per slot.
    pub raw_action: Vec<f64>,
    /// Point at which the policy log-density is scored.
    pub scored_action: Vec<f64>,
    /// Group index chosen per slot (1-based within the active list).
    pub action: Vec<usize>,
    pub reward: f64,
    pub next_state: Array1<f64>,
    pub terminal: bool,
    /// TD error computed when the transition was played.
    pub td_at_store: f64,
}

/// FIFO memory with uniform sampling without replacement.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.items.get(i)
    }

    /// `min(size, len)` distinct transitions chosen uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Vec<&Experience> {
        let amount = size.min(self.items.len());
        index::sample(rng, self.items.len(), amount)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp(r: f64) -> Experience {
        Experience {
            state: Array1::zeros(1),
            raw_action: vec![0.0],
            scored_action: vec![0.0],
            action: vec![1],
            reward: r,
            next_state: Array1::zeros(1),
            terminal: false,
            td_at_store: 0.0,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut m = ReplayMemory::new(3);
        for r in 0..5 {
            m.push(exp(r as f64));
        }
        assert_eq!(m.len(), 3);
        let kept: Vec<f64> = (0..3).map(|i| m.get(i).unwrap().reward).collect();
        assert_eq!(kept, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sample_is_without_replacement() {
        let mut m = ReplayMemory::new(10_000);
        for r in 0..100 {
            m.push(exp(r as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = m.sample(64, &mut rng);
        let mut rewards: Vec<i64> = batch.iter().map(|e| e.reward as i64).collect();
        rewards.sort();
        rewards.dedup();
        assert_eq!(rewards.len(), 64);
        assert_eq!(m.sample(500, &mut rng).len(), 100);
    }

    #[test]
    fn sampling_is_roughly_uniform() {
        let mut m = ReplayMemory::new(10);
        for r in 0..10 {
            m.push(exp(r as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut hits = [0usize; 10];
        for _ in 0..20_000 {
            for e in m.sample(3, &mut rng) {
                hits[e.reward as usize] += 1;
            }
        }
        // expected 6000 each
        assert!(hits.iter().all(|&h| (5600..6400).contains(&h)), "{hits:?}");
    }
}
