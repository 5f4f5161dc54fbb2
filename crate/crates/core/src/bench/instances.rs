use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{ChannelTrace, Scenario};
use crate::error::Result;

/// Demand unit of the tiny suite: a few slots of singleton service.
pub const TINY_DEMAND_UNIT_BITS: f64 = 60_000.0;

/// A random tiny instance with its frozen trace: two clusters of one to
/// three users, two slots per frame, four to six frames, demands of one to
/// five units per user.
pub fn tiny_instance(seed: u64) -> Result<(Scenario, ChannelTrace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7469_6e79);
    let demands: Vec<Vec<f64>> = (0..2)
        .map(|_| {
            let k = rng.random_range(1..=3);
            (0..k)
                .map(|_| rng.random_range(1..=5) as f64 * TINY_DEMAND_UNIT_BITS)
                .collect()
        })
        .collect();
    let frames = rng.random_range(4..=6);
    let mut s = Scenario::with_defaults(demands, frames)?;
    s.radio.slots_per_frame = 2;
    let trace = ChannelTrace::generate(&s, seed);
    Ok((s, trace))
}

/// A random tiny single-cluster instance (one to three users).
pub fn tiny_single_cluster(seed: u64, frames: usize) -> Result<(Scenario, ChannelTrace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c65_6d6d);
    let k = rng.random_range(2..=3);
    let demands = vec![(0..k)
        .map(|_| rng.random_range(1..=5) as f64 * TINY_DEMAND_UNIT_BITS)
        .collect()];
    let mut s = Scenario::with_defaults(demands, frames)?;
    s.radio.slots_per_frame = 2;
    let trace = ChannelTrace::generate(&s, seed);
    Ok((s, trace))
}
