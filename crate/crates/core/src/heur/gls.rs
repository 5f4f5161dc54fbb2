//! Guided local search for one cluster's group/timeslot assignment at a
//! fixed number of hovering frames.
//!
//! Every slot holds one choice: idle (0) or a group mask. Moves never break
//! the one-choice-per-slot structure, so only the demand rows can fail.
//! Features are (frame, group) pairs with cost equal to the group's slot
//! energy in that frame. Guided descents rank candidates by augmented
//! energy plus a weighted demand violation; after each one, a copy is
//! repaired (shortfall first, then energy) to harvest feasible solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{RateTable, Scenario, SlotTable, DEMAND_TOL};
use crate::error::{Error, Result};

const SHORTFALL_EPS: f64 = 1e-12;

/// One cluster's scheduling subproblem over a fixed block of frames.
#[derive(Debug, Clone, Copy)]
pub struct MmkpInstance<'a> {
    pub cluster: usize,
    /// Frames elapsed before the block starts.
    pub tau: usize,
    pub slots: usize,
    /// Rate tables of the block's frames.
    pub frames: &'a [SlotTable],
    pub demands: &'a [f64],
}

impl<'a> MmkpInstance<'a> {
    pub fn new(
        scenario: &'a Scenario,
        rates: &'a RateTable,
        cluster: usize,
        tau: usize,
        hover_frames: usize,
    ) -> Result<Self> {
        if cluster >= scenario.num_clusters() {
            return Err(Error::Contract(format!("no cluster {cluster}")));
        }
        if tau + hover_frames > rates.frames() {
            return Err(Error::Contract(format!(
                "frames {tau}..{} exceed the trace",
                tau + hover_frames
            )));
        }
        Ok(Self {
            cluster,
            tau,
            slots: scenario.slots(),
            frames: rates.cluster_frames(cluster, tau, hover_frames),
            demands: &scenario.demands()[cluster],
        })
    }

    pub fn hover_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn users(&self) -> usize {
        self.demands.len()
    }

    /// Choices per slot, idle included.
    pub fn choices(&self) -> usize {
        1usize << self.users()
    }

    /// Sum over users of the unmet fraction of their demand.
    pub fn shortfall(&self, delivered: &[f64]) -> f64 {
        self.demands
            .iter()
            .zip(delivered)
            .map(|(&q, &d)| {
                if q <= 0.0 || d >= q * (1.0 - DEMAND_TOL) {
                    0.0
                } else {
                    (q - d) / q
                }
            })
            .sum()
    }

    /// Communication energy and delivered bits of a slot assignment laid
    /// out frame-major (`frame * slots + slot`).
    pub fn evaluate(&self, assignment: &[u32]) -> (f64, Vec<f64>) {
        let mut delivered = vec![0.0; self.users()];
        let mut energy = 0.0;
        for (idx, &c) in assignment.iter().enumerate() {
            let table = &self.frames[idx / self.slots];
            energy += table.energy(c);
            for (d, x) in delivered.iter_mut().zip(table.data_row(c)) {
                *d += x;
            }
        }
        (energy, delivered)
    }

    /// Mean singleton-slot data of each user over the block (1 bit when
    /// the user never receives any).
    fn data_scale(&self) -> Vec<f64> {
        (0..self.users())
            .map(|k| {
                let total: f64 = self.frames.iter().map(|t| t.data(1 << k, k)).sum();
                let mean = total / self.frames.len().max(1) as f64;
                if mean > 0.0 {
                    mean
                } else {
                    1.0
                }
            })
            .collect()
    }

    fn mean_slot_energy(&self) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for table in self.frames {
            for c in 1..self.choices() as u32 {
                sum += table.energy(c);
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlsConfig {
    /// Local-search descents (each followed by a penalty update).
    pub iterations: usize,
    /// Penalty weight as a multiple of the mean per-slot energy.
    pub penalty_factor: f64,
    /// Weight of missing demand during guided descents, as a multiple of
    /// the mean per-slot energy per slot's worth of missing data.
    pub violation_factor: f64,
    /// Restart from a randomized construction after this many descents
    /// without a new best feasible assignment.
    pub restart_after: usize,
    pub seed: u64,
}

impl Default for GlsConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            penalty_factor: 0.3,
            violation_factor: 3.0,
            restart_after: 200,
            seed: 0,
        }
    }
}

/// Result of [`mmkp_gls`].
#[derive(Debug, Clone, PartialEq)]
pub struct MmkpSolution {
    /// Choice per slot, frame-major; 0 is idle.
    pub assignment: Vec<u32>,
    pub slots: usize,
    pub comm_j: f64,
    /// Bits per user (not capped).
    pub delivered: Vec<f64>,
    pub shortfall: f64,
    pub feasible: bool,
}

impl MmkpSolution {
    /// Groups of frame `f`, `None` for idle slots.
    pub fn frame(&self, f: usize) -> Vec<Option<u32>> {
        self.assignment[f * self.slots..(f + 1) * self.slots]
            .iter()
            .map(|&c| (c != 0).then_some(c))
            .collect()
    }

    pub fn hover_frames(&self) -> usize {
        self.assignment.len().checked_div(self.slots).unwrap_or(0)
    }
}

/// How candidate assignments are ranked during a descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ranking {
    /// Augmented energy plus a weighted demand violation, so that the
    /// search can pass through infeasible assignments.
    Guided,
    /// Demand shortfall first, then true energy.
    Repair,
}

/// Search state with incrementally maintained objective terms.
#[derive(Debug, Clone)]
pub struct GlsState<'a> {
    inst: MmkpInstance<'a>,
    assignment: Vec<u32>,
    delivered: Vec<f64>,
    energy: f64,
    shortfall: f64,
    /// Penalty count per (frame, choice).
    penalties: Vec<u32>,
    penalty_weight: f64,
    /// Sum of the penalty counts of every occupied slot.
    active_penalty: f64,
    /// Per-user data scale of the guided violation term.
    data_scale: Vec<f64>,
    violation_weight: f64,
    best: Option<(f64, Vec<u32>)>,
}

/// Objective terms of a candidate.
#[derive(Debug, Clone, Copy)]
struct Key {
    shortfall: f64,
    violation: f64,
    energy: f64,
    penalty: f64,
}

impl<'a> GlsState<'a> {
    pub fn new(inst: MmkpInstance<'a>, assignment: Vec<u32>, penalty_weight: f64) -> Result<Self> {
        let slots = inst.hover_frames() * inst.slots;
        if assignment.len() != slots {
            return Err(Error::Contract(format!(
                "assignment has {} slots, the block has {slots}",
                assignment.len()
            )));
        }
        if let Some(&c) = assignment.iter().find(|&&c| c as usize >= inst.choices()) {
            return Err(Error::Contract(format!("choice {c} is not a group")));
        }
        let (energy, delivered) = inst.evaluate(&assignment);
        let shortfall = inst.shortfall(&delivered);
        let mut state = Self {
            inst,
            assignment,
            delivered,
            energy,
            shortfall,
            penalties: vec![0; inst.hover_frames() * inst.choices()],
            penalty_weight,
            active_penalty: 0.0,
            data_scale: inst.data_scale(),
            violation_weight: 0.0,
            best: None,
        };
        state.record_best();
        Ok(state)
    }

    /// Weight of the guided violation term, in joules per slot-equivalent
    /// of missing data.
    pub fn set_violation_weight(&mut self, weight: f64) {
        self.violation_weight = weight;
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn shortfall(&self) -> f64 {
        self.shortfall
    }

    pub fn is_feasible(&self) -> bool {
        self.shortfall == 0.0
    }

    pub fn penalty(&self, frame: usize, choice: u32) -> u32 {
        self.penalties[frame * self.inst.choices() + choice as usize]
    }

    /// Energy plus weighted penalties of the occupied features.
    pub fn augmented(&self) -> f64 {
        self.energy + self.penalty_weight * self.active_penalty
    }

    /// [`Self::augmented`] recomputed from scratch.
    pub fn recompute_augmented(&self) -> f64 {
        let (energy, _) = self.inst.evaluate(&self.assignment);
        let penalty: f64 = self
            .assignment
            .iter()
            .enumerate()
            .map(|(idx, &c)| self.feature_penalty(idx / self.inst.slots, c))
            .sum();
        energy + self.penalty_weight * penalty
    }

    /// Best feasible assignment seen so far and its energy.
    pub fn best(&self) -> Option<(f64, &[u32])> {
        self.best.as_ref().map(|(e, a)| (*e, a.as_slice()))
    }

    fn record_best(&mut self) -> bool {
        if !self.is_feasible() {
            return false;
        }
        let better = self
            .best
            .as_ref()
            .is_none_or(|(e, _)| self.energy < *e - energy_eps(*e));
        if better {
            self.best = Some((self.energy, self.assignment.clone()));
        }
        better
    }

    fn feature_penalty(&self, frame: usize, choice: u32) -> f64 {
        if choice == 0 {
            0.0
        } else {
            f64::from(self.penalty(frame, choice))
        }
    }

    /// Objective terms after replacing the choices of the listed slots.
    fn key_after(&self, changes: &[(usize, u32)]) -> Key {
        let mut energy = self.energy;
        let mut penalty = self.active_penalty;
        for &(idx, c) in changes {
            let f = idx / self.inst.slots;
            let old = self.assignment[idx];
            let table = &self.inst.frames[f];
            energy += table.energy(c) - table.energy(old);
            penalty += self.feature_penalty(f, c) - self.feature_penalty(f, old);
        }
        let mut shortfall = 0.0;
        let mut violation = 0.0;
        for (k, &q) in self.inst.demands.iter().enumerate() {
            let mut d = self.delivered[k];
            for &(idx, c) in changes {
                let table = &self.inst.frames[idx / self.inst.slots];
                d += table.data(c, k) - table.data(self.assignment[idx], k);
            }
            if q > 0.0 && d < q * (1.0 - DEMAND_TOL) {
                shortfall += (q - d) / q;
                violation += (q - d) / self.data_scale[k];
            }
        }
        Key {
            shortfall,
            violation,
            energy,
            penalty,
        }
    }

    fn current_key(&self) -> Key {
        self.key_after(&[])
    }

    /// Replace the choice of slot `idx` (frame-major).
    pub fn set(&mut self, idx: usize, choice: u32) {
        let f = idx / self.inst.slots;
        let old = self.assignment[idx];
        let table = &self.inst.frames[f];
        self.energy += table.energy(choice) - table.energy(old);
        self.active_penalty += self.feature_penalty(f, choice) - self.feature_penalty(f, old);
        for ((d, new), prev) in self
            .delivered
            .iter_mut()
            .zip(table.data_row(choice))
            .zip(table.data_row(old))
        {
            *d += new - prev;
        }
        self.assignment[idx] = choice;
        self.shortfall = self.inst.shortfall(&self.delivered);
    }

    /// Whether `a` ranks strictly before `b`.
    fn better(&self, ranking: Ranking, a: &Key, b: &Key) -> bool {
        match ranking {
            Ranking::Guided => {
                let score = |k: &Key| {
                    k.energy + self.penalty_weight * k.penalty + self.violation_weight * k.violation
                };
                let (sa, sb) = (score(a), score(b));
                sa < sb - energy_eps(sb)
            }
            Ranking::Repair => {
                a.shortfall < b.shortfall - SHORTFALL_EPS
                    || (a.shortfall <= b.shortfall + SHORTFALL_EPS
                        && a.energy < b.energy - energy_eps(b.energy))
            }
        }
    }

    /// One slot of each distinct choice in frame `f`.
    fn distinct_slots(&self, f: usize) -> Vec<usize> {
        let base = f * self.inst.slots;
        let mut out: Vec<usize> = Vec::with_capacity(self.inst.slots);
        for idx in base..base + self.inst.slots {
            if !out
                .iter()
                .any(|&o| self.assignment[o] == self.assignment[idx])
            {
                out.push(idx);
            }
        }
        out
    }

    /// Best improving single-slot change, if any.
    fn best_single_move(&self, ranking: Ranking) -> Option<(usize, u32)> {
        let mut best_key = self.current_key();
        let mut best = None;
        for f in 0..self.inst.hover_frames() {
            for idx in self.distinct_slots(f) {
                let old = self.assignment[idx];
                for c in 0..self.inst.choices() as u32 {
                    if c == old {
                        continue;
                    }
                    let key = self.key_after(&[(idx, c)]);
                    if self.better(ranking, &key, &best_key) {
                        best_key = key;
                        best = Some((idx, c));
                    }
                }
            }
        }
        best
    }

    /// First improving exchange of the choices of two slots in different
    /// frames, if any.
    fn first_exchange(&self, ranking: Ranking) -> Option<(usize, usize)> {
        let cur = self.current_key();
        let frames = self.inst.hover_frames();
        for f1 in 0..frames {
            let s1 = self.distinct_slots(f1);
            for f2 in f1 + 1..frames {
                let s2 = self.distinct_slots(f2);
                for &a in &s1 {
                    for &b in &s2 {
                        let (ca, cb) = (self.assignment[a], self.assignment[b]);
                        if ca == cb {
                            continue;
                        }
                        if self.better(ranking, &self.key_after(&[(a, cb), (b, ca)]), &cur) {
                            return Some((a, b));
                        }
                    }
                }
            }
        }
        None
    }

    /// Apply improving moves until none is left.
    pub fn descend(&mut self, ranking: Ranking) {
        loop {
            if let Some((idx, c)) = self.best_single_move(ranking) {
                self.set(idx, c);
            } else if let Some((a, b)) = self.first_exchange(ranking) {
                let (ca, cb) = (self.assignment[a], self.assignment[b]);
                self.set(a, cb);
                self.set(b, ca);
            } else {
                return;
            }
        }
    }

    /// Raise the penalty of every occupied feature of maximal utility.
    pub fn penalize(&mut self) {
        let mut top = f64::NEG_INFINITY;
        let mut chosen: Vec<(usize, u32)> = Vec::new();
        for f in 0..self.inst.hover_frames() {
            for idx in self.distinct_slots(f) {
                let c = self.assignment[idx];
                if c == 0 {
                    continue;
                }
                let util = self.inst.frames[f].energy(c) / (1.0 + f64::from(self.penalty(f, c)));
                if util > top + energy_eps(top) {
                    top = util;
                    chosen.clear();
                    chosen.push((f, c));
                } else if (util - top).abs() <= energy_eps(top) {
                    chosen.push((f, c));
                }
            }
        }
        for (f, c) in chosen {
            self.penalties[f * self.inst.choices() + c as usize] += 1;
            let occupied = self.assignment[f * self.inst.slots..(f + 1) * self.inst.slots]
                .iter()
                .filter(|&&x| x == c)
                .count();
            self.active_penalty += occupied as f64;
        }
    }

    fn reset(&mut self, assignment: Vec<u32>) {
        let (energy, delivered) = self.inst.evaluate(&assignment);
        self.assignment = assignment;
        self.energy = energy;
        self.shortfall = self.inst.shortfall(&delivered);
        self.delivered = delivered;
        self.penalties.iter_mut().for_each(|p| *p = 0);
        self.active_penalty = 0.0;
        self.record_best();
    }
}

fn energy_eps(scale: f64) -> f64 {
    1e-15 + 1e-12 * scale.abs()
}

/// Fill slots one at a time with the (frame, group) pair that covers the
/// most normalized residual demand per joule. With `rng`, each score is
/// scaled by a random factor in `[0.5, 1)`.
fn construct(inst: &MmkpInstance<'_>, mut rng: Option<&mut ChaCha8Rng>) -> Vec<u32> {
    let frames = inst.hover_frames();
    let mut assignment = vec![0u32; frames * inst.slots];
    let mut free = vec![inst.slots; frames];
    let mut residual: Vec<f64> = inst.demands.to_vec();
    loop {
        let mut best: Option<(f64, usize, u32)> = None;
        for (f, table) in inst.frames.iter().enumerate() {
            if free[f] == 0 {
                continue;
            }
            for c in 1..inst.choices() as u32 {
                let gain: f64 = table
                    .data_row(c)
                    .iter()
                    .zip(&residual)
                    .zip(inst.demands)
                    .filter(|(_, &q)| q > 0.0)
                    .map(|((&d, &r), &q)| d.min(r.max(0.0)) / q)
                    .sum();
                if gain <= 0.0 {
                    continue;
                }
                let mut score = gain / table.energy(c).max(1e-300);
                if let Some(r) = rng.as_deref_mut() {
                    score *= r.random_range(0.5..1.0);
                }
                if best.is_none_or(|(b, _, _)| score > b) {
                    best = Some((score, f, c));
                }
            }
        }
        let Some((_, f, c)) = best else {
            return assignment;
        };
        let idx = f * inst.slots + inst.slots - free[f];
        assignment[idx] = c;
        free[f] -= 1;
        for (r, d) in residual.iter_mut().zip(inst.frames[f].data_row(c)) {
            *r -= d;
        }
        if residual
            .iter()
            .zip(inst.demands)
            .all(|(&r, &q)| r <= q * DEMAND_TOL)
        {
            return assignment;
        }
    }
}

/// Guided local search on one cluster's block of frames.
///
/// The returned assignment always has one choice per slot; `feasible`
/// reports whether every demand is met.
pub fn mmkp_gls(inst: &MmkpInstance<'_>, cfg: &GlsConfig) -> MmkpSolution {
    let finish = |assignment: Vec<u32>| {
        let (comm_j, delivered) = inst.evaluate(&assignment);
        let shortfall = inst.shortfall(&delivered);
        MmkpSolution {
            assignment,
            slots: inst.slots,
            comm_j,
            delivered,
            shortfall,
            feasible: shortfall == 0.0,
        }
    };
    if inst.hover_frames() == 0 {
        return finish(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(
        cfg.seed
            ^ ((inst.cluster as u64) << 32)
            ^ ((inst.tau as u64) << 16)
            ^ inst.hover_frames() as u64,
    );
    let mean = inst.mean_slot_energy();
    let mut state = GlsState::new(*inst, construct(inst, None), cfg.penalty_factor * mean)
        .expect("constructed assignment fits");
    state.set_violation_weight(cfg.violation_factor * mean);
    // least-shortfall assignment, kept for the infeasible report
    let mut fallback = (state.shortfall, state.energy, state.assignment.clone());
    let mut stale = 0usize;
    for _ in 0..cfg.iterations {
        state.descend(Ranking::Guided);
        let mut repaired = state.clone();
        repaired.descend(Ranking::Repair);
        if (repaired.shortfall, repaired.energy) < (fallback.0, fallback.1) {
            fallback = (
                repaired.shortfall,
                repaired.energy,
                repaired.assignment.clone(),
            );
        }
        let improved = repaired.record_best();
        if improved {
            state.best = repaired.best;
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= cfg.restart_after {
            state.reset(construct(inst, Some(&mut rng)));
            stale = 0;
        } else {
            state.penalize();
        }
    }
    match state.best {
        Some((_, a)) => finish(a),
        None => finish(fallback.2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::tiny_single_cluster;
    use crate::env::{ChannelTrace, RateTable};
    use proptest::prelude::*;

    /// Minimum energy over every assignment of the block, by plain
    /// enumeration of all choice vectors.
    fn exhaustive(inst: &MmkpInstance<'_>) -> Option<f64> {
        let slots = inst.hover_frames() * inst.slots;
        let c = inst.choices() as u64;
        let mut best: Option<f64> = None;
        for code in 0..c.pow(slots as u32) {
            let mut x = code;
            let a: Vec<u32> = (0..slots)
                .map(|_| {
                    let v = (x % c) as u32;
                    x /= c;
                    v
                })
                .collect();
            let (e, d) = inst.evaluate(&a);
            if inst.shortfall(&d) == 0.0 && best.is_none_or(|b| e < b) {
                best = Some(e);
            }
        }
        best
    }

    fn block(seed: u64, frames: usize) -> (Scenario, ChannelTrace) {
        tiny_single_cluster(seed, frames).unwrap()
    }

    #[test]
    fn within_ten_percent_of_exhaustive() {
        let mut checked = 0;
        for seed in 0..12 {
            let (s, trace) = block(seed, 3);
            let rates = RateTable::new(&s, &trace);
            for t in 1..=3 {
                let inst = MmkpInstance::new(&s, &rates, 0, 0, t).unwrap();
                let exact = exhaustive(&inst);
                let got = mmkp_gls(&inst, &GlsConfig::default());
                match exact {
                    Some(e) => {
                        assert!(got.feasible, "seed {seed} t {t}");
                        assert!(
                            got.comm_j <= e * 1.1 + 1e-12,
                            "seed {seed} t {t}: {} vs {e}",
                            got.comm_j
                        );
                        checked += 1;
                    }
                    None => assert!(!got.feasible),
                }
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn zero_frames_is_infeasible() {
        let (s, trace) = block(1, 3);
        let rates = RateTable::new(&s, &trace);
        let inst = MmkpInstance::new(&s, &rates, 0, 0, 0).unwrap();
        let sol = mmkp_gls(&inst, &GlsConfig::default());
        assert!(!sol.feasible);
        assert!(sol.assignment.is_empty());
        assert_eq!(sol.comm_j, 0.0);
    }

    #[test]
    fn generous_block_is_feasible() {
        let (s, trace) = block(4, 12);
        let rates = RateTable::new(&s, &trace);
        let inst = MmkpInstance::new(&s, &rates, 0, 0, 12).unwrap();
        let sol = mmkp_gls(&inst, &GlsConfig::default());
        assert!(sol.feasible);
    }

    #[test]
    fn block_beyond_trace_is_rejected() {
        let (s, trace) = block(0, 3);
        let rates = RateTable::new(&s, &trace);
        assert!(MmkpInstance::new(&s, &rates, 0, 2, 2).is_err());
    }

    #[test]
    fn deterministic_for_a_seed() {
        let (s, trace) = block(7, 4);
        let rates = RateTable::new(&s, &trace);
        let inst = MmkpInstance::new(&s, &rates, 0, 0, 4).unwrap();
        let cfg = GlsConfig {
            restart_after: 5,
            iterations: 40,
            ..GlsConfig::default()
        };
        assert_eq!(mmkp_gls(&inst, &cfg), mmkp_gls(&inst, &cfg));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn augmented_objective_bookkeeping(seed in 0u64..1000, moves in proptest::collection::vec((0usize..64, 0u32..8), 1..60)) {
            let (s, trace) = block(seed, 4);
            let rates = RateTable::new(&s, &trace);
            let inst = MmkpInstance::new(&s, &rates, 0, 0, 4).unwrap();
            let slots = 4 * inst.slots;
            let mut state = GlsState::new(inst, vec![0; slots], 0.3 * inst.mean_slot_energy()).unwrap();
            for (i, &(idx, c)) in moves.iter().enumerate() {
                state.set(idx % slots, c % inst.choices() as u32);
                if i % 7 == 3 {
                    state.penalize();
                }
                let fresh = state.recompute_augmented();
                prop_assert!((state.augmented() - fresh).abs() <= 1e-9 * fresh.abs().max(1e-12));
                let (e, d) = inst.evaluate(state.assignment());
                prop_assert!((state.energy() - e).abs() <= 1e-9 * e.max(1e-12));
                prop_assert!((state.shortfall() - inst.shortfall(&d)).abs() <= 1e-9);
            }
        }

        #[test]
        fn solution_structure_and_status(seed in 0u64..1000, t in 0usize..5) {
            let (s, trace) = block(seed, 4);
            let rates = RateTable::new(&s, &trace);
            let inst = MmkpInstance::new(&s, &rates, 0, 0, t).unwrap();
            let cfg = GlsConfig { iterations: 30, ..GlsConfig::default() };
            let sol = mmkp_gls(&inst, &cfg);
            prop_assert_eq!(sol.assignment.len(), t * inst.slots);
            prop_assert!(sol.assignment.iter().all(|&c| (c as usize) < inst.choices()));
            let (e, d) = inst.evaluate(&sol.assignment);
            prop_assert!((sol.comm_j - e).abs() <= 1e-12);
            prop_assert_eq!(sol.feasible, inst.shortfall(&d) == 0.0);
        }
    }
}
