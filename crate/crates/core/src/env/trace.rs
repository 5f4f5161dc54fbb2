use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Scenario;
use crate::channel::{
    data_per_slot, gen_rician_channel, mmse_effective_gains, sinr_from, ComplexChannelMatrix,
    FsmcChannelTable, PhysicalChannelConfig,
};
use crate::error::{Error, Result};
use crate::group;

/// Generator driving the FSMC of an episode or trace with the given seed.
pub fn channel_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bits delivered to each member and energy spent when `mask` of cluster
/// `n` is scheduled for one slot. `data` is indexed by user and must be
/// zeroed by the caller for non-members.
pub fn slot_outcome(
    scenario: &Scenario,
    table: &FsmcChannelTable,
    n: usize,
    mask: u32,
    data: &mut [f64],
) -> f64 {
    let radio = &scenario.radio;
    let dim = group::size(mask);
    let p = radio.tx_power_w;
    let mut diag = 0.0;
    for (pos, k) in group::members(mask).enumerate() {
        let gamma = sinr_from(
            |a, b| table.beta(n, mask, a, b),
            dim,
            pos,
            p,
            radio.noise_power_w,
        );
        data[k] = data_per_slot(gamma, radio);
        diag += table.beta(n, mask, pos, pos);
    }
    radio.slot_duration_s * diag * p
}

/// Per-slot energy and per-user data of every group of one cluster in one
/// frame. Index 0 is the idle choice.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTable {
    users: usize,
    energy: Vec<f64>,
    data: Vec<f64>,
}

impl SlotTable {
    pub fn build(scenario: &Scenario, table: &FsmcChannelTable, n: usize) -> Self {
        let users = scenario.users(n);
        let choices = 1usize << users;
        let mut energy = vec![0.0; choices];
        let mut data = vec![0.0; choices * users];
        for mask in group::all(users) {
            let row = &mut data[mask as usize * users..(mask as usize + 1) * users];
            energy[mask as usize] = slot_outcome(scenario, table, n, mask, row);
        }
        Self {
            users,
            energy,
            data,
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Number of choices including idle.
    pub fn choices(&self) -> usize {
        self.energy.len()
    }

    #[inline]
    pub fn energy(&self, mask: u32) -> f64 {
        self.energy[mask as usize]
    }

    #[inline]
    pub fn data(&self, mask: u32, k: usize) -> f64 {
        self.data[mask as usize * self.users + k]
    }

    #[inline]
    pub fn data_row(&self, mask: u32) -> &[f64] {
        &self.data[mask as usize * self.users..(mask as usize + 1) * self.users]
    }
}

/// A frozen FSMC realization covering frames `0..T_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    frames: Vec<FsmcChannelTable>,
}

impl ChannelTrace {
    /// The channel sequence a live episode with the same seed would see.
    pub fn generate(scenario: &Scenario, seed: u64) -> Self {
        let mut rng = channel_rng(seed);
        let mut table = FsmcChannelTable::random(
            Arc::clone(&scenario.fsmc),
            &scenario.users_per_cluster(),
            &mut rng,
        );
        let mut frames = Vec::with_capacity(scenario.max_frames());
        for _ in 0..scenario.max_frames() {
            let next = table.stepped(&mut rng);
            frames.push(std::mem::replace(&mut table, next));
        }
        Self { frames }
    }

    /// Levels derived from independent Rician draws per frame, precoded with
    /// MMSE and quantized to the nearest FSMC level.
    pub fn generate_physical(
        scenario: &Scenario,
        phys: &PhysicalChannelConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = channel_rng(seed);
        let users = scenario.users_per_cluster();
        let radio = &scenario.radio;
        let mut frames = Vec::with_capacity(scenario.max_frames());
        for _ in 0..scenario.max_frames() {
            let mut table = FsmcChannelTable::constant(Arc::clone(&scenario.fsmc), &users, 0)?;
            for (n, &k_n) in users.iter().enumerate() {
                let rows: Vec<_> = (0..k_n)
                    .map(|k| {
                        let radius = phys.cluster_radius_m * (k as f64 + 0.5) / k_n as f64;
                        gen_rician_channel(
                            &mut rng,
                            radio.antennas,
                            phys.rice_factor(),
                            phys.path_loss_db(radius),
                        )
                    })
                    .collect();
                for mask in group::all(k_n) {
                    let sub: Vec<_> = group::members(mask).map(|k| rows[k].clone()).collect();
                    let h = ComplexChannelMatrix::from_rows(&sub)?;
                    let gains = mmse_effective_gains(&h, radio.noise_power_w)?;
                    table.quantize_group(n, mask, &gains);
                }
            }
            frames.push(table);
        }
        Ok(Self { frames })
    }

    pub fn from_frames(frames: Vec<FsmcChannelTable>) -> Self {
        Self { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, t: usize) -> &FsmcChannelTable {
        &self.frames[t]
    }

    pub fn frames(&self) -> &[FsmcChannelTable] {
        &self.frames
    }

    /// Check that the trace matches the scenario's cluster layout and horizon.
    pub fn check(&self, scenario: &Scenario) -> Result<()> {
        if self.frames.len() < scenario.max_frames() {
            return Err(Error::Contract(format!(
                "trace covers {} frames, scenario needs {}",
                self.frames.len(),
                scenario.max_frames()
            )));
        }
        let users = scenario.users_per_cluster();
        for table in &self.frames {
            let layout: Vec<usize> = (0..table.num_clusters()).map(|n| table.users(n)).collect();
            if layout != users {
                return Err(Error::Contract(
                    "trace cluster layout differs from scenario".into(),
                ));
            }
        }
        Ok(())
    }

    /// Flat text table, one coefficient per line:
    /// `cluster,group,pair,frame,level` where `group` is the member bitmask,
    /// `pair` is the row-major index `k * |g| + j`, and all indices are
    /// zero-based.
    pub fn write_table<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cluster,group,pair,frame,level")?;
        for (t, table) in self.frames.iter().enumerate() {
            for n in 0..table.num_clusters() {
                for mask in group::all(table.users(n)) {
                    let dim = group::size(mask);
                    for pair in 0..dim * dim {
                        let level = table.level(n, mask, pair / dim, pair % dim);
                        writeln!(w, "{n},{mask},{pair},{t},{level}")?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Inverse of [`ChannelTrace::write_table`]; every coefficient of every
    /// frame must be present exactly once.
    pub fn read_table<R: BufRead>(scenario: &Scenario, r: R) -> Result<Self> {
        let users = scenario.users_per_cluster();
        let mut frames: Vec<FsmcChannelTable> = Vec::new();
        let mut seen: Vec<HashSet<(usize, usize, usize)>> = Vec::new();
        let per_frame: usize = {
            let t = FsmcChannelTable::constant(Arc::clone(&scenario.fsmc), &users, 0)?;
            (0..users.len()).map(|n| t.coefficient_count(n)).sum()
        };
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "cluster,group,pair,frame,level" {
            return Err(Error::Parse("missing trace header".into()));
        }
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            let parse = |i: usize| -> Result<usize> {
                fields.get(i).and_then(|f| f.parse().ok()).ok_or_else(|| {
                    Error::Parse(format!("line {}: bad field {i} in `{line}`", lineno + 2))
                })
            };
            if fields.len() != 5 {
                return Err(Error::Parse(format!(
                    "line {}: expected 5 fields",
                    lineno + 2
                )));
            }
            let (n, mask, pair, t, level) = (parse(0)?, parse(1)?, parse(2)?, parse(3)?, parse(4)?);
            if n >= users.len() || mask == 0 || mask > group::catalog_size(users[n]) {
                return Err(Error::Parse(format!(
                    "line {}: unknown cluster/group",
                    lineno + 2
                )));
            }
            let dim = group::size(mask as u32);
            if pair >= dim * dim || level >= scenario.fsmc.num_levels() {
                return Err(Error::Parse(format!(
                    "line {}: pair or level out of range",
                    lineno + 2
                )));
            }
            while frames.len() <= t {
                frames.push(FsmcChannelTable::constant(
                    Arc::clone(&scenario.fsmc),
                    &users,
                    0,
                )?);
                seen.push(HashSet::new());
            }
            if !seen[t].insert((n, mask, pair)) {
                return Err(Error::Parse(format!(
                    "line {}: duplicate coefficient",
                    lineno + 2
                )));
            }
            frames[t].set_level(n, mask as u32, pair / dim, pair % dim, level as u8)?;
        }
        for (t, s) in seen.iter().enumerate() {
            if s.len() != per_frame {
                return Err(Error::Parse(format!(
                    "frame {t} has {} coefficients, expected {per_frame}",
                    s.len()
                )));
            }
        }
        let trace = Self { frames };
        trace.check(scenario)?;
        Ok(trace)
    }
}

/// [`SlotTable`]s of every cluster and frame of a trace.
#[derive(Debug, Clone)]
pub struct RateTable {
    tables: Vec<Vec<SlotTable>>,
}

impl RateTable {
    pub fn new(scenario: &Scenario, trace: &ChannelTrace) -> Self {
        let tables = (0..scenario.num_clusters())
            .map(|n| {
                trace.frames[..scenario.max_frames()]
                    .iter()
                    .map(|table| SlotTable::build(scenario, table, n))
                    .collect()
            })
            .collect();
        Self { tables }
    }

    #[inline]
    pub fn get(&self, n: usize, t: usize) -> &SlotTable {
        &self.tables[n][t]
    }

    /// Tables of cluster `n` for frames `tau..tau + t`.
    pub fn cluster_frames(&self, n: usize, tau: usize, t: usize) -> &[SlotTable] {
        &self.tables[n][tau..tau + t]
    }

    pub fn frames(&self) -> usize {
        self.tables.first().map_or(0, Vec::len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario() -> Scenario {
        Scenario::with_defaults(vec![vec![1e5, 2e5], vec![3e5, 1e5, 1e5]], 4).unwrap()
    }

    #[test]
    fn dump_and_reload_round_trip() {
        let s = scenario();
        let trace = ChannelTrace::generate(&s, 9);
        let mut buf = Vec::new();
        trace.write_table(&mut buf).unwrap();
        let back = ChannelTrace::read_table(&s, buf.as_slice()).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn reload_rejects_incomplete_table() {
        let s = scenario();
        let trace = ChannelTrace::generate(&s, 9);
        let mut buf = Vec::new();
        trace.write_table(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(ChannelTrace::read_table(&s, truncated.as_bytes()).is_err());
    }

    #[test]
    fn slot_table_matches_channel_formulas() {
        let s = scenario();
        let trace = ChannelTrace::generate(&s, 3);
        let rates = RateTable::new(&s, &trace);
        let table = trace.frame(1);
        let st = rates.get(1, 1);
        let mask = 0b101;
        let gains = table.gains(1, mask);
        let p = s.radio.tx_power_w;
        let expected_e = crate::channel::comm_energy_per_slot(&gains, &[0, 1], p, &s.radio);
        assert!((st.energy(mask) - expected_e).abs() < 1e-15);
        let g0 = crate::channel::sinr(&gains, 0, p, s.radio.noise_power_w);
        assert!((st.data(mask, 0) - data_per_slot(g0, &s.radio)).abs() < 1e-9);
        assert_eq!(st.data(mask, 1), 0.0);
        assert_eq!(st.energy(0), 0.0);
    }

    #[test]
    fn physical_mode_produces_valid_levels() {
        let s = scenario();
        let trace =
            ChannelTrace::generate_physical(&s, &PhysicalChannelConfig::default(), 1).unwrap();
        assert_eq!(trace.len(), 4);
        // Singleton gains of nearby users should not all quantize to zero.
        let any_signal = (0..4).any(|t| trace.frame(t).level(0, 1, 0, 0) > 0);
        assert!(any_signal);
    }
}
