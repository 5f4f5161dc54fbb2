//! Physical layer and propulsion model.
//!
//! Everything here is a pure function of its inputs (plus an explicit RNG
//! where randomness is involved): Rician channel draws, MMSE precoding and
//! the resulting effective gains, per-slot rate and communication energy,
//! the rotary-wing power curve, and the finite-state Markov channel (FSMC)
//! that drives the simulations.

mod fsmc;
mod propulsion;
mod rician;

pub use fsmc::{fsmc_quantize, FsmcChannelTable, FsmcModel};
pub use propulsion::{
    flying_power, optimal_flying_speed, PropulsionParams, SpeedMethod, SpeedSearch,
};
pub use rician::{
    free_space_path_loss_db, gen_rician_channel, mmse_effective_gains, ComplexChannelMatrix,
    PhysicalChannelConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radio constants shared by every cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    pub slot_duration_s: f64,
    pub slots_per_frame: usize,
    pub noise_power_w: f64,
    /// Transmit power of every scheduled user.
    pub tx_power_w: f64,
    pub antennas: usize,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 10e6,
            slot_duration_s: 1e-3,
            slots_per_frame: 10,
            noise_power_w: 1e-4,
            tx_power_w: 3.0,
            antennas: 10,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("radio.bandwidth_hz", self.bandwidth_hz),
            ("limits.slot_duration_s", self.slot_duration_s),
            ("radio.noise_power_w", self.noise_power_w),
            ("radio.tx_power_w", self.tx_power_w),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    key,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if self.slots_per_frame == 0 {
            return Err(Error::config("limits.slots_per_frame", "must be >= 1"));
        }
        if self.antennas == 0 {
            return Err(Error::config("radio.antennas", "must be >= 1"));
        }
        Ok(())
    }

    /// Hovering energy of one frame for hovering power `hover_power_w`.
    pub fn frame_hover_energy(&self, hover_power_w: f64) -> f64 {
        self.slot_duration_s * self.slots_per_frame as f64 * hover_power_w
    }
}

/// Square table of effective gains for one user group.
///
/// Entry `(k, j)` is the gain of user `j`'s precoder seen at user `k`; the
/// diagonal carries the useful signal.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGains {
    dim: usize,
    beta: Vec<f64>,
}

impl EffectiveGains {
    pub fn new(dim: usize, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != dim * dim {
            return Err(Error::Contract(format!(
                "effective gain table needs {} entries, got {}",
                dim * dim,
                beta.len()
            )));
        }
        if beta.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::Contract(
                "effective gains must be finite and >= 0".into(),
            ));
        }
        Ok(Self { dim, beta })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let beta = (0..dim * dim).map(|i| f(i / dim, i % dim)).collect();
        Self { dim, beta }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.beta[k * self.dim + j]
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim).map(move |k| self.get(k, k))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }
}

/// SINR of the `k`-th member of a group, all members transmitting at `p`.
pub fn sinr(beta: &EffectiveGains, k: usize, p: f64, sigma2: f64) -> f64 {
    sinr_from(|kk, j| beta.get(kk, j), beta.dim(), k, p, sigma2)
}

#[inline]
pub(crate) fn sinr_from(
    beta: impl Fn(usize, usize) -> f64,
    dim: usize,
    k: usize,
    p: f64,
    sigma2: f64,
) -> f64 {
    let signal = beta(k, k) * p;
    if signal == 0.0 {
        return 0.0;
    }
    let interference: f64 = (0..dim).filter(|&j| j != k).map(|j| beta(k, j) * p).sum();
    signal / (interference + sigma2)
}

/// Bits delivered in one slot at SINR `gamma`.
pub fn data_per_slot(gamma: f64, cfg: &RadioConfig) -> f64 {
    cfg.slot_duration_s * cfg.bandwidth_hz * (1.0 + gamma).log2()
}

/// Communication energy of one slot for the given group members.
///
/// The charge is proportional to each member's effective diagonal gain
/// times its transmit power, as in the reference model.
pub fn comm_energy_per_slot(
    beta: &EffectiveGains,
    members: &[usize],
    p: f64,
    cfg: &RadioConfig,
) -> f64 {
    cfg.slot_duration_s * members.iter().map(|&k| beta.get(k, k) * p).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radio() -> RadioConfig {
        RadioConfig {
            bandwidth_hz: 1e7,
            slot_duration_s: 1e-3,
            ..RadioConfig::default()
        }
    }

    #[test]
    fn sinr_singleton() {
        let b = EffectiveGains::new(1, vec![2.4]).unwrap();
        assert!((sinr(&b, 0, 3.0, 1e-4) - 72000.0).abs() < 1e-6);
    }

    #[test]
    fn sinr_zero_signal() {
        let b = EffectiveGains::new(2, vec![0.0, 0.5, 0.3, 1.0]).unwrap();
        assert_eq!(sinr(&b, 0, 3.0, 1e-4), 0.0);
    }

    #[test]
    fn sinr_two_users() {
        let b = EffectiveGains::new(2, vec![2.4, 0.3, 0.6, 1.2]).unwrap();
        let g = sinr(&b, 0, 3.0, 1e-4);
        assert!((g - 7.2 / 0.9001).abs() < 1e-12);
        assert!((g - 7.9991).abs() < 1e-4);
    }

    #[test]
    fn rate_examples() {
        let cfg = radio();
        assert_eq!(data_per_slot(0.0, &cfg), 0.0);
        assert!((data_per_slot(3.0, &cfg) - 20000.0).abs() < 1e-9);
        assert!((data_per_slot(1.0, &cfg) - 1e4).abs() < 1e-9);
    }

    #[test]
    fn comm_energy_examples() {
        let cfg = radio();
        let one = EffectiveGains::new(1, vec![2.4]).unwrap();
        assert!((comm_energy_per_slot(&one, &[0], 3.0, &cfg) - 7.2e-3).abs() < 1e-15);
        let zero = EffectiveGains::new(2, vec![0.0, 0.9, 0.9, 0.0]).unwrap();
        assert_eq!(comm_energy_per_slot(&zero, &[0, 1], 3.0, &cfg), 0.0);
        let two = EffectiveGains::new(2, vec![1.2, 0.3, 0.3, 0.6]).unwrap();
        assert!((comm_energy_per_slot(&two, &[0, 1], 3.0, &cfg) - 5.4e-3).abs() < 1e-15);
    }

    #[test]
    fn comm_energy_is_additive_over_members() {
        let cfg = radio();
        let b = EffectiveGains::from_fn(3, |k, j| 0.1 + 0.3 * k as f64 + 0.05 * j as f64);
        let all = comm_energy_per_slot(&b, &[0, 1, 2], 3.0, &cfg);
        let parts: f64 = (0..3)
            .map(|k| comm_energy_per_slot(&b, &[k], 3.0, &cfg))
            .sum();
        assert!((all - parts).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_gain() {
        assert!(EffectiveGains::new(1, vec![-0.1]).is_err());
        assert!(EffectiveGains::new(2, vec![0.1]).is_err());
    }

    #[test]
    fn radio_validation() {
        assert!(RadioConfig::default().validate().is_ok());
        let bad = RadioConfig {
            slots_per_frame: 0,
            ..RadioConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RadioConfig {
            noise_power_w: 0.0,
            ..RadioConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sinr_monotone(
                diag in 0.0f64..3.0,
                off in prop::collection::vec(0.0f64..3.0, 2),
                bump in 0.0f64..1.0,
                which in 0usize..2,
            ) {
                let base = EffectiveGains::from_fn(3, |k, j| if k == j { diag } else if k == 0 { off[j.saturating_sub(1).min(1)] } else { 0.5 });
                let g0 = sinr(&base, 0, 3.0, 1e-4);
                let j = which + 1;
                let more_interf = EffectiveGains::from_fn(3, |k, jj| base.get(k, jj) + if k == 0 && jj == j { bump } else { 0.0 });
                prop_assert!(sinr(&more_interf, 0, 3.0, 1e-4) <= g0 + 1e-12);
                let more_signal = EffectiveGains::from_fn(3, |k, jj| base.get(k, jj) + if k == 0 && jj == 0 { bump } else { 0.0 });
                prop_assert!(sinr(&more_signal, 0, 3.0, 1e-4) >= g0 - 1e-12);
            }

            #[test]
            fn rate_monotone(a in 0.0f64..1e6, b in 0.0f64..1e6) {
                let cfg = RadioConfig::default();
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(data_per_slot(lo, &cfg) <= data_per_slot(hi, &cfg));
            }
        }
    }
}
