use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::EffectiveGains;
use crate::error::{Error, Result};

/// Complex channel gains of a user group, one row per user and one column
/// per UAV antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexChannelMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexChannelMatrix {
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || cols == 0 {
            return Err(Error::Contract("channel matrix must be nonempty".into()));
        }
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Contract("ragged channel matrix".into()));
        }
        if rows.len() > cols {
            log::warn!(
                "{} users on {} antennas: MMSE cannot suppress all intra-group interference",
                rows.len(),
                cols
            );
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            entries: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.entries[k * self.cols..(k + 1) * self.cols]
    }

    fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }
}

/// Parameters of the physical (Rician + MMSE) channel mode.
///
/// `antenna_gain_db` offsets the free-space loss so that singleton effective
/// gains land inside the FSMC level range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalChannelConfig {
    pub rice_factor_db: f64,
    pub altitude_m: f64,
    pub cluster_radius_m: f64,
    pub carrier_hz: f64,
    pub antenna_gain_db: f64,
}

impl Default for PhysicalChannelConfig {
    fn default() -> Self {
        Self {
            rice_factor_db: 10.0,
            altitude_m: 100.0,
            cluster_radius_m: 50.0,
            carrier_hz: 2e9,
            antenna_gain_db: 74.0,
        }
    }
}

impl PhysicalChannelConfig {
    pub fn rice_factor(&self) -> f64 {
        10f64.powf(self.rice_factor_db / 10.0)
    }

    /// Net loss `xi` (dB) for a user at horizontal offset `radius_m`.
    pub fn path_loss_db(&self, radius_m: f64) -> f64 {
        let d = (self.altitude_m * self.altitude_m + radius_m * radius_m).sqrt();
        free_space_path_loss_db(d, self.carrier_hz) - self.antenna_gain_db
    }
}

pub fn free_space_path_loss_db(distance_m: f64, carrier_hz: f64) -> f64 {
    const C: f64 = 299_792_458.0;
    20.0 * (4.0 * std::f64::consts::PI * distance_m * carrier_hz / C).log10()
}

/// One user's channel row: unit-average-power Rician fading scaled by
/// `10^(-xi/10)`.
///
/// The line-of-sight part is a half-wavelength ULA steering vector at a
/// random departure angle, so it has unit modulus on every antenna. The
/// random draws do not depend on `rice_factor` or `path_loss_db`.
pub fn gen_rician_channel<R: Rng + ?Sized>(
    rng: &mut R,
    antennas: usize,
    rice_factor: f64,
    path_loss_db: f64,
) -> Vec<Complex64> {
    let angle: f64 = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
    let (los_w, nlos_w) = if rice_factor.is_infinite() {
        (1.0, 0.0)
    } else {
        (
            (rice_factor / (rice_factor + 1.0)).sqrt(),
            (1.0 / (rice_factor + 1.0)).sqrt(),
        )
    };
    let scale = 10f64.powf(-path_loss_db / 10.0);
    (0..antennas)
        .map(|l| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let scattered = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            let los = Complex64::from_polar(1.0, std::f64::consts::PI * l as f64 * angle.sin());
            (los * los_w + scattered * nlos_w) * scale
        })
        .collect()
}

/// Effective gains of MMSE precoding for the group with channel `h`.
///
/// The precoder direction of user `j` is the `j`-th column of
/// `H^H (sigma2 I + H H^H)^-1`, normalized to unit length; entry `(k, j)` is
/// `|h_k . w_j|^2`.
pub fn mmse_effective_gains(h: &ComplexChannelMatrix, sigma2: f64) -> Result<EffectiveGains> {
    let k = h.rows();
    let hm = h.to_matrix();
    let hh = hm.adjoint();
    let gram = &hm * &hh + DMatrix::<Complex64>::identity(k, k) * Complex64::new(sigma2, 0.0);
    let inv = gram
        .try_inverse()
        .ok_or(Error::SingularChannel { sigma2 })?;
    let precoders = hh * inv; // L x K
    let received = &hm * &precoders; // K x K, (k, j) = h_k . h~_j
    let norms: Vec<f64> = (0..k).map(|j| precoders.column(j).norm()).collect();
    let beta = EffectiveGains::from_fn(k, |row, col| {
        if norms[col] == 0.0 {
            0.0
        } else {
            received[(row, col)].norm_sqr() / (norms[col] * norms[col])
        }
    });
    if beta.as_slice().iter().any(|b| !b.is_finite()) {
        return Err(Error::SingularChannel { sigma2 });
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pure_los_has_unit_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = gen_rician_channel(&mut rng, 8, f64::INFINITY, 0.0);
        for x in h {
            assert!((x.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn path_loss_scales_amplitude() {
        let a = gen_rician_channel(&mut ChaCha8Rng::seed_from_u64(9), 4, 10.0, 0.0);
        let b = gen_rician_channel(&mut ChaCha8Rng::seed_from_u64(9), 4, 10.0, 10.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x * 0.1 - y).norm() < 1e-14);
        }
    }

    #[test]
    fn rayleigh_limit_power() {
        // |h|^2 = |alpha|^2 * 10^(-xi/5) with E|alpha|^2 = 1.
        let xi = 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| gen_rician_channel(&mut rng, 1, 0.0, xi)[0].norm_sqr())
            .sum::<f64>()
            / n as f64;
        let expected = 10f64.powf(-xi / 5.0);
        assert!(
            (mean / expected - 1.0).abs() < 0.05,
            "mean {mean} vs {expected}"
        );
    }

    #[test]
    fn singleton_gain_is_channel_norm() {
        let h = ComplexChannelMatrix::from_rows(&[vec![c(0.3, -0.2), c(1.1, 0.4), c(-0.5, 0.9)]])
            .unwrap();
        let beta = mmse_effective_gains(&h, 0.1).unwrap();
        let norm2: f64 = h.row(0).iter().map(|x| x.norm_sqr()).sum();
        assert!((beta.get(0, 0) - norm2).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_rows_have_no_leakage() {
        let h = ComplexChannelMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 2.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let beta = mmse_effective_gains(&h, 1e-12).unwrap();
        assert!(beta.get(0, 1) < 1e-20 && beta.get(1, 0) < 1e-20);
        assert!((beta.get(0, 0) - 1.0).abs() < 1e-9);
        assert!((beta.get(1, 1) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn singular_without_noise_fails() {
        let row = vec![c(1.0, 0.0), c(0.5, 0.5)];
        let h = ComplexChannelMatrix::from_rows(&[row.clone(), row]).unwrap();
        assert!(matches!(
            mmse_effective_gains(&h, 0.0),
            Err(Error::SingularChannel { .. })
        ));
    }

    /// Direct evaluation of the MMSE gains for a 2-user group using the
    /// closed-form 2x2 inverse.
    fn oracle_two_user(h: [[Complex64; 4]; 2], sigma2: f64) -> [[f64; 2]; 2] {
        let dot = |a: &[Complex64; 4], b: &[Complex64; 4]| -> Complex64 {
            a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
        };
        // G = sigma2 I + H H^H
        let g00 = dot(&h[0], &h[0]) + sigma2;
        let g01 = dot(&h[0], &h[1]);
        let g10 = dot(&h[1], &h[0]);
        let g11 = dot(&h[1], &h[1]) + sigma2;
        let det = g00 * g11 - g01 * g10;
        let inv = [[g11 / det, -g01 / det], [-g10 / det, g00 / det]];
        // column j of H^H G^-1: sum_m conj(h_m) * inv[m][j]
        let mut w = [[Complex64::new(0.0, 0.0); 4]; 2];
        for j in 0..2 {
            for l in 0..4 {
                w[j][l] = h[0][l].conj() * inv[0][j] + h[1][l].conj() * inv[1][j];
            }
        }
        let mut out = [[0.0; 2]; 2];
        for k in 0..2 {
            for j in 0..2 {
                let norm2: f64 = w[j].iter().map(|x| x.norm_sqr()).sum();
                let proj: Complex64 = (0..4).map(|l| h[k][l] * w[j][l]).sum();
                out[k][j] = proj.norm_sqr() / norm2;
            }
        }
        out
    }

    #[test]
    fn two_by_four_matches_direct_formula() {
        let h = [
            [c(0.8, -0.1), c(-0.3, 0.6), c(0.2, 0.2), c(1.0, -0.7)],
            [c(0.5, 0.4), c(0.9, -0.2), c(-0.6, 0.1), c(0.3, 0.3)],
        ];
        let expected = oracle_two_user(h, 0.1);
        let m = ComplexChannelMatrix::from_rows(&[h[0].to_vec(), h[1].to_vec()]).unwrap();
        let beta = mmse_effective_gains(&m, 0.1).unwrap();
        for k in 0..2 {
            for j in 0..2 {
                let got = beta.get(k, j);
                assert!(
                    (got - expected[k][j]).abs() <= 1e-12 * expected[k][j].max(1.0),
                    "({k},{j}): {got} vs {}",
                    expected[k][j]
                );
            }
        }
    }

    #[test]
    fn fspl_reference_value() {
        // 100 m at 2 GHz.
        assert!((free_space_path_loss_db(100.0, 2e9) - 78.46).abs() < 0.01);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gains_nonnegative(seed in 0u64..10_000, users in 1usize..5, sigma2 in 1e-4f64..1.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rows: Vec<_> = (0..users).map(|_| gen_rician_channel(&mut rng, 6, 3.0, 0.0)).collect();
                let h = ComplexChannelMatrix::from_rows(&rows).unwrap();
                let beta = mmse_effective_gains(&h, sigma2).unwrap();
                prop_assert!(beta.as_slice().iter().all(|b| b.is_finite() && *b >= 0.0));
            }
        }
    }
}
