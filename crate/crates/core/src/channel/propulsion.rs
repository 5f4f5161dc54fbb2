use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rotary-wing propulsion constants.
///
/// Defaults follow the widely used rotary-wing power model (blade profile
/// and induced power at hover, tip speed, mean induced velocity, drag
/// factor and air density). `hover_power_w` is configured directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropulsionParams {
    pub blade_profile_power_w: f64,
    pub induced_power_w: f64,
    pub tip_speed_mps: f64,
    pub induced_velocity_mps: f64,
    /// Fuselage drag ratio x rotor solidity x disc area.
    pub drag_factor: f64,
    pub air_density: f64,
    pub hover_power_w: f64,
    pub hover_speed_mps: f64,
    /// Lengths of the flight legs dock -> 1 -> ... -> N -> dock.
    pub leg_distances_m: Vec<f64>,
    /// Search bracket for the energy-optimal cruise speed.
    pub speed_bracket_mps: (f64, f64),
}

impl Default for PropulsionParams {
    fn default() -> Self {
        Self {
            blade_profile_power_w: 79.86,
            induced_power_w: 88.63,
            tip_speed_mps: 120.0,
            induced_velocity_mps: 4.03,
            drag_factor: 0.6 * 0.05 * 0.503,
            air_density: 1.225,
            hover_power_w: 10.0,
            hover_speed_mps: 0.0,
            leg_distances_m: Vec::new(),
            speed_bracket_mps: (1.0, 60.0),
        }
    }
}

impl PropulsionParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            (
                "propulsion.blade_profile_power_w",
                self.blade_profile_power_w,
            ),
            ("propulsion.induced_power_w", self.induced_power_w),
            ("propulsion.tip_speed_mps", self.tip_speed_mps),
            ("propulsion.induced_velocity_mps", self.induced_velocity_mps),
            ("propulsion.drag_factor", self.drag_factor),
            ("propulsion.air_density", self.air_density),
            ("propulsion.hover_speed_mps", self.hover_speed_mps),
        ];
        for (key, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(
                    key,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        if !(self.hover_power_w.is_finite() && self.hover_power_w > 0.0) {
            return Err(Error::config("propulsion.hover_power_w", "must be > 0"));
        }
        if self.tip_speed_mps == 0.0 || self.induced_velocity_mps == 0.0 {
            return Err(Error::config(
                "propulsion",
                "tip speed and induced velocity must be > 0",
            ));
        }
        if self
            .leg_distances_m
            .iter()
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err(Error::config(
                "propulsion.leg_distances_m",
                "distances must be >= 0",
            ));
        }
        let (lo, hi) = self.speed_bracket_mps;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::config(
                "propulsion.speed_bracket_mps",
                "need 0 < lo < hi",
            ));
        }
        Ok(())
    }

    pub fn total_distance_m(&self) -> f64 {
        self.leg_distances_m.iter().sum()
    }
}

/// Propulsion power at forward speed `u`.
pub fn flying_power(u: f64, pp: &PropulsionParams) -> f64 {
    let u2 = u * u;
    let ui2 = pp.induced_velocity_mps * pp.induced_velocity_mps;
    let blade = pp.blade_profile_power_w * (1.0 + 3.0 * u2 / (pp.tip_speed_mps * pp.tip_speed_mps));
    let induced_inner = (1.0 + u2 * u2 / (4.0 * ui2 * ui2)).sqrt() - u2 / (2.0 * ui2);
    let induced = pp.induced_power_w * induced_inner.max(0.0).sqrt();
    let parasite = 0.5 * pp.drag_factor * pp.air_density * u2 * u;
    blade + induced + parasite
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedMethod {
    GoldenSection,
    /// The energy-per-metre curve did not look unimodal on the bracket.
    GridFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedSearch {
    pub speed_mps: f64,
    pub energy_j: f64,
    pub method: SpeedMethod,
}

const GRID_STEP: f64 = 0.01;

/// Cruise speed minimizing energy per metre, and the flying energy over
/// all legs at that speed.
pub fn optimal_flying_speed(pp: &PropulsionParams) -> SpeedSearch {
    let per_metre = |u: f64| flying_power(u, pp) / u;
    let (lo, hi) = pp.speed_bracket_mps;
    let (speed, method) = search_bracket(per_metre, lo, hi);
    let distance = pp.total_distance_m();
    let energy_j = if distance == 0.0 {
        0.0
    } else {
        per_metre(speed) * distance
    };
    SpeedSearch {
        speed_mps: speed,
        energy_j,
        method,
    }
}

fn search_bracket(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, SpeedMethod) {
    let mid = 0.5 * (lo + hi);
    let (g_lo, g_mid, g_hi) = (f(lo), f(mid), f(hi));
    if g_lo < g_mid && g_hi < g_mid {
        log::warn!("energy-per-metre curve is not unimodal on [{lo}, {hi}]; using grid search");
        (grid_argmin(f, lo, hi), SpeedMethod::GridFallback)
    } else {
        (golden_section(f, lo, hi, 1e-7), SpeedMethod::GoldenSection)
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

pub(crate) fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let steps = ((hi - lo) / GRID_STEP).round() as usize;
    (0..=steps)
        .map(|i| lo + i as f64 * GRID_STEP)
        .map(|u| (u, f(u)))
        .fold(
            (lo, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
        .0
}
