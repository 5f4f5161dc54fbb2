//! Dense bounded-variable dual simplex.
//!
//! Rows `a.x (<=|>=|=) b` get one logical variable each so that
//! `a.x + s = b`; the logical's bounds encode the sense. Structural
//! variables carry finite or infinite bounds. Starting from the all-logical
//! basis with every structural at the bound favoured by its cost sign, the
//! start is dual feasible and the dual simplex restores primal feasibility.
//! Bound changes keep dual feasibility, so a solved tableau can be
//! re-optimized after fixing variables.

use crate::error::{Error, Result};

const PRIMAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// A sparse row `coeffs . x (sense) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min c.x` subject to rows and variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { objective: f64, x: Vec<f64> },
    Infeasible,
}

/// Solver state: the full tableau `B^-1 [A | I]` with basic values and
/// reduced costs.
#[derive(Debug, Clone)]
pub struct DualSimplex {
    m: usize,
    n: usize,
    /// Row-major `m x (n + m)`.
    tab: Vec<f64>,
    beta: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Value of every variable (basic ones mirrored from `beta`).
    x: Vec<f64>,
    basis: Vec<usize>,
    /// Row of each basic variable, `usize::MAX` when nonbasic.
    row_of: Vec<usize>,
    pivots: usize,
    max_pivots: usize,
}

impl DualSimplex {
    pub fn new(lp: &LinearProgram) -> Result<Self> {
        let n = lp.num_vars();
        let m = lp.rows.len();
        if lp.lower.len() != n || lp.upper.len() != n {
            return Err(Error::Lp(
                "bound vectors do not match the cost vector".into(),
            ));
        }
        let width = n + m;
        let mut tab = vec![0.0; m * width];
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut cost = lp.cost.clone();
        for (r, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(Error::Lp(format!("row {r} references variable {j}")));
                }
                tab[r * width + j] += a;
            }
            tab[r * width + n + r] = 1.0;
            let (lo, hi) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
            cost.push(0.0);
        }
        let mut x = vec![0.0; width];
        for j in 0..n {
            if lower[j] > upper[j] {
                return Err(Error::Lp(format!("variable {j} has empty bounds")));
            }
            x[j] = if cost[j] >= 0.0 { lower[j] } else { upper[j] };
            if !x[j].is_finite() {
                if lower[j].is_finite() {
                    x[j] = lower[j];
                } else if upper[j].is_finite() {
                    x[j] = upper[j];
                } else {
                    return Err(Error::Lp(format!("free variable {j} is not supported")));
                }
                if cost[j] != 0.0 {
                    return Err(Error::Lp(format!(
                        "variable {j} makes the program unbounded"
                    )));
                }
            }
        }
        let beta: Vec<f64> = lp
            .rows
            .iter()
            .map(|row| row.rhs - row.coeffs.iter().map(|&(j, a)| a * x[j]).sum::<f64>())
            .collect();
        let basis: Vec<usize> = (n..n + m).collect();
        let mut row_of = vec![usize::MAX; width];
        for (r, &b) in basis.iter().enumerate() {
            row_of[b] = r;
            x[b] = beta[r];
        }
        Ok(Self {
            m,
            n,
            tab,
            beta,
            d: cost.clone(),
            cost,
            lower,
            upper,
            x,
            basis,
            row_of,
            pivots: 0,
            max_pivots: 50_000 + 50 * (n + m),
        })
    }

    pub fn pivots(&self) -> usize {
        self.pivots
    }

    pub fn num_structural(&self) -> usize {
        self.n
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Change the bounds of a structural variable, keeping the tableau.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) -> Result<()> {
        if j >= self.n || lo > hi {
            return Err(Error::Lp(format!(
                "bad bounds [{lo}, {hi}] for variable {j}"
            )));
        }
        self.lower[j] = lo;
        self.upper[j] = hi;
        if self.row_of[j] == usize::MAX {
            let target = if lo == hi || self.d[j] > 0.0 {
                lo
            } else if self.d[j] < 0.0 {
                hi
            } else {
                self.x[j].clamp(lo, hi)
            };
            if !target.is_finite() {
                return Err(Error::Lp(format!("variable {j} lost its finite bound")));
            }
            let delta = target - self.x[j];
            if delta != 0.0 {
                let width = self.n + self.m;
                for r in 0..self.m {
                    let a = self.tab[r * width + j];
                    if a != 0.0 {
                        self.beta[r] -= a * delta;
                        self.x[self.basis[r]] = self.beta[r];
                    }
                }
                self.x[j] = target;
            }
        }
        Ok(())
    }

    fn infeasibility(&self, r: usize) -> f64 {
        let b = self.basis[r];
        let v = self.beta[r];
        if v < self.lower[b] - PRIMAL_TOL {
            self.lower[b] - v
        } else if v > self.upper[b] + PRIMAL_TOL {
            v - self.upper[b]
        } else {
            0.0
        }
    }

    /// Run the dual simplex to optimality or infeasibility.
    pub fn solve(&mut self) -> Result<LpOutcome> {
        let width = self.n + self.m;
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_LIMIT;
            // leaving row
            let mut leave = None;
            let mut best = 0.0;
            for r in 0..self.m {
                let inf = self.infeasibility(r);
                if inf > 0.0 {
                    if bland {
                        let better = match leave {
                            None => true,
                            Some(lr) => self.basis[r] < self.basis[lr],
                        };
                        if better {
                            leave = Some(r);
                        }
                    } else if inf > best {
                        best = inf;
                        leave = Some(r);
                    }
                }
            }
            let Some(r) = leave else {
                return Ok(LpOutcome::Optimal {
                    objective: self.cost.iter().zip(&self.x).map(|(c, v)| c * v).sum(),
                    x: self.x[..self.n].to_vec(),
                });
            };
            let leaving = self.basis[r];
            let to_lower = self.beta[r] < self.lower[leaving];
            let target = if to_lower {
                self.lower[leaving]
            } else {
                self.upper[leaving]
            };

            // entering column by the dual ratio test
            let row = &self.tab[r * width..(r + 1) * width];
            let mut enter = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_alpha = 0.0;
            for (j, &a) in row.iter().enumerate() {
                if self.row_of[j] != usize::MAX
                    || a.abs() <= PIVOT_TOL
                    || self.lower[j] == self.upper[j]
                {
                    continue;
                }
                let at_upper = self.x[j] == self.upper[j] && self.x[j] != self.lower[j];
                let eligible = if to_lower {
                    (!at_upper && a < 0.0) || (at_upper && a > 0.0)
                } else {
                    (!at_upper && a > 0.0) || (at_upper && a < 0.0)
                };
                if !eligible {
                    continue;
                }
                let ratio = (self.d[j] / a).abs();
                let better = if bland {
                    ratio < best_ratio - 1e-12
                } else {
                    ratio < best_ratio - 1e-12
                        || (ratio <= best_ratio + 1e-12 && a.abs() > best_alpha)
                };
                if better {
                    best_ratio = ratio;
                    best_alpha = a.abs();
                    enter = Some(j);
                }
            }
            let Some(q) = enter else {
                return Ok(LpOutcome::Infeasible);
            };
            if best_ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, q, target);
            self.pivots += 1;
            if self.pivots > self.max_pivots {
                return Err(Error::Lp(format!(
                    "no convergence after {} pivots",
                    self.pivots
                )));
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, target: f64) {
        let width = self.n + self.m;
        let leaving = self.basis[r];
        let alpha = self.tab[r * width + q];
        let theta = (self.beta[r] - target) / alpha;

        // primal values
        for i in 0..self.m {
            let a = self.tab[i * width + q];
            if a != 0.0 && i != r {
                self.beta[i] -= theta * a;
            }
        }
        let entering_value = self.x[q] + theta;
        self.beta[r] = entering_value;

        // reduced costs
        let dq = self.d[q] / alpha;
        if dq != 0.0 {
            let (prow, d) = (&self.tab[r * width..(r + 1) * width], &mut self.d);
            for (dj, &a) in d.iter_mut().zip(prow) {
                if a != 0.0 {
                    *dj -= dq * a;
                }
            }
        }
        self.d[q] = 0.0;

        // tableau
        let inv = 1.0 / alpha;
        for v in &mut self.tab[r * width..(r + 1) * width] {
            *v *= inv;
        }
        let pivot_row: Vec<(usize, f64)> = self.tab[r * width..(r + 1) * width]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j, v))
            .collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * width + q];
            if f == 0.0 {
                continue;
            }
            let dst = &mut self.tab[i * width..(i + 1) * width];
            for &(j, v) in &pivot_row {
                dst[j] -= f * v;
            }
            dst[q] = 0.0;
        }
        self.tab[r * width + q] = 1.0;

        self.basis[r] = q;
        self.row_of[q] = r;
        self.row_of[leaving] = usize::MAX;
        self.x[leaving] = target;
        for i in 0..self.m {
            self.x[self.basis[i]] = self.beta[i];
        }
    }
}

/// Solve `lp` from scratch.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    DualSimplex::new(lp)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: &[(usize, f64)], sense: Sense, rhs: f64) -> Row {
        Row {
            coeffs: coeffs.to_vec(),
            sense,
            rhs,
        }
    }

    fn brute_box(lp: &LinearProgram, step: f64) -> f64 {
        // grid search over a 2-D box; only for tiny checks
        let mut best = f64::INFINITY;
        let steps = ((lp.upper[0] - lp.lower[0]) / step).round() as usize;
        let steps1 = ((lp.upper[1] - lp.lower[1]) / step).round() as usize;
        for a in 0..=steps {
            for b in 0..=steps1 {
                let x = [lp.lower[0] + a as f64 * step, lp.lower[1] + b as f64 * step];
                if lp.max_violation(&x) <= 1e-12 {
                    best = best.min(lp.objective(&x));
                }
            }
        }
        best
    }

    #[test]
    fn covering_lp() {
        // min x + 2y, x + y >= 1.5, x <= 1, y <= 1
        let lp = LinearProgram {
            cost: vec![1.0, 2.0],
            lower: vec![0.0; 2],
            upper: vec![1.0; 2],
            rows: vec![row(&[(0, 1.0), (1, 1.0)], Sense::Ge, 1.5)],
        };
        match solve_lp(&lp).unwrap() {
            LpOutcome::Optimal { objective, x } => {
                assert!((objective - 2.0).abs() < 1e-12);
                assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
            }
            LpOutcome::Infeasible => panic!("feasible"),
        }
    }

    #[test]
    fn detects_infeasible() {
        let lp = LinearProgram {
            cost: vec![1.0, 1.0],
            lower: vec![0.0; 2],
            upper: vec![1.0; 2],
            rows: vec![row(&[(0, 1.0), (1, 1.0)], Sense::Ge, 3.0)],
        };
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn equality_and_negative_costs() {
        // min -x + y, x + y = 1, x - y <= 0.2
        let lp = LinearProgram {
            cost: vec![-1.0, 1.0],
            lower: vec![0.0; 2],
            upper: vec![1.0; 2],
            rows: vec![
                row(&[(0, 1.0), (1, 1.0)], Sense::Eq, 1.0),
                row(&[(0, 1.0), (1, -1.0)], Sense::Le, 0.2),
            ],
        };
        let LpOutcome::Optimal { objective, .. } = solve_lp(&lp).unwrap() else {
            panic!()
        };
        assert!((objective - (-0.2)).abs() < 1e-12);
        assert!((objective - brute_box(&lp, 0.01)).abs() < 1e-9);
    }

    #[test]
    fn fixing_a_variable_warm_start_matches_cold() {
        let lp = LinearProgram {
            cost: vec![1.0, 2.0, 0.5],
            lower: vec![0.0; 3],
            upper: vec![1.0; 3],
            rows: vec![
                row(&[(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Ge, 1.7),
                row(&[(0, 1.0), (2, -1.0)], Sense::Le, 0.5),
            ],
        };
        let mut warm = DualSimplex::new(&lp).unwrap();
        warm.solve().unwrap();
        warm.set_bounds(2, 0.0, 0.0).unwrap();
        let w = warm.solve().unwrap();
        let mut fixed = lp.clone();
        fixed.upper[2] = 0.0;
        let c = solve_lp(&fixed).unwrap();
        match (w, c) {
            (LpOutcome::Optimal { objective: a, .. }, LpOutcome::Optimal { objective: b, .. }) => {
                assert!((a - b).abs() < 1e-12)
            }
            (LpOutcome::Infeasible, LpOutcome::Infeasible) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn refix_at_optimum_is_idempotent() {
        let lp = LinearProgram {
            cost: vec![3.0, 1.0, 2.0],
            lower: vec![0.0; 3],
            upper: vec![1.0; 3],
            rows: vec![
                row(&[(0, 2.0), (1, 1.0), (2, 1.0)], Sense::Ge, 1.3),
                row(&[(1, 1.0), (2, 1.0)], Sense::Le, 1.0),
            ],
        };
        let LpOutcome::Optimal { objective, x } = solve_lp(&lp).unwrap() else {
            panic!()
        };
        for j in 0..3 {
            let mut s = DualSimplex::new(&lp).unwrap();
            s.set_bounds(j, x[j], x[j]).unwrap();
            let LpOutcome::Optimal { objective: o2, .. } = s.solve().unwrap() else {
                panic!()
            };
            assert!((o2 - objective).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn matches_grid_on_random_2d(
                c0 in -2.0f64..2.0, c1 in -2.0f64..2.0,
                a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -0.5f64..1.5), 1..4),
            ) {
                // rows with coefficients and rhs on a 0.25 lattice so the grid hits vertices
                let q = |v: f64| (v * 4.0).round() / 4.0;
                let rows: Vec<Row> = a.iter().map(|&(x, y, b)| row(&[(0, q(x)), (1, q(y))], Sense::Le, q(b))).collect();
                let lp = LinearProgram { cost: vec![c0, c1], lower: vec![0.0; 2], upper: vec![1.0; 2], rows };
                let grid = brute_box(&lp, 1.0 / 64.0);
                match solve_lp(&lp).unwrap() {
                    LpOutcome::Optimal { objective, x } => {
                        prop_assert!(lp.max_violation(&x) < 1e-8);
                        prop_assert!(objective <= grid + 1e-9);
                    }
                    LpOutcome::Infeasible => prop_assert!(grid.is_infinite()),
                }
            }
        }
    }
}
