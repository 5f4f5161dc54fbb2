use std::io::Write;

use super::simplex::{LinearProgram, Row, Sense};
use crate::env::{ChannelTrace, RateTable, Scenario, Schedule};
use crate::error::{Error, Result};
use crate::group;

/// Default cap on the number of ILP variables.
pub const DEFAULT_VARIABLE_BUDGET: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Group `group` in `slot` of `frame` at `cluster`.
    Lambda {
        cluster: usize,
        frame: usize,
        group: u32,
        slot: usize,
    },
    /// UAV at `location` (cluster or dock) in `frame`.
    Nu { location: usize, frame: usize },
    /// Product `nu * lambda` of the matching variables.
    Product {
        cluster: usize,
        frame: usize,
        group: u32,
        slot: usize,
    },
}

/// Linearized joint problem: every bilinear `nu * lambda` is replaced by a
/// product variable `z` with the three McCormick rows
/// `z <= nu`, `z <= lambda`, `z >= nu + lambda - 1`, which are exact at
/// binary points. All variables are binary.
#[derive(Debug, Clone)]
pub struct IlpInstance {
    pub lp: LinearProgram,
    pub kinds: Vec<VarKind>,
    /// `(z, nu, lambda)` variable indices of each product.
    pub products: Vec<(usize, usize, usize)>,
    /// Row labels, parallel to `lp.rows`.
    pub row_names: Vec<String>,
    clusters: usize,
    frames: usize,
    slots: usize,
}

struct Layout {
    /// Start of each cluster's lambda block.
    lambda_start: Vec<usize>,
    lambda_total: usize,
    nu_start: usize,
    frames: usize,
    slots: usize,
    catalog: Vec<usize>,
}

impl Layout {
    fn lambda(&self, n: usize, t: usize, g: u32, i: usize) -> usize {
        self.lambda_start[n] + (t * self.catalog[n] + (g as usize - 1)) * self.slots + i
    }

    fn nu(&self, loc: usize, t: usize) -> usize {
        self.nu_start + loc * self.frames + t
    }

    fn product(&self, n: usize, t: usize, g: u32, i: usize) -> usize {
        self.nu_start + (self.catalog.len() + 1) * self.frames + self.lambda(n, t, g, i)
    }
}

/// Count of variables `linearize` would create.
pub fn variable_count(scenario: &Scenario) -> usize {
    let lambda: usize = (0..scenario.num_clusters())
        .map(|n| scenario.catalog_size(n) * scenario.max_frames() * scenario.slots())
        .sum();
    2 * lambda + (scenario.num_clusters() + 1) * scenario.max_frames()
}

/// Build the linearized program for a frozen channel trace.
pub fn linearize(
    scenario: &Scenario,
    trace: &ChannelTrace,
    variable_budget: usize,
) -> Result<IlpInstance> {
    trace.check(scenario)?;
    let count = variable_count(scenario);
    if count > variable_budget {
        return Err(Error::TooLarge {
            what: "ILP variables",
            size: count as f64,
            limit: variable_budget as f64,
        });
    }
    let rates = RateTable::new(scenario, trace);
    let n_clusters = scenario.num_clusters();
    let frames = scenario.max_frames();
    let slots = scenario.slots();
    let catalog: Vec<usize> = (0..n_clusters).map(|n| scenario.catalog_size(n)).collect();
    let mut lambda_start = Vec::with_capacity(n_clusters);
    let mut acc = 0;
    for &g in &catalog {
        lambda_start.push(acc);
        acc += g * frames * slots;
    }
    let layout = Layout {
        lambda_start,
        lambda_total: acc,
        nu_start: acc,
        frames,
        slots,
        catalog,
    };
    let dock = n_clusters;
    let total = 2 * layout.lambda_total + (n_clusters + 1) * frames;
    debug_assert_eq!(total, count);

    let mut kinds = vec![
        VarKind::Nu {
            location: 0,
            frame: 0
        };
        total
    ];
    let mut cost = vec![0.0; total];
    let mut products = Vec::with_capacity(layout.lambda_total);
    let hover = scenario.hover_energy_per_frame();
    for n in 0..n_clusters {
        for t in 0..frames {
            let table = rates.get(n, t);
            for g in group::all(scenario.users(n)) {
                for i in 0..slots {
                    let l = layout.lambda(n, t, g, i);
                    let z = layout.product(n, t, g, i);
                    kinds[l] = VarKind::Lambda {
                        cluster: n,
                        frame: t,
                        group: g,
                        slot: i,
                    };
                    kinds[z] = VarKind::Product {
                        cluster: n,
                        frame: t,
                        group: g,
                        slot: i,
                    };
                    cost[z] = table.energy(g);
                    products.push((z, layout.nu(n, t), l));
                }
            }
        }
    }
    for loc in 0..=n_clusters {
        for t in 0..frames {
            let v = layout.nu(loc, t);
            kinds[v] = VarKind::Nu {
                location: loc,
                frame: t,
            };
            if loc < n_clusters {
                cost[v] = hover;
            }
        }
    }

    let mut rows = Vec::new();
    let mut names = Vec::new();
    // demands, scaled so the right-hand side is 1
    for n in 0..n_clusters {
        for k in 0..scenario.users(n) {
            let q = scenario.demand(n, k);
            if q == 0.0 {
                continue;
            }
            let mut coeffs = Vec::new();
            for t in 0..frames {
                let table = rates.get(n, t);
                for g in group::all(scenario.users(n)).filter(|&g| group::contains(g, k)) {
                    let d = table.data(g, k);
                    if d > 0.0 {
                        for i in 0..slots {
                            coeffs.push((layout.product(n, t, g, i), d / q));
                        }
                    }
                }
            }
            rows.push(Row {
                coeffs,
                sense: Sense::Ge,
                rhs: 1.0,
            });
            names.push(format!("demand_c{n}_u{k}"));
        }
    }
    // visiting order: stay or move to the next location
    for t in 0..frames.saturating_sub(1) {
        for n in 0..n_clusters {
            rows.push(Row {
                coeffs: vec![
                    (layout.nu(n, t), 1.0),
                    (layout.nu(n, t + 1), -1.0),
                    (layout.nu(n + 1, t + 1), -1.0),
                ],
                sense: Sense::Le,
                rhs: 0.0,
            });
            names.push(format!("order_c{n}_f{t}"));
        }
        rows.push(Row {
            coeffs: vec![(layout.nu(dock, t), 1.0), (layout.nu(dock, t + 1), -1.0)],
            sense: Sense::Le,
            rhs: 0.0,
        });
        names.push(format!("dock_f{t}"));
    }
    if frames > 0 {
        rows.push(Row {
            coeffs: vec![(layout.nu(0, 0), 1.0), (layout.nu(dock, 0), 1.0)],
            sense: Sense::Eq,
            rhs: 1.0,
        });
        names.push("start".into());
    }
    for n in 0..n_clusters {
        for t in 0..frames {
            // at most I groups, and only while hovering
            let mut coeffs: Vec<(usize, f64)> = group::all(scenario.users(n))
                .flat_map(|g| (0..slots).map(move |i| (g, i)))
                .map(|(g, i)| (layout.lambda(n, t, g, i), 1.0))
                .collect();
            coeffs.push((layout.nu(n, t), -(slots as f64)));
            rows.push(Row {
                coeffs,
                sense: Sense::Le,
                rhs: 0.0,
            });
            names.push(format!("slots_c{n}_f{t}"));
            for i in 0..slots {
                rows.push(Row {
                    coeffs: group::all(scenario.users(n))
                        .map(|g| (layout.lambda(n, t, g, i), 1.0))
                        .collect(),
                    sense: Sense::Le,
                    rhs: 1.0,
                });
                names.push(format!("slot_c{n}_f{t}_s{i}"));
            }
        }
    }
    for t in 0..frames {
        rows.push(Row {
            coeffs: (0..=n_clusters)
                .map(|loc| (layout.nu(loc, t), 1.0))
                .collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
        names.push(format!("location_f{t}"));
    }
    for &(z, nu, lam) in &products {
        rows.push(Row {
            coeffs: vec![(z, 1.0), (nu, -1.0)],
            sense: Sense::Le,
            rhs: 0.0,
        });
        names.push(format!("mc_nu_{z}"));
        rows.push(Row {
            coeffs: vec![(z, 1.0), (lam, -1.0)],
            sense: Sense::Le,
            rhs: 0.0,
        });
        names.push(format!("mc_lambda_{z}"));
        rows.push(Row {
            coeffs: vec![(z, 1.0), (nu, -1.0), (lam, -1.0)],
            sense: Sense::Ge,
            rhs: -1.0,
        });
        names.push(format!("mc_both_{z}"));
    }

    Ok(IlpInstance {
        lp: LinearProgram {
            cost,
            lower: vec![0.0; total],
            upper: vec![1.0; total],
            rows,
        },
        kinds,
        products,
        row_names: names,
        clusters: n_clusters,
        frames,
        slots,
    })
}

/// Outcome of the exhaustive McCormick check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McCormickReport {
    pub products: usize,
    /// Products whose rows admit some `z != nu * lambda` or reject
    /// `z = nu * lambda` for a binary pair.
    pub failures: usize,
}

impl IlpInstance {
    /// For every product variable, enumerate the four binary `(nu, lambda)`
    /// pairs and both values of `z` against the rows that involve only
    /// those three variables; the rows must admit exactly `z = nu * lambda`.
    pub fn mccormick_check(&self) -> McCormickReport {
        let mut owner = vec![usize::MAX; self.num_vars()];
        for (p, &(z, _, _)) in self.products.iter().enumerate() {
            owner[z] = p;
        }
        let mut rows_of: Vec<Vec<&Row>> = vec![Vec::new(); self.products.len()];
        for row in &self.lp.rows {
            let Some(p) = row
                .coeffs
                .iter()
                .map(|&(j, _)| owner[j])
                .find(|&p| p != usize::MAX)
            else {
                continue;
            };
            let (z, nu, lam) = self.products[p];
            if row
                .coeffs
                .iter()
                .all(|&(j, _)| j == z || j == nu || j == lam)
            {
                rows_of[p].push(row);
            }
        }
        let mut failures = 0;
        for (p, &(z, nu, _)) in self.products.iter().enumerate() {
            let ok = (0..4).all(|bits| {
                let (a, b) = ((bits & 1) as f64, (bits >> 1) as f64);
                [0.0, 1.0].iter().all(|&zv| {
                    let admitted = rows_of[p].iter().all(|row| {
                        let lhs: f64 = row
                            .coeffs
                            .iter()
                            .map(|&(j, c)| {
                                c * if j == z {
                                    zv
                                } else if j == nu {
                                    a
                                } else {
                                    b
                                }
                            })
                            .sum();
                        match row.sense {
                            Sense::Le => lhs <= row.rhs + 1e-12,
                            Sense::Ge => lhs >= row.rhs - 1e-12,
                            Sense::Eq => (lhs - row.rhs).abs() <= 1e-12,
                        }
                    });
                    admitted == (zv == a * b)
                })
            });
            if !ok {
                failures += 1;
            }
        }
        McCormickReport {
            products: self.products.len(),
            failures,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.kinds.len()
    }

    pub fn var_name(&self, j: usize) -> String {
        match self.kinds[j] {
            VarKind::Lambda {
                cluster,
                frame,
                group,
                slot,
            } => format!("lambda_c{cluster}_f{frame}_g{group}_s{slot}"),
            VarKind::Nu { location, frame } => format!("nu_l{location}_f{frame}"),
            VarKind::Product {
                cluster,
                frame,
                group,
                slot,
            } => format!("z_c{cluster}_f{frame}_g{group}_s{slot}"),
        }
    }

    /// Schedule of a binary point (entries above 1/2 count as one).
    pub fn decode(&self, x: &[f64]) -> Schedule {
        let mut s = Schedule::empty(self.clusters, self.frames, self.slots);
        for (j, kind) in self.kinds.iter().enumerate() {
            if x[j] <= 0.5 {
                continue;
            }
            match *kind {
                VarKind::Lambda {
                    cluster,
                    frame,
                    group,
                    slot,
                } => s.assign(frame, cluster, slot, group),
                VarKind::Nu { location, frame } => s.set_nu(location, frame, true),
                VarKind::Product { .. } => {}
            }
        }
        s
    }

    /// Write the program in CPLEX LP text format.
    pub fn write_lp<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "\\ joint scheduling, McCormick-linearized")?;
        writeln!(w, "Minimize")?;
        write!(w, " obj:")?;
        let mut any = false;
        for (j, &c) in self.lp.cost.iter().enumerate() {
            if c != 0.0 {
                write!(
                    w,
                    " {} {:.17e} {}",
                    if c < 0.0 { "-" } else { "+" },
                    c.abs(),
                    self.var_name(j)
                )?;
                any = true;
            }
        }
        if !any {
            write!(w, " 0 {}", self.var_name(0))?;
        }
        writeln!(w)?;
        writeln!(w, "Subject To")?;
        for (row, name) in self.lp.rows.iter().zip(&self.row_names) {
            write!(w, " {name}:")?;
            for &(j, a) in &row.coeffs {
                write!(
                    w,
                    " {} {:.17e} {}",
                    if a < 0.0 { "-" } else { "+" },
                    a.abs(),
                    self.var_name(j)
                )?;
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            writeln!(w, " {op} {:.17e}", row.rhs)?;
        }
        writeln!(w, "Binaries")?;
        for j in 0..self.num_vars() {
            writeln!(w, " {}", self.var_name(j))?;
        }
        writeln!(w, "End")?;
        Ok(())
    }
}
