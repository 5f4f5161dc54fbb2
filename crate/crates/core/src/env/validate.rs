use std::fmt;

use super::{ChannelTrace, RateTable, Scenario, Schedule};
use crate::channel::optimal_flying_speed;
use crate::group;

/// Relative slack when comparing delivered bits against demands.
pub(crate) const DEMAND_TOL: f64 = 1e-9;

/// A broken constraint of the joint scheduling problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Schedule dimensions differ from the scenario.
    Shape(String),
    /// A user's delivered bits fall short of its demand.
    Demand {
        cluster: usize,
        user: usize,
        delivered: f64,
        required: f64,
    },
    /// Left cluster `cluster` after frame `frame` for anything but the next
    /// cluster in order.
    Order { cluster: usize, frame: usize },
    /// The mission does not start at the first cluster (or the dock).
    Start,
    /// Left the dock once there.
    DockExit { frame: usize },
    /// More groups scheduled in a frame than it has slots, or groups
    /// scheduled where the UAV is not hovering.
    SlotCount {
        cluster: usize,
        frame: usize,
        assigned: usize,
        allowed: usize,
    },
    /// More than one group in one slot.
    SlotConflict {
        cluster: usize,
        frame: usize,
        slot: usize,
    },
    /// Not exactly one location in a frame.
    Location { frame: usize, count: usize },
    /// Slot or group index outside the catalog.
    UnknownGroup {
        cluster: usize,
        frame: usize,
        slot: usize,
        group: u32,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(s) => write!(f, "shape: {s}"),
            Violation::Demand {
                cluster,
                user,
                delivered,
                required,
            } => write!(
                f,
                "demand: cluster {cluster} user {user} got {delivered} of {required} bits"
            ),
            Violation::Order { cluster, frame } => write!(
                f,
                "order: cluster {cluster} left out of order after frame {frame}"
            ),
            Violation::Start => write!(f, "start: first frame is not at cluster 0"),
            Violation::DockExit { frame } => write!(f, "dock: left the dock after frame {frame}"),
            Violation::SlotCount {
                cluster,
                frame,
                assigned,
                allowed,
            } => write!(
                f,
                "slots: cluster {cluster} frame {frame} has {assigned} groups, {allowed} allowed"
            ),
            Violation::SlotConflict {
                cluster,
                frame,
                slot,
            } => {
                write!(
                    f,
                    "conflict: cluster {cluster} frame {frame} slot {slot} has several groups"
                )
            }
            Violation::Location { frame, count } => {
                write!(f, "location: frame {frame} has {count} locations")
            }
            Violation::UnknownGroup {
                cluster,
                frame,
                slot,
                group,
            } => write!(
                f,
                "unknown group {group} in cluster {cluster} frame {frame} slot {slot}"
            ),
        }
    }
}

/// Bits delivered to each user (`nu * lambda * d`) under the trace.
pub fn delivered_bits(
    scenario: &Scenario,
    schedule: &Schedule,
    rates: &RateTable,
) -> Vec<Vec<f64>> {
    let mut delivered: Vec<Vec<f64>> = scenario
        .demands()
        .iter()
        .map(|u| vec![0.0; u.len()])
        .collect();
    for c in schedule.lambda() {
        if !in_catalog(scenario, schedule, c.cluster, c.frame, c.slot, c.group)
            || !schedule.nu(c.cluster, c.frame)
        {
            continue;
        }
        let table = rates.get(c.cluster, c.frame);
        for k in group::members(c.group) {
            delivered[c.cluster][k] += table.data(c.group, k);
        }
    }
    delivered
}

fn in_catalog(
    scenario: &Scenario,
    schedule: &Schedule,
    n: usize,
    t: usize,
    i: usize,
    g: u32,
) -> bool {
    n < scenario.num_clusters()
        && t < schedule.frames()
        && i < schedule.slots()
        && g >= 1
        && (g as usize) <= scenario.catalog_size(n)
}

/// Every constraint the schedule breaks under the given channel trace.
///
/// Checked: demands, visiting order (stay or move to the next cluster, the
/// last cluster moving on to the dock), start at the first cluster, dock is
/// absorbing, at most `I` groups per hovering frame and none elsewhere, at
/// most one group per slot, exactly one location per frame.
pub fn validate_schedule(
    scenario: &Scenario,
    schedule: &Schedule,
    trace: &ChannelTrace,
) -> Vec<Violation> {
    let rates = RateTable::new(scenario, trace);
    validate_with_rates(scenario, schedule, &rates)
}

pub fn validate_with_rates(
    scenario: &Scenario,
    schedule: &Schedule,
    rates: &RateTable,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let n_clusters = scenario.num_clusters();
    let frames = scenario.max_frames();
    let slots = scenario.slots();
    if schedule.clusters() != n_clusters || schedule.frames() != frames || schedule.slots() != slots
    {
        out.push(Violation::Shape(format!(
            "schedule is {}x{}x{}, scenario is {}x{}x{}",
            schedule.clusters(),
            schedule.frames(),
            schedule.slots(),
            n_clusters,
            frames,
            slots
        )));
        return out;
    }
    if rates.frames() < frames {
        out.push(Violation::Shape(
            "channel trace shorter than the horizon".into(),
        ));
        return out;
    }
    let dock = scenario.dock();

    let delivered = delivered_bits(scenario, schedule, rates);
    for (n, users) in scenario.demands().iter().enumerate() {
        for (k, &q) in users.iter().enumerate() {
            let d = delivered[n][k];
            if d < q * (1.0 - DEMAND_TOL) {
                out.push(Violation::Demand {
                    cluster: n,
                    user: k,
                    delivered: d,
                    required: q,
                });
            }
        }
    }

    for t in 0..frames.saturating_sub(1) {
        for n in 0..n_clusters {
            if schedule.nu(n, t) && !schedule.nu(n, t + 1) && !schedule.nu(n + 1, t + 1) {
                out.push(Violation::Order {
                    cluster: n,
                    frame: t,
                });
            }
        }
        if schedule.nu(dock, t) && !schedule.nu(dock, t + 1) {
            out.push(Violation::DockExit { frame: t });
        }
    }
    if frames > 0 && schedule.nu(0, 0) == schedule.nu(dock, 0) {
        out.push(Violation::Start);
    }

    let mut per_frame = vec![vec![0usize; frames]; n_clusters + 1];
    let mut per_slot = std::collections::BTreeMap::new();
    for c in schedule.lambda() {
        if !in_catalog(scenario, schedule, c.cluster, c.frame, c.slot, c.group) {
            out.push(Violation::UnknownGroup {
                cluster: c.cluster,
                frame: c.frame,
                slot: c.slot,
                group: c.group,
            });
            continue;
        }
        per_frame[c.cluster][c.frame] += 1;
        *per_slot
            .entry((c.cluster, c.frame, c.slot))
            .or_insert(0usize) += 1;
    }
    for (n, row) in per_frame.iter().enumerate().take(n_clusters) {
        for (t, &assigned) in row.iter().enumerate() {
            let allowed = if schedule.nu(n, t) { slots } else { 0 };
            if assigned > allowed {
                out.push(Violation::SlotCount {
                    cluster: n,
                    frame: t,
                    assigned,
                    allowed,
                });
            }
        }
    }
    for ((n, t, i), count) in per_slot {
        if count > 1 {
            out.push(Violation::SlotConflict {
                cluster: n,
                frame: t,
                slot: i,
            });
        }
    }
    for t in 0..frames {
        let count = (0..=n_clusters).filter(|&n| schedule.nu(n, t)).count();
        if count != 1 {
            out.push(Violation::Location { frame: t, count });
        }
    }
    out
}

/// Energy of a schedule under a channel trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBreakdown {
    pub comm_j: f64,
    pub hover_j: f64,
    /// Energy-optimal flight over all legs; reported only, not part of
    /// `total_j`.
    pub fly_j: f64,
    /// `comm_j + hover_j`.
    pub total_j: f64,
    pub delivered_bits: f64,
    pub demand_bits: f64,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl EnergyBreakdown {
    /// Delivered share of the total demand, each user's credit capped at
    /// its demand.
    pub fn delivered_ratio(&self) -> f64 {
        if self.demand_bits == 0.0 {
            1.0
        } else {
            self.delivered_bits / self.demand_bits
        }
    }

    pub fn mission_total_j(&self) -> f64 {
        self.total_j + self.fly_j
    }
}

/// Communication and hovering energy of `schedule` plus its feasibility.
pub fn objective(
    scenario: &Scenario,
    schedule: &Schedule,
    trace: &ChannelTrace,
) -> EnergyBreakdown {
    let rates = RateTable::new(scenario, trace);
    objective_with_rates(scenario, schedule, &rates)
}

pub fn objective_with_rates(
    scenario: &Scenario,
    schedule: &Schedule,
    rates: &RateTable,
) -> EnergyBreakdown {
    let violations = validate_with_rates(scenario, schedule, rates);
    let shape_ok = !violations.iter().any(|v| matches!(v, Violation::Shape(_)));
    let mut comm_j = 0.0;
    let mut delivered = 0.0;
    if shape_ok {
        for c in schedule.lambda() {
            if in_catalog(scenario, schedule, c.cluster, c.frame, c.slot, c.group)
                && schedule.nu(c.cluster, c.frame)
            {
                comm_j += rates.get(c.cluster, c.frame).energy(c.group);
            }
        }
        let per_user = delivered_bits(scenario, schedule, rates);
        for (n, users) in scenario.demands().iter().enumerate() {
            for (k, &q) in users.iter().enumerate() {
                delivered += per_user[n][k].min(q);
            }
        }
    }
    let hover_j = scenario.hover_energy_per_frame() * schedule.total_hover_frames() as f64;
    EnergyBreakdown {
        comm_j,
        hover_j,
        fly_j: optimal_flying_speed(&scenario.propulsion).energy_j,
        total_j: comm_j + hover_j,
        delivered_bits: delivered,
        demand_bits: scenario.total_demand(),
        feasible: violations.is_empty(),
        violations,
    }
}
