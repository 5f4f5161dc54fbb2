use std::collections::BTreeSet;

use super::Scenario;

/// One `lambda = 1` entry: `group` scheduled in `slot` of `frame` at `cluster`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotChoice {
    pub frame: usize,
    pub cluster: usize,
    pub slot: usize,
    pub group: u32,
}

/// What happens in one frame: where the UAV is and which group each slot
/// serves (`None` = idle slot).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlan {
    /// Cluster index, or `None` for the dock.
    pub cluster: Option<usize>,
    pub slots: Vec<Option<u32>>,
}

impl FramePlan {
    pub fn dock(slots: usize) -> Self {
        Self {
            cluster: None,
            slots: vec![None; slots],
        }
    }
}

/// Binary decision variables of the joint problem.
///
/// `nu` is stored densely over locations `0..=N` (index `N` is the dock)
/// and frames; `lambda` as the set of its nonzero entries. Any combination
/// can be represented, including invalid ones, so that validation can
/// report them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    clusters: usize,
    frames: usize,
    slots: usize,
    nu: Vec<bool>,
    lambda: BTreeSet<SlotChoice>,
}

impl Schedule {
    /// All variables zero.
    pub fn empty(clusters: usize, frames: usize, slots: usize) -> Self {
        Self {
            clusters,
            frames,
            slots,
            nu: vec![false; (clusters + 1) * frames],
            lambda: BTreeSet::new(),
        }
    }

    pub fn for_scenario(scenario: &Scenario) -> Self {
        Self::empty(
            scenario.num_clusters(),
            scenario.max_frames(),
            scenario.slots(),
        )
    }

    /// Build from one plan per frame; missing trailing frames are spent at
    /// the dock.
    pub fn from_plans(scenario: &Scenario, plans: &[FramePlan]) -> Self {
        let mut s = Self::for_scenario(scenario);
        for t in 0..s.frames {
            match plans.get(t) {
                Some(plan) => {
                    let loc = plan.cluster.unwrap_or(s.clusters);
                    s.set_nu(loc, t, true);
                    if let Some(n) = plan.cluster {
                        for (i, g) in plan.slots.iter().enumerate() {
                            if let Some(g) = g {
                                s.assign(t, n, i, *g);
                            }
                        }
                    }
                }
                None => s.set_nu(s.clusters, t, true),
            }
        }
        s
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn nu(&self, location: usize, t: usize) -> bool {
        self.nu[location * self.frames + t]
    }

    pub fn set_nu(&mut self, location: usize, t: usize, value: bool) {
        self.nu[location * self.frames + t] = value;
    }

    pub fn assign(&mut self, frame: usize, cluster: usize, slot: usize, group: u32) {
        self.lambda.insert(SlotChoice {
            frame,
            cluster,
            slot,
            group,
        });
    }

    pub fn lambda(&self) -> impl Iterator<Item = &SlotChoice> {
        self.lambda.iter()
    }

    pub fn lambda_count(&self) -> usize {
        self.lambda.len()
    }

    /// The unique location with `nu = 1` in frame `t`, if there is exactly one.
    pub fn location(&self, t: usize) -> Option<usize> {
        let mut it = (0..=self.clusters).filter(|&n| self.nu(n, t));
        match (it.next(), it.next()) {
            (Some(n), None) => Some(n),
            _ => None,
        }
    }

    /// Hovering frames `t_n`.
    pub fn hover_frames(&self, n: usize) -> usize {
        (0..self.frames).filter(|&t| self.nu(n, t)).count()
    }

    /// Frames spent at clusters before `n` (`tau_n`).
    pub fn elapsed_before(&self, n: usize) -> usize {
        (0..n).map(|m| self.hover_frames(m)).sum()
    }

    /// Total hovering frames over all clusters.
    pub fn total_hover_frames(&self) -> usize {
        (0..self.clusters).map(|n| self.hover_frames(n)).sum()
    }

    /// Per-frame view; frames without a unique location are reported at the
    /// first location with `nu = 1` (or the dock).
    pub fn plans(&self) -> Vec<FramePlan> {
        let mut plans: Vec<FramePlan> = (0..self.frames)
            .map(|t| {
                let loc = (0..=self.clusters)
                    .find(|&n| self.nu(n, t))
                    .unwrap_or(self.clusters);
                FramePlan {
                    cluster: (loc < self.clusters).then_some(loc),
                    slots: vec![None; self.slots],
                }
            })
            .collect();
        for c in &self.lambda {
            if plans[c.frame].cluster == Some(c.cluster) && c.slot < self.slots {
                plans[c.frame].slots[c.slot] = Some(c.group);
            }
        }
        plans
    }
}
