//! Problem instances, episode dynamics, schedule validation and the energy
//! objective.
//!
//! Clusters are indexed from 0 and the dock is location `N`. The UAV starts
//! above cluster 0, visits clusters in order (staying or moving one step per
//! frame) and ends at the dock. A hovering frame may leave slots idle; idle
//! slots cost no communication energy.

mod mdp;
mod scenario;
mod schedule;
mod trace;
mod validate;

pub(crate) use validate::DEMAND_TOL;

pub use mdp::{new_episode, rollout, EnvState, FrameOutcome};
pub use scenario::{Scenario, MAX_USERS_PER_CLUSTER};
pub use schedule::{FramePlan, Schedule, SlotChoice};
pub use trace::{channel_rng, slot_outcome, ChannelTrace, RateTable, SlotTable};
pub use validate::{
    delivered_bits, objective, objective_with_rates, validate_schedule, validate_with_rates,
    EnergyBreakdown, Violation,
};

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Scenario, ChannelTrace) {
        let s = Scenario::with_defaults(vec![vec![2e5], vec![1e5], vec![1e5]], 6).unwrap();
        let t = ChannelTrace::generate(&s, 5);
        (s, t)
    }

    fn plan(cluster: Option<usize>, g: Option<u32>) -> FramePlan {
        FramePlan {
            cluster,
            slots: vec![g; 10],
        }
    }

    #[test]
    fn skipping_a_cluster_breaks_order() {
        let (s, t) = setup();
        let sch = Schedule::from_plans(&s, &[plan(Some(0), Some(1)), plan(Some(2), Some(1))]);
        let v = validate_schedule(&s, &sch, &t);
        assert!(v.contains(&Violation::Order {
            cluster: 0,
            frame: 0
        }));
    }

    #[test]
    fn two_groups_in_one_slot_conflict() {
        let s = Scenario::with_defaults(vec![vec![2e5, 1e5], vec![1e5]], 6).unwrap();
        let t = ChannelTrace::generate(&s, 5);
        let mut sch = Schedule::from_plans(&s, &[plan(Some(0), None)]);
        sch.assign(0, 0, 0, 1);
        sch.assign(0, 0, 0, 2);
        let v = validate_schedule(&s, &sch, &t);
        assert!(v.contains(&Violation::SlotConflict {
            cluster: 0,
            frame: 0,
            slot: 0
        }));
        sch.assign(0, 0, 1, 3);
        let single = Schedule::from_plans(&s, &[plan(Some(0), Some(3))]);
        assert!(!validate_schedule(&s, &single, &t)
            .iter()
            .any(|v| matches!(v, Violation::SlotConflict { .. })));
    }

    #[test]
    fn demand_met_exactly_is_feasible() {
        let (s, t) = setup();
        let rates = RateTable::new(&s, &t);
        let plans: Vec<_> = (0..3).map(|n| plan(Some(n), Some(1))).collect();
        let sch = Schedule::from_plans(&s, &plans);
        let got = delivered_bits(&s, &sch, &rates);
        // zero-rate frames would make the exact demand zero; only check when positive
        if got.iter().all(|u| u[0] > 0.0) {
            let exact = s.with_demands(got.clone()).unwrap();
            assert!(validate_schedule(&exact, &sch, &t).is_empty());
        }
    }

    #[test]
    fn all_dock_costs_nothing() {
        let s = Scenario::with_defaults(vec![vec![0.0], vec![0.0]], 4).unwrap();
        let t = ChannelTrace::generate(&s, 1);
        let sch = Schedule::from_plans(&s, &[]);
        let e = objective(&s, &sch, &t);
        assert!(e.feasible);
        assert_eq!(e.total_j, 0.0);
        assert_eq!(e.hover_j, 0.0);
    }

    #[test]
    fn one_hover_frame_energy() {
        let (s, t) = setup();
        let sch = Schedule::from_plans(&s, &[plan(Some(0), None)]);
        let e = objective(&s, &sch, &t);
        assert!((e.hover_j - 0.1).abs() < 1e-15);
        assert_eq!(e.comm_j, 0.0);
        assert!(!e.feasible);
    }

    #[test]
    fn comm_energy_is_linear_in_slot_energy() {
        let (s, t) = setup();
        let sch = Schedule::from_plans(
            &s,
            &[
                plan(Some(0), Some(1)),
                plan(Some(1), Some(1)),
                plan(Some(2), Some(1)),
            ],
        );
        let base = objective(&s, &sch, &t);
        let mut doubled = s.clone();
        doubled.radio.slot_duration_s *= 2.0;
        doubled.radio.bandwidth_hz /= 2.0;
        doubled.propulsion.hover_power_w /= 2.0;
        let e2 = objective(&doubled, &sch, &t);
        assert!((e2.comm_j - 2.0 * base.comm_j).abs() < 1e-12);
        assert!((e2.hover_j - base.hover_j).abs() < 1e-12);
    }

    #[test]
    fn start_and_dock_rules() {
        let (s, t) = setup();
        let sch = Schedule::from_plans(&s, &[plan(Some(1), None)]);
        assert!(validate_schedule(&s, &sch, &t).contains(&Violation::Start));
        let sch = Schedule::from_plans(
            &s,
            &[plan(Some(0), None), plan(None, None), plan(Some(1), None)],
        );
        assert!(validate_schedule(&s, &sch, &t).contains(&Violation::DockExit { frame: 1 }));
    }
}
