use crate::env::Scenario;

/// Upper limit on each cluster's hovering frames, proportional to the
/// cluster's share of the total demand.
///
/// All zeros when the scenario has no demand.
pub fn hovering_bound(scenario: &Scenario) -> Vec<f64> {
    let total = scenario.total_demand();
    let t_max = scenario.max_frames() as f64;
    (0..scenario.num_clusters())
        .map(|n| {
            if total > 0.0 {
                t_max * scenario.cluster_demand(n) / total
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_demands_split_evenly() {
        let s = Scenario::with_defaults(vec![vec![1e6]; 3], 160).unwrap();
        for b in hovering_bound(&s) {
            assert!((b - 160.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn proportional_to_demand() {
        let s = Scenario::with_defaults(vec![vec![1e6], vec![1e6, 1e6], vec![3e6]], 120).unwrap();
        let b = hovering_bound(&s);
        for (got, want) in b.iter().zip([20.0, 40.0, 60.0]) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_demand_gives_zero_bounds() {
        let s = Scenario::with_defaults(vec![vec![0.0], vec![0.0]], 5).unwrap();
        assert_eq!(hovering_bound(&s), vec![0.0, 0.0]);
    }
}
