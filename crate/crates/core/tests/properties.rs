//! Invariants that must hold across the whole input space, not just at the
//! hand-picked points the unit tests use.

use frictions_core::estock::{estock_cdf, estock_density, estock_survival};
use frictions_core::model::{mu_index, wage_floor, GroupedDurations};
use frictions_core::parametric::hazard;
use frictions_core::{EmpiricalWageDistribution, Observation, SegmentKey};
use proptest::prelude::*;

proptest! {
    #[test]
    fn power_index_stays_in_the_unit_interval(
        mean in 1.0f64..1e6,
        spread in 0.0f64..0.999,
        k in 0.0f64..1e4,
    ) {
        let floor = mean * spread;
        let mu = mu_index(mean, floor, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&mu), "mu = {mu}");
    }

    #[test]
    fn power_index_falls_as_competition_rises(
        mean in 1.0f64..1e6,
        spread in 0.01f64..0.99,
        k in 0.01f64..1e3,
        bump in 0.01f64..10.0,
    ) {
        let floor = mean * spread;
        let lo = mu_index(mean, floor, k + bump).unwrap();
        let hi = mu_index(mean, floor, k).unwrap();
        prop_assert!(lo < hi, "mu({}) = {lo} !< mu({k}) = {hi}", k + bump);
    }

    #[test]
    fn ranks_are_probabilities_and_respect_order(
        mut wages in prop::collection::vec(1.0f64..1e5, 2..60),
    ) {
        let dist = EmpiricalWageDistribution::from_wages(&wages).unwrap();
        wages.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut last = 0.0;
        for w in &wages {
            let g = dist.value_at(*w);
            prop_assert!((0.0..=1.0).contains(&g));
            prop_assert!(g >= last - 1e-12);
            last = g;
        }
        prop_assert_eq!(dist.value_at(0.5), 0.0);
        prop_assert_eq!(dist.value_at(2e5), 1.0);
    }

    #[test]
    fn hazard_is_bracketed_by_the_two_rates(
        g in 0.0f64..=1.0,
        delta in 1e-4f64..2.0,
        lambda in 1e-4f64..5.0,
    ) {
        let th = hazard(g, delta, lambda);
        prop_assert!(th >= delta - 1e-12);
        prop_assert!(th <= delta + lambda + 1e-12);
    }

    #[test]
    fn stock_distribution_is_a_distribution(
        k in 1e-4f64..100.0,
        delta in 1e-3f64..1.0,
        t in 0.0f64..200.0,
        dt in 0.01f64..50.0,
    ) {
        let cdf = estock_cdf(t, k, delta);
        let later = estock_cdf(t + dt, k, delta);
        prop_assert!((0.0..=1.0).contains(&cdf));
        prop_assert!(later >= cdf - 1e-12, "cdf not monotone: {cdf} then {later}");
        let surv = estock_survival(t, k, delta);
        prop_assert!((cdf + surv - 1.0).abs() < 1e-9);
        if t > 0.0 {
            prop_assert!(estock_density(t, k, delta) >= 0.0);
        }
    }

    #[test]
    fn frequency_tables_conserve_observations(
        spells in prop::collection::vec(0.0f64..100.0, 1..200),
        cuts in prop::collection::btree_set(1u32..90, 2..8),
    ) {
        let mut bounds = vec![0.0];
        bounds.extend(cuts.iter().map(|&c| f64::from(c)));
        let table = GroupedDurations::from_spells(&spells, bounds).unwrap();
        prop_assert_eq!(table.total(), spells.len() as u64);
    }

    #[test]
    fn floor_is_a_real_observation_and_rescales_exactly(
        wages in prop::collection::vec(10.0f64..1e5, 8..80),
        pow in -6i32..7,
    ) {
        let floor = wage_floor(&wages).unwrap();
        prop_assert!(wages.contains(&floor));
        let scale = (2.0f64).powi(pow);
        let scaled: Vec<f64> = wages.iter().map(|w| w * scale).collect();
        // powers of two rescale every wage exactly, so the selection rule
        // must pick the same worker
        prop_assert_eq!(wage_floor(&scaled).unwrap(), floor * scale);
    }

    #[test]
    fn weighted_ranks_match_duplication(
        wages in prop::collection::vec(1.0f64..1e4, 2..30),
        reps in 2u32..5,
    ) {
        let weighted = EmpiricalWageDistribution::from_weighted(
            &wages,
            &vec![f64::from(reps); wages.len()],
        ).unwrap();
        let mut duplicated = Vec::new();
        for w in &wages {
            for _ in 0..reps {
                duplicated.push(*w);
            }
        }
        let plain = EmpiricalWageDistribution::from_wages(&duplicated).unwrap();
        for w in &wages {
            prop_assert!((weighted.value_at(*w) - plain.value_at(*w)).abs() < 1e-12);
        }
    }
}

#[test]
fn observations_reject_unusable_values() {
    let key = SegmentKey::default;
    assert!(Observation::new(f64::NAN, 1.0, false, 1.0, key()).is_err());
    assert!(Observation::new(-5.0, 1.0, false, 1.0, key()).is_err());
    assert!(Observation::new(100.0, -1.0, false, 1.0, key()).is_err());
    assert!(Observation::new(100.0, 1.0, false, 0.0, key()).is_err());
    assert!(Observation::new(100.0, 1.0, false, f64::INFINITY, key()).is_err());
    assert!(Observation::new(100.0, 0.0, true, 2.5, key()).is_ok());
}
