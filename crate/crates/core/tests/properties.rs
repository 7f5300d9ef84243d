//! Randomized properties of the engine and the routing model.

mod common;

use jockey_core::analytic::{p_race, RatePair};
use jockey_core::decision::{expected_joiners, routing_probability, QueueLengthModel};
use jockey_core::{DeltaLambdaPolicy, Horizon, SigmaPolicy, SimConfig};
use proptest::prelude::*;

fn sim_config() -> impl Strategy<Value = SimConfig> {
    (
        1.0f64..15.0,
        0.05f64..0.95,
        100u64..1_500,
        any::<u64>(),
        prop_oneof![
            Just(SigmaPolicy::Estimated),
            (0.5f64..4.0).prop_map(|value| SigmaPolicy::Fixed { value })
        ],
        1usize..4,
    )
        .prop_map(|(lambda, fraction, count, seed, sigma_policy, min_history)| SimConfig {
            lambda,
            delta_lambda: DeltaLambdaPolicy::Fixed {
                value: fraction * lambda,
            },
            horizon: Horizon::Departures { count },
            seed,
            sigma_policy,
            min_history_for_eq2: min_history,
            ..SimConfig::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn runs_keep_every_invariant(config in sim_config()) {
        let problems = common::invariant_problems(&config);
        prop_assert!(problems.is_empty(), "{:?}", problems);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn routing_probability_is_a_probability(
        x in 0.0f64..40.0,
        y in 0.0f64..40.0,
        sigma in 0.3f64..6.0,
        tau in 1.0f64..60.0,
    ) {
        let p = routing_probability(tau, &QueueLengthModel::new(x, y, sigma), 1e-8).value;
        prop_assert!((0.0..=1.0).contains(&p), "{}", p);
        let beta = expected_joiners(7.0, p);
        prop_assert!((0.0..=7.0).contains(&beta));
    }

    #[test]
    fn routing_probability_grows_with_the_other_mean(
        x in 0.0f64..20.0,
        y in 2.0f64..20.0,
        shift in 0.5f64..5.0,
        sigma in 0.5f64..3.0,
    ) {
        // Moving Y's mean up, with the window following it, makes X < Y likelier.
        let tau = y + 3.0 * sigma;
        let low = routing_probability(tau, &QueueLengthModel::new(x, y, sigma), 1e-10).value;
        let high = routing_probability(tau + shift, &QueueLengthModel::new(x, y + shift, sigma), 1e-10).value;
        prop_assert!(high >= low - 1e-7, "{} < {}", high, low);
    }

    #[test]
    fn race_probability_is_complementary(a in 0.01f64..50.0, b in 0.01f64..50.0) {
        let r = RatePair::new(a, b).unwrap();
        prop_assert!((p_race(r) + p_race(r.swapped()) - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&p_race(r)));
    }
}
