use proptest::prelude::*;
use qnglab::*;

fn random_distribution(weights: &[f64]) -> FockDistribution {
    let total: f64 = weights.iter().sum();
    FockDistribution::from_truncated(weights.iter().map(|w| w / total).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn designated_clicks_fall_with_n(w in prop::collection::vec(0.0..1.0f64, 2..12), n_spads in 2usize..7) {
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let d = random_distribution(&w);
        let net = SplittingNetwork::balanced(n_spads).unwrap();
        let probs: Vec<f64> = (0..=n_spads).map(|n| designated_clicks(&d, &net, n).unwrap()).collect();
        prop_assert!(probs.windows(2).all(|p| p[1] <= p[0] + 1e-15));
    }

    #[test]
    fn losses_compose(w in prop::collection::vec(0.0..1.0f64, 2..15), q in 0.0..=1.0f64, q2 in 0.0..=1.0f64) {
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let d = random_distribution(&w);
        let twice = d.attenuate(q).unwrap().attenuate(q2).unwrap();
        let once = d.attenuate(q * q2).unwrap();
        for (a, b) in twice.probs.iter().zip(&once.probs) {
            prop_assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn coherent_clicks_factorize(mean in 0.0..5.0f64, t in 0.05..0.95f64, q in 0.05..=1.0f64) {
        let p = hbt_probabilities(&FockDistribution::poisson(mean, 120), t, q).unwrap();
        let g = |k: &str| p.get(k).unwrap();
        prop_assert!((g("Pc") - g("Ps1") * g("Ps2")).abs() < 1e-12);
        prop_assert!((g("P00") - g("P0_1") * g("P0_2")).abs() < 1e-12);
    }

    #[test]
    fn hbt_entries_are_consistent(w in prop::collection::vec(0.0..1.0f64, 2..12), t in 0.05..0.95f64, q in 0.05..=1.0f64) {
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let p = hbt_probabilities(&random_distribution(&w), t, q).unwrap();
        let g = |k: &str| p.get(k).unwrap();
        prop_assert!((g("Pc") - (1.0 - g("P0_1") - g("P0_2") + g("P00"))).abs() < 1e-12);
        for k in ["P0_1", "P0_2", "P00", "Ps1", "Ps2", "Pc"] {
            prop_assert!((0.0..=1.0).contains(&g(k)));
        }
    }
}
