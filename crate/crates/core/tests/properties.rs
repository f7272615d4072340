mod common;

use common::*;
use mams::bank::{build_bank, BankConfig, EffectVector};
use mams::comparators::quantile_substituted;
use mams::dist::{std_normal_cdf, t_cdf, t_quantile};
use mams::engine::{run_trial, Design, StatisticMode, StoppingRule};
use mams::oc::OcEvaluator;
use proptest::prelude::*;

proptest! {
    #[test]
    fn location_invariance(case in case(), shift in -50.0f64..50.0, sigma in 0.2f64..3.0) {
        check_location(&case, shift, sigma)?;
    }

    #[test]
    fn scale_invariance_and_equivariance(case in case(), c in 0.05f64..20.0, sigma in 0.2f64..3.0) {
        check_scale(&case, c, sigma)?;
    }

    #[test]
    fn simultaneous_outcomes_are_reachable(case in case()) {
        check_simultaneous_set(&case)?;
    }

    #[test]
    fn raising_first_efficacy_boundary(case in case(), raise in 0.0f64..2.0) {
        check_stage_one_monotone(&case, raise)?;
    }

    #[test]
    fn textbook_t_test(t in textbook_case()) {
        check_textbook_t(&t.0, &t.1, t.2)?;
    }

    #[test]
    fn normal_cdf_and_t_quantile_nondecreasing(x in -10.0f64..10.0, dx in 0.0f64..1.0, df in 1.0f64..400.0) {
        prop_assert!(std_normal_cdf(x) <= std_normal_cdf(x + dx));
        let p = std_normal_cdf(x / 4.0).clamp(1e-6, 1.0 - 1e-6);
        let q = (p + dx * (1.0 - p) * 0.5).min(1.0 - 1e-6);
        prop_assert!(t_quantile(p, df).unwrap() <= t_quantile(q, df).unwrap());
        prop_assert!((t_cdf(t_quantile(p, df).unwrap(), df) - p).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bank_subset_nesting(seed in any::<u64>(), arms in 1usize..4, stages in 1usize..4, small in 1usize..6, extra in 1usize..6) {
        check_subset_nesting(seed, arms, stages, small, extra)?;
    }

    #[test]
    fn t_fwer_is_invariant_to_true_variance(
        seed in any::<u64>(),
        n in 2usize..8,
        b in boundaries(1),
        rule in rule(),
        s1 in 0.1f64..5.0,
        s2 in 0.1f64..5.0,
    ) {
        let design = Design::from_interims(n, &b.0, &b.1, b.2, rule).unwrap();
        check_sigma_invariance(seed, &design, (s1, s2))?;
    }

    #[test]
    fn separate_never_stops_earlier_and_ess_is_bounded(
        seed in any::<u64>(),
        n in 2usize..8,
        b in boundaries(1),
        t1 in -0.5f64..1.5,
    ) {
        let bank = build_bank(BankConfig::new(300, 3, 2, 8, seed)).unwrap();
        let eval = OcEvaluator::new(&bank);
        let theta = EffectVector::new(vec![t1, 0.0, t1 / 2.0]).unwrap();
        let sim = Design::from_interims(n, &b.0, &b.1, b.2, StoppingRule::Simultaneous).unwrap();
        let sep = sim.with_rule(StoppingRule::Separate);
        let a = eval.estimate(&sim, StatisticMode::TStat, &theta, 1.0).unwrap();
        let c = eval.estimate(&sep, StatisticMode::TStat, &theta, 1.0).unwrap();
        prop_assert!(c.total_sample_size >= a.total_sample_size);
        for e in [&a, &c] {
            prop_assert!(e.ess >= (4 * n) as f64 && e.ess <= (8 * n) as f64);
        }
    }

    #[test]
    fn substitution_only_removes_first_stage_rejections(seed in any::<u64>(), n in 2usize..10, b in boundaries(1), rule in rule()) {
        // Later stages pool the variance over whichever arms are still
        // recruited, so only stage 1 is dominated replicate by replicate.
        let bank = build_bank(BankConfig::new(200, 3, 2, 10, seed)).unwrap();
        let z = Design::from_interims(n, &b.0, &b.1, b.2.abs() + 0.01, rule).unwrap();
        prop_assume!(z.futility().iter().all(|&f| f > 0.0));
        let t = quantile_substituted(&z, 3).unwrap();
        prop_assert!(t.efficacy().iter().zip(z.efficacy()).all(|(a, b)| a > b));
        let zero = EffectVector::zeros(3);
        for r in 0..bank.replicates() {
            let data = bank.realize(r, n, &zero, 1.0).unwrap();
            let a = run_trial(&z, &data, StatisticMode::TStat).unwrap();
            let c = run_trial(&t, &data, StatisticMode::TStat).unwrap();
            for k in 0..3 {
                prop_assert!(!(c.psi[k] && c.omega[k] == 1) || (a.psi[k] && a.omega[k] == 1));
            }
        }
    }
}
