//! Strategies and checks shared by the property tests and the acceptance suite.

#![allow(dead_code)]

use mams::bank::{build_bank, BankConfig, EffectVector, TrialData};
use mams::engine::{compute_statistics, run_trial, Design, StatisticMode, StoppingRule, TrialResult};
use mams::oc::OcEvaluator;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

/// Random data plus a random valid design of matching shape.
#[derive(Debug, Clone)]
pub struct Case {
    pub data: TrialData,
    pub design: Design,
}

impl Case {
    pub fn arms(&self) -> usize {
        self.data.arms_with_control() - 1
    }

    pub fn with_values(&self, f: impl Fn(f64) -> f64) -> TrialData {
        self.data.map(f)
    }
}

pub fn rule() -> impl Strategy<Value = StoppingRule> {
    prop_oneof![Just(StoppingRule::Simultaneous), Just(StoppingRule::Separate)]
}

/// `interim` (f, e) pairs with f < e, plus a final critical value.
pub fn boundaries(interim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (
        prop::collection::vec((-1.5f64..2.0, 0.05f64..3.0), interim),
        -0.5f64..3.0,
    )
        .prop_map(|(pairs, c)| {
            let f = pairs.iter().map(|p| p.0).collect();
            let e = pairs.iter().map(|p| p.0 + p.1).collect();
            (f, e, c)
        })
}

pub fn case() -> impl Strategy<Value = Case> {
    (1usize..=4, 1usize..=3, 2usize..=6)
        .prop_flat_map(|(arms, stages, n)| {
            (
                Just((arms, stages, n)),
                prop::collection::vec(-3.0f64..3.0, (arms + 1) * stages * n),
                boundaries(stages - 1),
                rule(),
                prop::collection::vec(-1.0f64..2.0, arms),
            )
        })
        .prop_map(|((arms, stages, n), z, (f, e, c), rule, effects)| {
            // Arm effects make rejections and drops both common.
            let values = z
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let k = i / (stages * n);
                    if k == 0 { *v } else { v + effects[k - 1] }
                })
                .collect();
            let data = TrialData::new(arms + 1, stages, n, values).unwrap();
            let design = Design::from_interims(n, &f, &e, c, rule).unwrap();
            Case { data, design }
        })
}

fn same(a: &TrialResult, b: &TrialResult, what: &str) -> Result<(), TestCaseError> {
    prop_assert_eq!(a, b, "{}", what);
    Ok(())
}

/// Adding `shift` to every response changes no decision, in either mode.
pub fn check_location(case: &Case, shift: f64, sigma: f64) -> Result<(), TestCaseError> {
    let moved = case.with_values(|x| x + shift);
    for mode in [StatisticMode::TStat, StatisticMode::ZStat { sigma }] {
        let a = run_trial(&case.design, &case.data, mode).unwrap();
        let b = run_trial(&case.design, &moved, mode).unwrap();
        same(&a, &b, "location shift changed the outcome")?;
    }
    let all = vec![vec![true; case.design.stages()]; case.arms() + 1];
    let s0 = compute_statistics(&case.data, &all, 0, StatisticMode::TStat).unwrap();
    let s1 = compute_statistics(&moved, &all, 0, StatisticMode::TStat).unwrap();
    prop_assert!((s0.pooled_variance - s1.pooled_variance).abs() <= 1e-9 * (1.0 + s0.pooled_variance));
    Ok(())
}

/// Scaling responses by `c > 0` leaves t-test decisions unchanged, and
/// z-test decisions unchanged when the assumed σ scales too.
pub fn check_scale(case: &Case, c: f64, sigma: f64) -> Result<(), TestCaseError> {
    let scaled = case.with_values(|x| x * c);
    let a = run_trial(&case.design, &case.data, StatisticMode::TStat).unwrap();
    let b = run_trial(&case.design, &scaled, StatisticMode::TStat).unwrap();
    same(&a, &b, "t-test not scale invariant")?;
    let a = run_trial(&case.design, &case.data, StatisticMode::ZStat { sigma }).unwrap();
    let b = run_trial(&case.design, &scaled, StatisticMode::ZStat { sigma: sigma * c }).unwrap();
    same(&a, &b, "z-test not scale equivariant")
}

/// Under simultaneous stopping every outcome lies in the reachable set.
pub fn check_simultaneous_set(case: &Case) -> Result<(), TestCaseError> {
    let design = case.design.with_rule(StoppingRule::Simultaneous);
    for mode in [StatisticMode::TStat, StatisticMode::ZStat { sigma: 1.0 }] {
        let r = run_trial(&design, &case.data, mode).unwrap();
        prop_assert!(r.in_simultaneous_set(design.stages()), "{:?}", r);
    }
    let r = run_trial(&case.design.with_rule(StoppingRule::Separate), &case.data, StatisticMode::TStat).unwrap();
    prop_assert!(r.in_separate_set(design.stages()));
    Ok(())
}

/// Raising `e₁` never turns a stage-1 non-rejection into a rejection.
pub fn check_stage_one_monotone(case: &Case, raise: f64) -> Result<(), TestCaseError> {
    let d = &case.design;
    let mut e = d.efficacy().to_vec();
    let mut f = d.futility().to_vec();
    e[0] += raise;
    if d.stages() == 1 {
        f[0] = e[0];
    }
    let higher = Design::new(d.group_size(), e, f, d.rule()).unwrap();
    let a = run_trial(d, &case.data, StatisticMode::TStat).unwrap();
    let b = run_trial(&higher, &case.data, StatisticMode::TStat).unwrap();
    for k in 0..case.arms() {
        let rejected_early = |r: &TrialResult| r.psi[k] && r.omega[k] == 1;
        prop_assert!(!rejected_early(&b) || rejected_early(&a));
    }
    Ok(())
}

/// Prefix and replicate nesting of the bank.
pub fn check_subset_nesting(seed: u64, arms: usize, stages: usize, small: usize, extra: usize) -> Result<(), TestCaseError> {
    let n_max = small + extra;
    let bank = build_bank(BankConfig::new(6, arms, stages, n_max, seed)).unwrap();
    let fewer = build_bank(BankConfig::new(3, arms, stages, n_max, seed)).unwrap();
    let theta = EffectVector::new((0..arms).map(|k| k as f64 * 0.3 - 0.2).collect()).unwrap();
    for r in 0..3 {
        let a = bank.realize(r, small, &theta, 1.7).unwrap();
        let b = bank.realize(r, n_max, &theta, 1.7).unwrap();
        for k in 0..=arms {
            for j in 0..stages {
                prop_assert_eq!(a.block(k, j), &b.block(k, j)[..small]);
            }
        }
        let c = fewer.realize(r, n_max, &theta, 1.7).unwrap();
        prop_assert_eq!(b.values(), c.values());
    }
    Ok(())
}

/// The t-test FWER, error count and per-arm rates are identical across true
/// standard deviations on a common bank.
pub fn check_sigma_invariance(seed: u64, design: &Design, sigmas: (f64, f64)) -> Result<(), TestCaseError> {
    let bank = build_bank(BankConfig::new(400, 3, design.stages(), design.group_size(), seed)).unwrap();
    let eval = OcEvaluator::new(&bank);
    let zero = EffectVector::zeros(3);
    let a = eval.estimate(design, StatisticMode::TStat, &zero, sigmas.0).unwrap();
    let b = eval.estimate(design, StatisticMode::TStat, &zero, sigmas.1).unwrap();
    prop_assert_eq!(a.fwer, b.fwer);
    prop_assert_eq!(a.error_count, b.error_count);
    prop_assert_eq!(&a.per_arm_rejection, &b.per_arm_rejection);
    prop_assert_eq!(a.ess, b.ess);
    Ok(())
}

/// Independently coded pooled two-sample one-sided t statistic.
pub fn textbook_t(control: &[f64], treated: &[f64]) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m0, m1) = (mean(control), mean(treated));
    let ss: f64 = control.iter().map(|x| (x - m0) * (x - m0)).sum::<f64>()
        + treated.iter().map(|x| (x - m1) * (x - m1)).sum::<f64>();
    let df = (control.len() + treated.len() - 2) as f64;
    let se = (ss / df * (1.0 / control.len() as f64 + 1.0 / treated.len() as f64)).sqrt();
    (m1 - m0) / se
}

/// `run_trial` with `K = J = 1` rejects exactly when the textbook statistic
/// reaches `e`.
pub fn check_textbook_t(control: &[f64], treated: &[f64], e: f64) -> Result<(), TestCaseError> {
    let n = control.len();
    let mut values = control.to_vec();
    values.extend_from_slice(treated);
    let data = TrialData::new(2, 1, n, values).unwrap();
    let design = Design::new(n, vec![e], vec![e], StoppingRule::Simultaneous).unwrap();
    let r = run_trial(&design, &data, StatisticMode::TStat).unwrap();
    prop_assert_eq!(r.psi[0], textbook_t(control, treated) >= e);
    Ok(())
}

pub fn textbook_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (2usize..=12).prop_flat_map(|n| {
        (
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-2.0f64..4.0, n),
            -1.0f64..3.0,
        )
    })
}
