//! Cross-entropy search for a balanced-optimal two-stage t-test design,
//! compared with the published design on the same bank.
//!
//!     cargo run --release --example optimize_design -- [scenario1|scenario2] [population] [replicates]

use mams::bank::{build_bank, BankConfig};
use mams::comparators::{published_design, DesignFamily};
use mams::engine::{StatisticMode, StoppingRule};
use mams::oc::OcEvaluator;
use mams::optimizer::{ce_optimize, objective, single_stage_reference, warm_start, CeConfig, ObjectiveSpec, TrialSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let scenario = args.next().unwrap_or_else(|| "scenario2".into());
    let population = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let replicates = args.next().map(|s| s.parse()).transpose()?.unwrap_or(100_000);

    let rule = StoppingRule::Simultaneous;
    let published = published_design(&scenario, rule, DesignFamily::BalancedOptimal).ok_or("unknown scenario")?;
    let triangular = published_design(&scenario, rule, DesignFamily::Triangular).ok_or("unknown scenario")?;
    let settings = TrialSettings {
        arms: 3,
        stages: 2,
        alpha: 0.05,
        beta: 0.1,
        delta1: published.scenario.delta1,
        delta0: published.scenario.delta0,
        sigma2: 1.0,
    };
    let (n_max, n_range) = if scenario == "scenario1" { (60, (30, 55)) } else { (24, (6, 20)) };
    let bank = build_bank(BankConfig::new(replicates, 3, 2, n_max, 20_170_601))?;

    let penalty = single_stage_reference(&settings, StatisticMode::TStat, &bank)?.total as f64;
    let spec = ObjectiveSpec::from_settings(&settings, [1.0 / 3.0; 3], penalty)?;
    let ce = CeConfig {
        population,
        n_range,
        initial_mean: Some(warm_start(&triangular.design)),
        seed: 7,
        ..CeConfig::default()
    };
    let result = ce_optimize(&settings, rule, StatisticMode::TStat, &spec, &ce, &bank)?;
    for row in &result.trace {
        println!(
            "iter {:>3}: best {:.3}, n ~ {:.2} (sd {:.3}), elite threshold {:.3}",
            row.iteration, row.best_score, row.mean_n, row.sd_n, row.elite_threshold
        );
    }
    let b = &result.best;
    println!(
        "found n = {}, f = {:.3?}, e = {:.3?}: score {:.2}, FWER {:.4}, power {:.4}, ESS {:.1} / {:.1}",
        b.group_size(),
        b.futility(),
        b.efficacy(),
        result.score,
        result.oc_null.fwer,
        result.oc_alt.power,
        result.oc_null.ess,
        result.oc_alt.ess
    );

    let pair = OcEvaluator::new(&bank).estimate_pair(&published.design, StatisticMode::TStat, &spec.delta, 1.0)?;
    let d = &published.design;
    println!(
        "published n = {}, f = {:?}, e = {:?}: score {:.2}, FWER {:.4}, power {:.4}",
        d.group_size(),
        d.futility(),
        d.efficacy(),
        objective(d, &pair.null, &pair.alt, &spec, 2, 3),
        pair.fwer(),
        pair.power()
    );
    Ok(())
}
