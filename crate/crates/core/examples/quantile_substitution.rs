//! Moves the triangular z-boundaries to t-quantiles with the same tail
//! probability and shows the effect on the FWER when the variance is
//! estimated.
//!
//!     cargo run --release --example quantile_substitution -- [replicates]

use mams::bank::{build_bank, BankConfig, EffectVector};
use mams::comparators::{planned_degrees_of_freedom, published_design, quantile_substituted, DesignFamily};
use mams::engine::{StatisticMode, StoppingRule};
use mams::oc::OcEvaluator;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let replicates = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100_000);
    let bank = build_bank(BankConfig::new(replicates, 3, 2, 45, 20_170_601))?;
    let eval = OcEvaluator::new(&bank);
    for scenario in ["scenario1", "scenario2"] {
        let tri = published_design(scenario, StoppingRule::Simultaneous, DesignFamily::Triangular).ok_or("missing")?;
        let z = &tri.design;
        let t = quantile_substituted(z, 3)?;
        let df = planned_degrees_of_freedom(z.group_size(), 3, 2);
        println!("{scenario}: n = {}, degrees of freedom {df:?}", z.group_size());
        println!("  e {:?} -> {:.4?}", z.efficacy(), t.efficacy());
        println!("  f {:?} -> {:.4?}", z.futility(), t.futility());
        let zero = EffectVector::zeros(3);
        let naive = eval.estimate(z, StatisticMode::TStat, &zero, 1.0)?;
        let substituted = eval.estimate(&t, StatisticMode::TStat, &zero, 1.0)?;
        let known = eval.estimate(z, StatisticMode::z(1.0)?, &zero, 1.0)?;
        println!(
            "  FWER: z-test {:.4}, t-test on z-boundaries {:.4}, substituted {:.4}",
            known.fwer, naive.fwer, substituted.fwer
        );
    }
    Ok(())
}
