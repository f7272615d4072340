//! Familywise error over every effect vector in `{0, δ₀, δ₁}³` for the
//! scenario 1 balanced-optimal designs.
//!
//!     cargo run --release --example strong_control_scan -- [replicates]

use mams::bank::{build_bank, BankConfig, EffectVector};
use mams::comparators::{published_design, DesignFamily};
use mams::engine::{StatisticMode, StoppingRule};
use mams::oc::OcEvaluator;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let replicates = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100_000);
    let bank = build_bank(BankConfig::new(replicates, 3, 2, 41, 20_170_601))?;
    let eval = OcEvaluator::new(&bank);
    for rule in [StoppingRule::Simultaneous, StoppingRule::Separate] {
        let p = published_design("scenario1", rule, DesignFamily::BalancedOptimal).ok_or("missing design")?;
        let values = [0.0, p.scenario.delta0, p.scenario.delta1];
        let mut grid = Vec::new();
        for a in values {
            for b in values {
                for c in values {
                    grid.push(EffectVector::new(vec![a, b, c])?);
                }
            }
        }
        let scan = eval.fwer_scan(&p.design, StatisticMode::TStat, &grid, 1.0)?;
        let (worst, max) = scan.max().ok_or("empty grid")?;
        println!("{rule}: FWER at 0 = {:.4}, max {max:.4} at {:?}", scan.rows[0].1, worst.as_slice());
        for (theta, rate) in scan.rows.iter().filter(|(_, r)| *r > 0.0) {
            println!("  {:?} -> {rate:.4}", theta.as_slice());
        }
    }
    Ok(())
}
