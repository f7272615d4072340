//! Single-stage reference sizes: the two-arm case against the textbook
//! formula, then the three-arm scenario with `δ₁ = 1`.
//!
//!     cargo run --release --example single_stage -- [replicates] [seed]

use mams::bank::{build_bank, BankConfig};
use mams::dist::std_normal_quantile;
use mams::engine::StatisticMode;
use mams::optimizer::{single_stage_reference, TrialSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let replicates = args.next().map(|s| s.parse()).transpose()?.unwrap_or(100_000);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20_170_601);

    let two_arm = TrialSettings {
        arms: 1,
        stages: 1,
        alpha: 0.05,
        beta: 0.1,
        delta1: 0.5,
        delta0: 0.0,
        sigma2: 1.0,
    };
    let bank = build_bank(BankConfig::new(replicates, 1, 1, 90, seed))?;
    let s = single_stage_reference(&two_arm, StatisticMode::TStat, &bank)?;
    let z = std_normal_quantile(0.95)? + std_normal_quantile(0.9)?;
    println!(
        "K = 1: simulated n = {} (e1 = {:.3}), normal approximation {:.1}",
        s.n,
        s.critical_value,
        2.0 * z * z / 0.25
    );

    let three_arm = TrialSettings {
        arms: 3,
        stages: 2,
        delta1: 1.0,
        ..two_arm
    };
    let bank = build_bank(BankConfig::new(replicates, 3, 2, 24, seed))?;
    for mode in [StatisticMode::TStat, StatisticMode::z(1.0)?] {
        let s = single_stage_reference(&three_arm, mode, &bank)?;
        println!(
            "K = 3 ({}-test): n = {} per arm, {} in total, e1 = {:.3}, FWER {:.4}, power {:.4}",
            mode.label(),
            s.n,
            s.total,
            s.critical_value,
            s.fwer,
            s.power
        );
    }
    Ok(())
}
