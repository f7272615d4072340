//! Runs one two-stage trial on hand-written responses and prints the test
//! statistics and the decisions under both stopping rules.
//!
//!     cargo run --example single_trial

use mams::bank::TrialData;
use mams::engine::{compute_statistics, run_trial, Design, StatisticMode, StoppingRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Control plus three arms, two stages of four patients, laid out [arm][stage][patient].
    #[rustfmt::skip]
    let values = vec![
        0.1, -0.4, 0.3, 0.0,    0.2, -0.1, 0.4, -0.3,
        1.9, 2.4, 1.6, 2.2,     1.8, 2.0, 2.5, 1.7,
        0.3, 0.1, -0.2, 0.5,    0.0, 0.4, 0.2, -0.1,
        0.9, 1.2, 0.4, 0.8,     1.1, 0.6, 1.3, 0.9,
    ];
    let data = TrialData::new(4, 2, 4, values)?;
    let stats = compute_statistics(&data, &[vec![true; 2], vec![true; 2], vec![true; 2], vec![true; 2]], 0, StatisticMode::TStat)?;
    println!("stage 1: T = {:.3?}, pooled variance {:.4}, df {}", stats.statistics, stats.pooled_variance, stats.df);

    for rule in [StoppingRule::Simultaneous, StoppingRule::Separate] {
        let design = Design::from_interims(4, &[0.8], &[2.5], 2.0, rule)?;
        let t = run_trial(&design, &data, StatisticMode::TStat)?;
        let z = run_trial(&design, &data, StatisticMode::z(1.0)?)?;
        println!(
            "{rule:>12}: t-test omega {:?} psi {:?}, z-test omega {:?} psi {:?}, {} patients",
            t.omega,
            t.psi,
            z.omega,
            z.psi,
            mams::engine::total_sample_size(&t, 4)
        );
    }
    Ok(())
}
