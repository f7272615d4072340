//! Evaluates the four competing approaches over the published grid of true
//! variances and prints the comparison as CSV.
//!
//!     cargo run --release --example reproduce_table2 -- [replicates] [seed]

use std::time::Instant;

use mams::bank::{build_bank, BankConfig};
use mams::comparators::{evaluate_approaches, published_approaches, write_comparison_csv, ComparisonGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let replicates = args.next().map(|s| s.parse()).transpose()?.unwrap_or(100_000);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20_170_601);

    let approaches = published_approaches(1.0)?;
    let n_max = approaches.iter().map(|a| a.base_design().group_size()).max().unwrap_or(2);
    let started = Instant::now();
    let bank = build_bank(BankConfig::new(replicates, 3, 2, n_max, seed))?;
    eprintln!("bank of {replicates} replicates built in {:.1?}", started.elapsed());

    let rows = evaluate_approaches(&approaches, &ComparisonGrid::published(), &bank)?;
    eprintln!("{} rows in {:.1?}", rows.len(), started.elapsed());
    write_comparison_csv(&rows, std::io::stdout().lock())?;
    Ok(())
}
