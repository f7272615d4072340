//! Builds a small common-random-numbers bank, realises one replicate for an
//! effect vector, and round-trips the bank through its binary dump.
//!
//!     cargo run --release --example response_bank -- [dump path]

use std::fs::File;
use std::io::{BufReader, BufWriter};

use mams::bank::{build_bank, BankConfig, EffectVector, ResponseBank};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("mams_bank.bin").display().to_string());
    let config = BankConfig::new(1000, 3, 2, 20, 42);
    let bank = build_bank(config.clone())?;
    let lazy = build_bank(config.on_demand())?;

    let mut a = Vec::new();
    let mut b = Vec::new();
    let stored = bank.replicate(7, &mut a);
    assert_eq!(stored, lazy.replicate(7, &mut b));
    println!("stored and on-demand banks agree; replicate length {}", stored.len());

    let theta = EffectVector::least_favourable(3, 0.545, 0.178);
    let small = bank.realize(0, 5, &theta, 1.0)?;
    let large = bank.realize(0, 20, &theta, 1.0)?;
    println!("control, stage 1, n = 5:  {:.3?}", small.block(0, 0));
    println!("control, stage 1, n = 20: {:.3?} ...", &large.block(0, 0)[..6]);

    bank.write_to(BufWriter::new(File::create(&path)?))?;
    let back = ResponseBank::read_from(BufReader::new(File::open(&path)?))?;
    let mut c = Vec::new();
    assert_eq!(back.replicate(999, &mut c), bank.replicate(999, &mut a));
    println!("dump written to {path} and read back intact");
    Ok(())
}
