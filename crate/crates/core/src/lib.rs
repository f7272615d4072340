//! Monte Carlo design of multi-arm multi-stage (MAMS) trials that use
//! t-test statistics when the response variance is unknown.

pub mod bank;
pub mod cli;
pub mod comparators;
pub mod config;
pub mod dist;
pub mod engine;
pub mod oc;
pub mod optimizer;
pub mod error;

pub use error::{Error, Result};
