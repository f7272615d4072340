//! The `mams` command line: `optimize`, `evaluate`, `scan` and
//! `single-stage`, each driven by a TOML [`RunConfig`].
//!
//! Exit codes: 0 success, 1 invalid input, 2 finished but infeasible.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bank::{build_bank, ResponseBank};
use crate::comparators::{evaluate_approaches, published_approaches, write_comparison_csv, Approach, Scenario};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::oc::OcEvaluator;
use crate::optimizer::{
    ce_optimize, single_stage_reference, write_trace_csv, ObjectiveSpec, OptimResult, SingleStage,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mams", version, about = "Design and evaluate multi-arm multi-stage t-test trials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search group size and boundaries by cross-entropy.
    Optimize(CommonArgs),
    /// Operating characteristics of approaches over a true-variance grid.
    Evaluate(CommonArgs),
    /// FWER over a grid of effect vectors.
    Scan(CommonArgs),
    /// Smallest single-stage design meeting the error targets.
    SingleStage(CommonArgs),
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Overrides the bank (and CE) seed.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Overrides the number of bank replicates.
    #[arg(long, value_name = "R")]
    pub replicates: Option<usize>,
}

impl CommonArgs {
    /// Loads the config and applies the overrides.
    pub fn load(&self) -> Result<RunConfig> {
        let mut config = RunConfig::from_path(&self.config)?;
        if let Some(seed) = self.seed {
            config.bank.seed = seed;
            if let Some(o) = config.optimize.as_mut() {
                o.ce.seed = None;
            }
        }
        if let Some(r) = self.replicates {
            if r == 0 {
                return Err(Error::InvalidArgument("--replicates must be >= 1".into()));
            }
            config.bank.replicates = r;
        }
        Ok(config)
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let (name, args) = match &cli.command {
        Command::Optimize(a) => ("optimize", a),
        Command::Evaluate(a) => ("evaluate", a),
        Command::Scan(a) => ("scan", a),
        Command::SingleStage(a) => ("single-stage", a),
    };
    let result = with_threads(args.threads, || {
        let config = args.load()?;
        fs::create_dir_all(&args.out)?;
        match cli.command {
            Command::Optimize(_) => cmd_optimize(&config, &args.out),
            Command::Evaluate(_) => cmd_evaluate(&config, &args.out),
            Command::Scan(_) => cmd_scan(&config, &args.out),
            Command::SingleStage(_) => cmd_single_stage(&config, &args.out),
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mams {name}: {e}");
            EXIT_INVALID
        }
    }
}

fn with_threads(threads: Option<usize>, f: impl FnOnce() -> Result<i32> + Send) -> Result<i32> {
    match threads {
        None => f(),
        Some(0) => Err(Error::InvalidArgument("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Resource(format!("cannot start {n} threads: {e}")))?
            .install(f),
    }
}

/// `# `-prefixed lines naming the command and the resolved configuration.
pub fn header(command: &str, config: &RunConfig) -> String {
    let mut h = format!("# mams {} {command}\n", env!("CARGO_PKG_VERSION"));
    for line in config.to_toml().lines() {
        if line.is_empty() {
            h.push_str("#\n");
        } else {
            h.push_str(&format!("# {line}\n"));
        }
    }
    h
}

fn write_file(path: &Path, head: &str, body: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(head.as_bytes())?;
    f.write_all(body)?;
    Ok(())
}

fn bank_for(config: &RunConfig) -> Result<ResponseBank> {
    build_bank(config.bank_config())
}

/// Single-stage reference on the configured bank.
pub fn single_stage(config: &RunConfig, bank: &ResponseBank) -> Result<SingleStage> {
    let statistic = config.single_stage.clone().unwrap_or_default().statistic;
    single_stage_reference(&config.settings, statistic.mode(config.settings.sigma())?, bank)
}

pub fn cmd_single_stage(config: &RunConfig, out: &Path) -> Result<i32> {
    let bank = bank_for(config)?;
    let s = single_stage(config, &bank)?;
    let body = format!(
        "n,total,critical_value,fwer,power,R\n{},{},{:.6},{:.4},{:.4},{}\n",
        s.n,
        s.total,
        s.critical_value,
        s.fwer,
        s.power,
        bank.replicates()
    );
    write_file(&out.join("single_stage.csv"), &header("single-stage", config), body.as_bytes())?;
    println!(
        "single-stage: n = {} per arm ({} total), e1 = {:.3}, FWER = {:.4}, power = {:.4}",
        s.n, s.total, s.critical_value, s.fwer, s.power
    );
    Ok(EXIT_OK)
}

/// Runs the configured search; the penalty defaults to the single-stage total.
pub fn optimize(config: &RunConfig, bank: &ResponseBank) -> Result<(OptimResult, f64)> {
    let o = config
        .optimize
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("missing [optimize] section".into()))?;
    let penalty = match o.penalty {
        Some(p) => p,
        None => single_stage(config, bank)?.total as f64,
    };
    let spec = ObjectiveSpec::from_settings(&config.settings, o.weights, penalty)?;
    let mode = o.statistic.mode(config.settings.sigma())?;
    let result = ce_optimize(&config.settings, o.rule, mode, &spec, &config.ce_config()?, bank)?;
    Ok((result, penalty))
}

pub fn cmd_optimize(config: &RunConfig, out: &Path) -> Result<i32> {
    let bank = bank_for(config)?;
    let (r, penalty) = optimize(config, &bank)?;
    let head = header("optimize", config);
    let d = &r.best;
    let mut design = String::from("rule,n,stage,futility,efficacy\n");
    for j in 0..d.stages() {
        design.push_str(&format!(
            "{},{},{},{:.6},{:.6}\n",
            d.rule(),
            d.group_size(),
            j + 1,
            d.futility()[j],
            d.efficacy()[j]
        ));
    }
    write_file(&out.join("design.csv"), &head, design.as_bytes())?;
    let summary = format!(
        "score,feasible,converged,iterations,penalty,fwer,power,ess_null,ess_alt,mc_se_fwer,R\n{:.4},{},{},{},{},{:.4},{:.4},{:.1},{:.1},{:.4},{}\n",
        r.score,
        r.feasible,
        r.converged,
        r.trace.len(),
        penalty,
        r.oc_null.fwer,
        r.oc_alt.power,
        r.oc_null.ess,
        r.oc_alt.ess,
        r.oc_null.mc_se_fwer(),
        r.oc_null.replicates
    );
    write_file(&out.join("summary.csv"), &head, summary.as_bytes())?;
    let mut trace = Vec::new();
    write_trace_csv(&r.trace, config.settings.stages, &mut trace)?;
    write_file(&out.join("trace.csv"), &head, &trace)?;
    println!(
        "optimize: n = {}, f = {:.3?}, e = {:.3?}, score = {:.2}, FWER = {:.4}, power = {:.4}{}",
        d.group_size(),
        d.futility(),
        d.efficacy(),
        r.score,
        r.oc_null.fwer,
        r.oc_alt.power,
        if r.feasible { "" } else { " (INFEASIBLE)" }
    );
    Ok(if r.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

/// The approaches named in `[evaluate]`, published ones first.
pub fn configured_approaches(config: &RunConfig) -> Result<Vec<Approach>> {
    let e = config
        .evaluate
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("missing [evaluate] section".into()))?;
    let sigma = config.settings.sigma();
    let mut out = if e.published { published_approaches(sigma)? } else { Vec::new() };
    for a in &e.approaches {
        let scenario = Scenario::new(a.scenario.clone(), a.delta1, a.delta0);
        out.push(Approach::standard(a.tag, scenario, a.design.design()?, sigma)?);
    }
    Ok(out)
}

pub fn cmd_evaluate(config: &RunConfig, out: &Path) -> Result<i32> {
    let approaches = configured_approaches(config)?;
    let grid = config.evaluate.as_ref().expect("checked above").grid();
    let bank = bank_for(config)?;
    let rows = evaluate_approaches(&approaches, &grid, &bank)?;
    let mut body = Vec::new();
    write_comparison_csv(&rows, &mut body)?;
    write_file(&out.join("comparison.csv"), &header("evaluate", config), &body)?;
    println!("evaluate: {} rows", rows.len());
    Ok(EXIT_OK)
}

pub fn cmd_scan(config: &RunConfig, out: &Path) -> Result<i32> {
    let s = config
        .scan
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("missing [scan] section".into()))?;
    let design = s.design.design()?;
    let mode = s.statistic.mode(config.settings.sigma())?;
    let sigma_true = s.sigma2_true.unwrap_or(config.settings.sigma2).sqrt();
    let thetas = config.scan_grid()?;
    let bank = bank_for(config)?;
    let scan = OcEvaluator::new(&bank).fwer_scan(&design, mode, &thetas, sigma_true)?;
    let arms = config.settings.arms;
    let mut body = String::from("row");
    for k in 1..=arms {
        body.push_str(&format!(",theta_{k}"));
    }
    body.push_str(",fwer\n");
    let mut line = |label: &str, theta: &[f64], fwer: f64| {
        body.push_str(label);
        for t in theta {
            body.push_str(&format!(",{t}"));
        }
        body.push_str(&format!(",{fwer:.4}\n"));
    };
    for (i, (theta, fwer)) in scan.rows.iter().enumerate() {
        line(&(i + 1).to_string(), theta.as_slice(), *fwer);
    }
    let (worst, max) = scan.max().expect("grid is nonempty");
    let worst = worst.as_slice().to_vec();
    line("MAX", &worst, max);
    write_file(&out.join("scan.csv"), &header("scan", config), body.as_bytes())?;
    println!("scan: {} effect vectors, max FWER {max:.4} at {worst:?}", scan.rows.len());
    Ok(EXIT_OK)
}
