//! Monte Carlo operating characteristics: familywise error, pairwise power
//! and expected sample size of a design on the shared response bank.
//!
//! For a group size `n`, every (replicate, arm, stage) block of the bank is
//! reduced once to its [`BlockSummary`]. Realising a replicate for an effect
//! vector and noise scale is then an affine map of those summaries, so a
//! trial costs `O(K J)` whatever `n` is.
//!
//! In t-statistic mode the map is applied on the standardised scale
//! (`θ / σ_T` shift, unit noise). The t ratio is scale free, so this is the
//! same trial; it makes the null-hypothesis outcomes bit-identical across
//! `σ_T`.

use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::bank::{EffectVector, ResponseBank};
use crate::engine::{
    all_history_statistics, history_table_len, BlockSummary, Design, StageSource, StatisticMode, Tabulated,
    TrialRunner,
};
use crate::error::{Error, Result};

/// Replicates handled per parallel work item.
const CHUNK: usize = 2048;
const DEFAULT_CACHE_TABLES: usize = 8;
/// Memory allowed for cached per-history statistics.
const DEFAULT_STATISTICS_BUDGET_MB: usize = 512;

/// Block summaries of the first `n` deviates of every (replicate, arm, stage).
#[derive(Debug)]
pub struct SummaryTable {
    n: usize,
    arms_with_control: usize,
    stages: usize,
    blocks: Vec<BlockSummary>,
}

impl SummaryTable {
    pub fn build(bank: &ResponseBank, n: usize) -> Result<Self> {
        check_capacity(bank, n)?;
        let arms = bank.arms() + 1;
        let stages = bank.stages();
        let per = arms * stages;
        let mut blocks = vec![BlockSummary::default(); bank.replicates() * per];
        blocks
            .par_chunks_mut(per * CHUNK)
            .enumerate()
            .for_each(|(c, out)| {
                let mut buf = Vec::new();
                for (i, rep_out) in out.chunks_mut(per).enumerate() {
                    let rep = bank.replicate(c * CHUNK + i, &mut buf);
                    for k in 0..arms {
                        for j in 0..stages {
                            let off = bank.block_offset(k, j);
                            rep_out[k * stages + j] = BlockSummary::from_values(&rep[off..off + n]);
                        }
                    }
                }
            });
        Ok(Self {
            n,
            arms_with_control: arms,
            stages,
            blocks,
        })
    }

    pub fn group_size(&self) -> usize {
        self.n
    }

    fn replicate(&self, r: usize) -> &[BlockSummary] {
        let per = self.arms_with_control * self.stages;
        &self.blocks[r * per..(r + 1) * per]
    }

    fn replicates(&self) -> usize {
        self.blocks.len() / (self.arms_with_control * self.stages)
    }
}

/// One replicate realised as `shift_k + scale * Z` at the summary level.
struct ReplicateView<'a> {
    blocks: &'a [BlockSummary],
    shift: &'a [f64],
    scale: f64,
    scale_sq: f64,
    bank_stages: usize,
    stages: usize,
    n: usize,
}

impl StageSource for ReplicateView<'_> {
    fn arms_with_control(&self) -> usize {
        self.shift.len()
    }

    fn stages(&self) -> usize {
        self.stages
    }

    fn group_size(&self) -> usize {
        self.n
    }

    #[inline]
    fn block(&self, k: usize, j: usize) -> BlockSummary {
        let b = self.blocks[k * self.bank_stages + j];
        BlockSummary {
            mean: self.shift[k] + self.scale * b.mean,
            m2: self.scale_sq * b.m2,
        }
    }
}

fn check_capacity(bank: &ResponseBank, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("group size must be >= 1".into()));
    }
    if n > bank.n_max() {
        return Err(Error::Resource(format!(
            "group size {n} exceeds the bank capacity n_max = {}; rebuild the bank with a larger n_max",
            bank.n_max()
        )));
    }
    Ok(())
}

/// Monte Carlo operating characteristics at one effect vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OcEstimate {
    pub theta: EffectVector,
    pub sigma_true: f64,
    /// Rate of rejecting at least one true null (`θ_k <= 0`). At `θ = 0` this
    /// is the familywise error rate.
    pub fwer: f64,
    /// Rejection rate of the first hypothesis.
    pub power: f64,
    /// Mean of `n (max_k ω_k + Σ_k ω_k)`.
    pub ess: f64,
    pub per_arm_rejection: Vec<f64>,
    pub replicates: usize,
    pub error_count: u64,
    pub total_sample_size: u64,
}

impl OcEstimate {
    /// Binomial Monte Carlo standard error of [`Self::fwer`].
    pub fn mc_se_fwer(&self) -> f64 {
        (self.fwer * (1.0 - self.fwer) / self.replicates as f64).sqrt()
    }

    pub fn mc_se_power(&self) -> f64 {
        (self.power * (1.0 - self.power) / self.replicates as f64).sqrt()
    }
}

/// Estimates at `θ = 0` and at the alternative `δ`, computed on the same
/// replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct OcPair {
    pub null: OcEstimate,
    pub alt: OcEstimate,
}

impl OcPair {
    pub fn fwer(&self) -> f64 {
        self.null.fwer
    }

    pub fn power(&self) -> f64 {
        self.alt.power
    }

    pub fn ess_null(&self) -> f64 {
        self.null.ess
    }

    pub fn ess_alt(&self) -> f64 {
        self.alt.ess
    }
}

/// Everything needed for one Monte Carlo evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvalTask<'a> {
    pub design: &'a Design,
    pub mode: StatisticMode,
    pub theta: &'a EffectVector,
    pub sigma_true: f64,
    pub bank: &'a ResponseBank,
}

/// Estimates operating characteristics for one task.
pub fn estimate_oc(task: &EvalTask<'_>) -> Result<OcEstimate> {
    OcEvaluator::new(task.bank).estimate(task.design, task.mode, task.theta, task.sigma_true)
}

/// Estimates at `θ = 0` and `θ = δ` on common random numbers.
pub fn estimate_oc_pair(
    design: &Design,
    mode: StatisticMode,
    delta: &EffectVector,
    sigma_true: f64,
    bank: &ResponseBank,
) -> Result<OcPair> {
    OcEvaluator::new(bank).estimate_pair(design, mode, delta, sigma_true)
}

/// Error rate over true nulls for every effect vector in `thetas`.
pub fn fwer_scan(
    design: &Design,
    mode: StatisticMode,
    thetas: &[EffectVector],
    sigma_true: f64,
    bank: &ResponseBank,
) -> Result<ScanResult> {
    OcEvaluator::new(bank).fwer_scan(design, mode, thetas, sigma_true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub rows: Vec<(EffectVector, f64)>,
}

impl ScanResult {
    /// The largest error rate and the effect vector attaining it.
    pub fn max(&self) -> Option<(&EffectVector, f64)> {
        self.rows
            .iter()
            .fold(None, |best: Option<(&EffectVector, f64)>, (t, r)| match best {
                Some((_, b)) if b >= *r => best,
                _ => Some((t, *r)),
            })
    }
}

#[derive(Debug, Default, Clone)]
struct Tally {
    errors: u64,
    first_rejections: u64,
    per_arm: Vec<u64>,
    sample_size: u64,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.errors += other.errors;
        self.first_rejections += other.first_rejections;
        self.sample_size += other.sample_size;
        if self.per_arm.is_empty() {
            self.per_arm = other.per_arm;
        } else {
            for (a, b) in self.per_arm.iter_mut().zip(other.per_arm) {
                *a += b;
            }
        }
        self
    }
}

// Identifies one table of per-history statistics. Boundaries do not enter:
// every design sharing these inputs reads the same table.
#[derive(Debug, Clone, PartialEq)]
struct StatisticsKey {
    n: usize,
    stages: usize,
    mode: StatisticMode,
    shift: Vec<f64>,
    scale: f64,
}

/// Evaluates designs against one bank, caching summary tables by group size.
///
/// Statistics of every recruitment history are also cached per (group size,
/// effect vector, noise scale), so re-evaluating with new boundaries, as the
/// optimiser does, costs only the stopping logic.
pub struct OcEvaluator<'a> {
    bank: &'a ResponseBank,
    cache: Mutex<Vec<Arc<SummaryTable>>>,
    capacity: usize,
    statistics: Mutex<Vec<(StatisticsKey, Arc<Vec<f64>>)>>,
    statistics_budget: usize,
}

impl<'a> OcEvaluator<'a> {
    pub fn new(bank: &'a ResponseBank) -> Self {
        Self::with_cache_capacity(bank, DEFAULT_CACHE_TABLES)
    }

    pub fn with_cache_capacity(bank: &'a ResponseBank, capacity: usize) -> Self {
        Self {
            bank,
            cache: Mutex::new(Vec::new()),
            capacity: capacity.max(1),
            statistics: Mutex::new(Vec::new()),
            statistics_budget: DEFAULT_STATISTICS_BUDGET_MB << 20,
        }
    }

    /// Caps the memory for cached per-history statistics; 0 disables them.
    pub fn with_statistics_budget_mb(mut self, mb: usize) -> Self {
        self.statistics_budget = mb << 20;
        self
    }

    fn history_statistics(&self, table: &SummaryTable, key: StatisticsKey) -> Option<Arc<Vec<f64>>> {
        let arms = table.arms_with_control - 1;
        let per = history_table_len(arms, key.stages);
        let bytes = per * table.replicates() * std::mem::size_of::<f64>();
        if bytes > self.statistics_budget {
            return None;
        }
        if let Some((_, t)) = self.statistics.lock().unwrap().iter().find(|(k, _)| *k == key) {
            return Some(Arc::clone(t));
        }
        let mut values = vec![0.0; per * table.replicates()];
        values
            .par_chunks_mut(per * CHUNK)
            .enumerate()
            .for_each(|(c, out)| {
                for (i, rep_out) in out.chunks_mut(per).enumerate() {
                    let view = ReplicateView {
                        blocks: table.replicate(c * CHUNK + i),
                        shift: &key.shift,
                        scale: key.scale,
                        scale_sq: key.scale * key.scale,
                        bank_stages: table.stages,
                        stages: key.stages,
                        n: key.n,
                    };
                    all_history_statistics(&view, key.stages, key.mode, rep_out);
                }
            });
        let values = Arc::new(values);
        let mut cache = self.statistics.lock().unwrap();
        let max_tables = (self.statistics_budget / bytes.max(1)).max(1);
        while cache.len() >= max_tables {
            cache.remove(0);
        }
        cache.push((key, Arc::clone(&values)));
        Some(values)
    }

    pub fn bank(&self) -> &'a ResponseBank {
        self.bank
    }

    /// Summary table for group size `n`, built on first use.
    pub fn summaries(&self, n: usize) -> Result<Arc<SummaryTable>> {
        check_capacity(self.bank, n)?;
        if let Some(t) = self.cache.lock().unwrap().iter().find(|t| t.n == n) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(SummaryTable::build(self.bank, n)?);
        let mut cache = self.cache.lock().unwrap();
        if let Some(t) = cache.iter().find(|t| t.n == n) {
            return Ok(Arc::clone(t));
        }
        if cache.len() >= self.capacity {
            cache.remove(0);
        }
        cache.push(Arc::clone(&table));
        Ok(table)
    }

    fn check_task(&self, design: &Design, mode: StatisticMode, theta: &EffectVector, sigma_true: f64) -> Result<()> {
        let arms = self.bank.arms();
        if design.stages() > self.bank.stages() {
            return Err(Error::InvalidArgument(format!(
                "design has {} stages but the bank only {}",
                design.stages(),
                self.bank.stages()
            )));
        }
        check_capacity(self.bank, design.group_size())?;
        if theta.len() != arms {
            return Err(Error::InvalidArgument(format!(
                "effect vector has {} entries, expected {arms}",
                theta.len()
            )));
        }
        if !(sigma_true > 0.0 && sigma_true.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "true standard deviation must be positive, got {sigma_true}"
            )));
        }
        if let StatisticMode::ZStat { sigma } = mode {
            StatisticMode::z(sigma)?;
        } else {
            design.validate_for_arms(arms)?;
        }
        Ok(())
    }

    pub fn estimate(
        &self,
        design: &Design,
        mode: StatisticMode,
        theta: &EffectVector,
        sigma_true: f64,
    ) -> Result<OcEstimate> {
        self.check_task(design, mode, theta, sigma_true)?;
        let table = self.summaries(design.group_size())?;
        Ok(self.estimate_with(&table, design, mode, theta, sigma_true))
    }

    pub fn estimate_pair(
        &self,
        design: &Design,
        mode: StatisticMode,
        delta: &EffectVector,
        sigma_true: f64,
    ) -> Result<OcPair> {
        let zero = EffectVector::zeros(self.bank.arms());
        self.check_task(design, mode, delta, sigma_true)?;
        let table = self.summaries(design.group_size())?;
        Ok(OcPair {
            null: self.estimate_with(&table, design, mode, &zero, sigma_true),
            alt: self.estimate_with(&table, design, mode, delta, sigma_true),
        })
    }

    pub fn fwer_scan(
        &self,
        design: &Design,
        mode: StatisticMode,
        thetas: &[EffectVector],
        sigma_true: f64,
    ) -> Result<ScanResult> {
        let mut rows = Vec::with_capacity(thetas.len());
        for theta in thetas {
            let est = self.estimate(design, mode, theta, sigma_true)?;
            rows.push((theta.clone(), est.fwer));
        }
        Ok(ScanResult { rows })
    }

    /// Core loop; inputs must already be validated against the bank.
    pub(crate) fn estimate_with(
        &self,
        table: &SummaryTable,
        design: &Design,
        mode: StatisticMode,
        theta: &EffectVector,
        sigma_true: f64,
    ) -> OcEstimate {
        let arms = self.bank.arms();
        let n = design.group_size();
        let (shift, scale) = realisation(theta, sigma_true, mode);
        let true_null = theta.true_nulls();
        let replicates = table.replicates();
        let chunks = replicates.div_ceil(CHUNK);

        let key = StatisticsKey {
            n,
            stages: design.stages(),
            mode,
            shift: shift.clone(),
            scale,
        };
        let history = self.history_statistics(table, key);
        let per = history_table_len(arms, design.stages());

        let tally = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut runner = TrialRunner::new(arms);
                let mut t = Tally {
                    per_arm: vec![0; arms],
                    ..Tally::default()
                };
                for r in c * CHUNK..((c + 1) * CHUNK).min(replicates) {
                    match &history {
                        Some(h) => runner.run_with(design, &mut Tabulated::new(&h[r * per..(r + 1) * per], arms)),
                        None => {
                            let view = ReplicateView {
                                blocks: table.replicate(r),
                                shift: &shift,
                                scale,
                                scale_sq: scale * scale,
                                bank_stages: table.stages,
                                stages: design.stages(),
                                n,
                            };
                            runner.run(design, &view, mode);
                        }
                    }
                    let psi = runner.psi();
                    if psi.iter().zip(&true_null).any(|(&p, &null)| p && null) {
                        t.errors += 1;
                    }
                    if psi[0] {
                        t.first_rejections += 1;
                    }
                    for (count, &p) in t.per_arm.iter_mut().zip(psi) {
                        *count += p as u64;
                    }
                    t.sample_size += runner.total_sample_size(n) as u64;
                }
                t
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(Tally::default(), Tally::merge);

        let rf = replicates as f64;
        OcEstimate {
            theta: theta.clone(),
            sigma_true,
            fwer: tally.errors as f64 / rf,
            power: tally.first_rejections as f64 / rf,
            ess: tally.sample_size as f64 / rf,
            per_arm_rejection: tally.per_arm.iter().map(|&c| c as f64 / rf).collect(),
            replicates,
            error_count: tally.errors,
            total_sample_size: tally.sample_size,
        }
    }
}

// Per-arm shifts (control first) and noise scale used to realise a replicate.
pub(crate) fn realisation(theta: &EffectVector, sigma_true: f64, mode: StatisticMode) -> (Vec<f64>, f64) {
    let mut shift = Vec::with_capacity(theta.len() + 1);
    shift.push(0.0);
    match mode {
        StatisticMode::TStat => {
            shift.extend(theta.as_slice().iter().map(|t| t / sigma_true));
            (shift, 1.0)
        }
        StatisticMode::ZStat { .. } => {
            shift.extend_from_slice(theta.as_slice());
            (shift, sigma_true)
        }
    }
}
