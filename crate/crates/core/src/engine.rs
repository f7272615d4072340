//! One simulated MAMS trial: pooled-variance test statistics and the
//! stage-by-stage reject / accept / continue logic under simultaneous or
//! separate stopping.
//!
//! Data enter through [`StageSource`], which yields one summary
//! (mean and within-block sum of squared deviations) per (arm, stage) block.
//! Explicit responses and the bank's precomputed summaries both implement it,
//! so the simulation path and the reference path share one implementation.

use serde::{Deserialize, Serialize};

use crate::bank::TrialData;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoppingRule {
    /// Stop the whole trial at the first rejection.
    Simultaneous,
    /// Each arm stops on its own decision.
    Separate,
}

impl StoppingRule {
    pub fn as_str(self) -> &'static str {
        match self {
            StoppingRule::Simultaneous => "simultaneous",
            StoppingRule::Separate => "separate",
        }
    }
}

impl std::fmt::Display for StoppingRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which scale enters the denominator of the test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StatisticMode {
    /// Pooled estimate `σ̂_j` (t-statistics).
    TStat,
    /// An assumed standard deviation (z-statistics).
    ZStat { sigma: f64 },
}

impl StatisticMode {
    pub fn z(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(StatisticMode::ZStat { sigma })
        } else {
            Err(Error::InvalidArgument(format!(
                "assumed standard deviation must be positive, got {sigma}"
            )))
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            StatisticMode::TStat => "t",
            StatisticMode::ZStat { .. } => "z",
        }
    }
}

/// Group size, stopping boundaries and stopping rule.
///
/// Interim stages satisfy `f_j < e_j`; the final stage has `e_J = f_J`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Design {
    n: usize,
    efficacy: Vec<f64>,
    futility: Vec<f64>,
    rule: StoppingRule,
}

impl Design {
    pub fn new(n: usize, efficacy: Vec<f64>, futility: Vec<f64>, rule: StoppingRule) -> Result<Self> {
        let invalid = |m: String| Err(Error::InvalidConfig(m));
        if n < 1 {
            return invalid("group size n must be >= 1".into());
        }
        let stages = efficacy.len();
        if stages == 0 || futility.len() != stages {
            return invalid(format!(
                "efficacy and futility need the same nonzero length, got {} and {}",
                efficacy.len(),
                futility.len()
            ));
        }
        if efficacy.iter().chain(&futility).any(|b| b.is_nan()) {
            return invalid("boundaries must not be NaN".into());
        }
        for j in 0..stages - 1 {
            if !(futility[j] < efficacy[j]) {
                return invalid(format!(
                    "stage {} needs f < e, got f = {} and e = {}",
                    j + 1,
                    futility[j],
                    efficacy[j]
                ));
            }
        }
        if efficacy[stages - 1] != futility[stages - 1] {
            return invalid(format!(
                "final stage needs e = f, got e = {} and f = {}",
                efficacy[stages - 1],
                futility[stages - 1]
            ));
        }
        Ok(Self {
            n,
            efficacy,
            futility,
            rule,
        })
    }

    /// A design from the interim boundaries plus the shared final critical value.
    pub fn from_interims(
        n: usize,
        interim_futility: &[f64],
        interim_efficacy: &[f64],
        final_critical: f64,
        rule: StoppingRule,
    ) -> Result<Self> {
        let mut e = interim_efficacy.to_vec();
        let mut f = interim_futility.to_vec();
        e.push(final_critical);
        f.push(final_critical);
        Self::new(n, e, f, rule)
    }

    /// Checks that the first-stage pooled variance has at least one degree of
    /// freedom with `arms` experimental arms.
    pub fn validate_for_arms(&self, arms: usize) -> Result<()> {
        if (arms + 1) * self.n < arms + 2 {
            return Err(Error::InvalidConfig(format!(
                "group size {} leaves no residual degrees of freedom with {arms} arms",
                self.n
            )));
        }
        Ok(())
    }

    pub fn group_size(&self) -> usize {
        self.n
    }

    pub fn stages(&self) -> usize {
        self.efficacy.len()
    }

    pub fn efficacy(&self) -> &[f64] {
        &self.efficacy
    }

    pub fn futility(&self) -> &[f64] {
        &self.futility
    }

    pub fn rule(&self) -> StoppingRule {
        self.rule
    }

    pub fn with_rule(&self, rule: StoppingRule) -> Self {
        Self { rule, ..self.clone() }
    }

    pub fn with_group_size(&self, n: usize) -> Result<Self> {
        Self::new(n, self.efficacy.clone(), self.futility.clone(), self.rule)
    }

    /// Continuation region at (zero-based) stage `j`: `f_j <= t < e_j`.
    #[inline]
    pub fn continues(&self, j: usize, t: f64) -> bool {
        self.futility[j] <= t && t < self.efficacy[j]
    }

    /// Maximum total sample size `n J (K + 1)`.
    pub fn max_sample_size(&self, arms: usize) -> usize {
        self.n * self.stages() * (arms + 1)
    }
}

/// Mean and within-block sum of squared deviations of one (arm, stage) block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlockSummary {
    pub mean: f64,
    pub m2: f64,
}

impl BlockSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let len = values.len() as f64;
        let mean = values.iter().sum::<f64>() / len;
        let m2 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        Self { mean, m2 }
    }
}

/// Per-block access to the responses of one trial.
pub trait StageSource {
    /// Arms including the control.
    fn arms_with_control(&self) -> usize;
    fn stages(&self) -> usize;
    fn group_size(&self) -> usize;
    /// Summary of arm `k`, zero-based stage `j`.
    fn block(&self, k: usize, j: usize) -> BlockSummary;
}

impl StageSource for TrialData {
    fn arms_with_control(&self) -> usize {
        TrialData::arms_with_control(self)
    }

    fn stages(&self) -> usize {
        TrialData::stages(self)
    }

    fn group_size(&self) -> usize {
        TrialData::group_size(self)
    }

    fn block(&self, k: usize, j: usize) -> BlockSummary {
        BlockSummary::from_values(TrialData::block(self, k, j))
    }
}

/// Running (count, mean, M2) of one arm, merged block by block.
#[derive(Debug, Clone, Copy, Default)]
struct ArmAccumulator {
    count: usize,
    mean: f64,
    m2: f64,
}

impl ArmAccumulator {
    #[inline]
    fn push(&mut self, block: BlockSummary, n: usize) {
        if self.count == 0 {
            *self = Self {
                count: n,
                mean: block.mean,
                m2: block.m2,
            };
            return;
        }
        let (na, nb) = (self.count as f64, n as f64);
        let total = na + nb;
        let delta = block.mean - self.mean;
        self.mean += delta * nb / total;
        self.m2 += block.m2 + delta * delta * na * nb / total;
        self.count += n;
    }
}

#[inline]
pub(crate) fn statistic(diff: f64, scale: f64, n0: usize, nk: usize) -> f64 {
    let denom = scale * (1.0 / n0 as f64 + 1.0 / nk as f64).sqrt();
    if denom > 0.0 {
        diff / denom
    } else if diff > 0.0 {
        f64::INFINITY
    } else if diff < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

/// Statistics at one analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct StageStatistics {
    /// `T_kj` for experimental arm `k = 1..K` (index `k - 1`); `None` when the
    /// arm was not recruited at this stage.
    pub statistics: Vec<Option<f64>>,
    /// Pooled variance estimate `σ̂_j²`.
    pub pooled_variance: f64,
    /// Residual degrees of freedom `Σ_k N_kj - (K + 1)`.
    pub df: usize,
    /// Cumulative recruited counts `N_kj`, control first.
    pub counts: Vec<usize>,
}

/// Statistics at zero-based stage `stage` given which arms were recruited in
/// each stage so far (`recruited[k][l]`, control first).
///
/// The pooled variance sums squared deviations over recruited observations
/// only, including arms dropped earlier.
pub fn compute_statistics<S: StageSource + ?Sized>(
    data: &S,
    recruited: &[Vec<bool>],
    stage: usize,
    mode: StatisticMode,
) -> Result<StageStatistics> {
    let arms = data.arms_with_control();
    let n = data.group_size();
    if recruited.len() != arms {
        return Err(Error::InvalidArgument(format!(
            "recruitment history covers {} arms, data has {arms}",
            recruited.len()
        )));
    }
    if stage >= data.stages() || recruited.iter().any(|h| h.len() <= stage) {
        return Err(Error::InvalidArgument(format!(
            "stage {} is beyond the data or the recruitment history",
            stage + 1
        )));
    }
    if !recruited[0][..=stage].iter().all(|&r| r) {
        return Err(Error::InvalidArgument(
            "control arm must be recruited in every stage".into(),
        ));
    }

    let mut acc = vec![ArmAccumulator::default(); arms];
    for (k, history) in recruited.iter().enumerate() {
        for (j, _) in history[..=stage].iter().enumerate().filter(|(_, &r)| r) {
            acc[k].push(data.block(k, j), n);
        }
        if acc[k].count == 0 {
            return Err(Error::InvalidArgument(format!(
                "arm {k} has no recruited stage"
            )));
        }
    }
    let total: usize = acc.iter().map(|a| a.count).sum();
    let df = total.saturating_sub(arms);
    let ss: f64 = acc.iter().map(|a| a.m2).sum();
    let pooled_variance = if df >= 1 { ss / df as f64 } else { f64::NAN };
    let scale = match mode {
        StatisticMode::TStat => {
            if df < 1 {
                return Err(Error::InvalidArgument(
                    "pooled variance has no residual degrees of freedom".into(),
                ));
            }
            pooled_variance.sqrt()
        }
        StatisticMode::ZStat { sigma } => sigma,
    };
    let statistics = (1..arms)
        .map(|k| {
            recruited[k][stage]
                .then(|| statistic(acc[k].mean - acc[0].mean, scale, acc[0].count, acc[k].count))
        })
        .collect();
    Ok(StageStatistics {
        statistics,
        pooled_variance,
        df,
        counts: acc.iter().map(|a| a.count).collect(),
    })
}

/// Outcome of one trial: `ω` (1-based stage at which each hypothesis was
/// resolved or the trial stopped) and `ψ` (rejection indicators).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialResult {
    pub omega: Vec<usize>,
    pub psi: Vec<bool>,
}

impl TrialResult {
    pub fn stages_used(&self) -> usize {
        self.omega.iter().copied().max().unwrap_or(0)
    }

    pub fn any_rejection(&self) -> bool {
        self.psi.iter().any(|&p| p)
    }

    /// Membership in the set of outcomes reachable under simultaneous
    /// stopping: after any rejection at stage `j`, no arm runs past `j`.
    pub fn in_simultaneous_set(&self, stages: usize) -> bool {
        self.in_separate_set(stages)
            && (1..=stages).all(|j| {
                let rejected_by_j = self.omega.iter().zip(&self.psi).any(|(&w, &p)| p && w <= j);
                !rejected_by_j || self.omega.iter().all(|&w| w <= j)
            })
    }

    pub fn in_separate_set(&self, stages: usize) -> bool {
        self.omega.iter().all(|&w| (1..=stages).contains(&w))
    }
}

/// Total recruitment `n (max_k ω_k + Σ_k ω_k)` of one trial.
pub fn total_sample_size(result: &TrialResult, n: usize) -> usize {
    n * (result.stages_used() + result.omega.iter().sum::<usize>())
}

/// Supplies the test statistics a trial needs, one stage at a time.
///
/// Stages are requested in order `0, 1, ...`; `active[k]` marks experimental
/// arms recruited at this stage (arm `k + 1` in control-first numbering).
/// Only `out[k]` for active arms is read back.
pub trait StatisticProvider {
    fn stage_statistics(&mut self, stage: usize, active: &[bool], out: &mut [f64]);
}

/// Accumulates block summaries from a [`StageSource`] as the trial proceeds.
pub struct Accumulating<'a, S: StageSource + ?Sized> {
    source: &'a S,
    mode: StatisticMode,
    acc: Vec<ArmAccumulator>,
}

impl<'a, S: StageSource + ?Sized> Accumulating<'a, S> {
    pub fn new(source: &'a S, mode: StatisticMode) -> Self {
        Self {
            source,
            mode,
            acc: vec![ArmAccumulator::default(); source.arms_with_control()],
        }
    }
}

impl<S: StageSource + ?Sized> StatisticProvider for Accumulating<'_, S> {
    #[inline]
    fn stage_statistics(&mut self, stage: usize, active: &[bool], out: &mut [f64]) {
        let n = self.source.group_size();
        self.acc[0].push(self.source.block(0, stage), n);
        for (k, _) in active.iter().enumerate().filter(|(_, &a)| a) {
            self.acc[k + 1].push(self.source.block(k + 1, stage), n);
        }
        arm_statistics(&self.acc, self.mode, active, out);
    }
}

/// `T_k` for active arms from per-arm accumulators (control first). Every
/// accumulator, active or not, enters the pooled variance.
#[inline]
fn arm_statistics(acc: &[ArmAccumulator], mode: StatisticMode, active: &[bool], out: &mut [f64]) {
    let scale = match mode {
        StatisticMode::TStat => {
            let total: usize = acc.iter().map(|a| a.count).sum();
            let ss: f64 = acc.iter().map(|a| a.m2).sum();
            (ss / (total - acc.len()) as f64).sqrt()
        }
        StatisticMode::ZStat { sigma } => sigma,
    };
    let control = acc[0];
    for (k, _) in active.iter().enumerate().filter(|(_, &a)| a) {
        let a = acc[k + 1];
        out[k] = statistic(a.mean - control.mean, scale, control.count, a.count);
    }
}

/// Statistics for every recruitment history a trial can reach.
///
/// At stage `j` (1-based) a history gives each experimental arm its last
/// recruited stage in `1..=j`; active arms have `j`. Histories are numbered
/// in base `j` with arm 1 as the lowest digit.
pub fn history_count(arms: usize, stage: usize) -> usize {
    stage.pow(arms as u32)
}

/// Writes, for every history at every stage, the statistics of the arms that
/// are active under it (`NaN` for the others). Layout: stage-major, then
/// history, then arm.
pub fn all_history_statistics<S: StageSource + ?Sized>(
    source: &S,
    stages: usize,
    mode: StatisticMode,
    out: &mut [f64],
) {
    let arms_with_control = source.arms_with_control();
    let arms = arms_with_control - 1;
    let n = source.group_size();
    let mut acc = vec![ArmAccumulator::default(); arms_with_control];
    let mut last = vec![0usize; arms];
    let mut active = vec![false; arms];
    let mut offset = 0;
    for stage in 1..=stages {
        for h in 0..history_count(arms, stage) {
            let mut code = h;
            for l in last.iter_mut() {
                *l = code % stage + 1;
                code /= stage;
            }
            for (k, a) in acc.iter_mut().enumerate() {
                let upto = if k == 0 { stage } else { last[k - 1] };
                *a = ArmAccumulator::default();
                for j in 0..upto {
                    a.push(source.block(k, j), n);
                }
            }
            for (a, &l) in active.iter_mut().zip(&last) {
                *a = l == stage;
            }
            let row = &mut out[offset..offset + arms];
            row.iter_mut().for_each(|v| *v = f64::NAN);
            arm_statistics(&acc, mode, &active, row);
            offset += arms;
        }
    }
}

/// Number of values [`all_history_statistics`] writes.
pub fn history_table_len(arms: usize, stages: usize) -> usize {
    (1..=stages).map(|j| history_count(arms, j) * arms).sum()
}

/// Reads statistics from a table written by [`all_history_statistics`].
pub struct Tabulated<'a> {
    table: &'a [f64],
    last: Vec<usize>,
    offset: usize,
}

impl<'a> Tabulated<'a> {
    pub fn new(table: &'a [f64], arms: usize) -> Self {
        Self {
            table,
            last: vec![0; arms],
            offset: 0,
        }
    }
}

impl StatisticProvider for Tabulated<'_> {
    #[inline]
    fn stage_statistics(&mut self, stage: usize, active: &[bool], out: &mut [f64]) {
        let stage_no = stage + 1;
        let arms = self.last.len();
        let mut index = 0;
        let mut weight = 1;
        for (l, &a) in self.last.iter_mut().zip(active) {
            if a {
                *l = stage_no;
            }
            index += (*l - 1) * weight;
            weight *= stage_no;
        }
        let row = &self.table[self.offset + index * arms..self.offset + (index + 1) * arms];
        out[..arms].copy_from_slice(row);
        self.offset += weight * arms;
    }
}

/// Reusable scratch space for running many trials without allocating.
#[derive(Debug, Clone)]
pub struct TrialRunner {
    active: Vec<bool>,
    stats: Vec<f64>,
    omega: Vec<usize>,
    psi: Vec<bool>,
}

impl TrialRunner {
    /// Runner for `arms` experimental arms.
    pub fn new(arms: usize) -> Self {
        Self {
            active: vec![true; arms],
            stats: vec![0.0; arms],
            omega: vec![0; arms],
            psi: vec![false; arms],
        }
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn psi(&self) -> &[bool] {
        &self.psi
    }

    pub fn result(&self) -> TrialResult {
        TrialResult {
            omega: self.omega.clone(),
            psi: self.psi.clone(),
        }
    }

    /// Runs the trial on data from a [`StageSource`].
    ///
    /// Callers guarantee the source matches the design (arms, stages, group
    /// size) and that the first stage has residual degrees of freedom.
    pub fn run<S: StageSource + ?Sized>(&mut self, design: &Design, data: &S, mode: StatisticMode) {
        self.run_with(design, &mut Accumulating::new(data, mode));
    }

    /// Runs the trial; the outcome is left in [`Self::omega`] and [`Self::psi`].
    pub fn run_with<P: StatisticProvider + ?Sized>(&mut self, design: &Design, provider: &mut P) {
        let stages = design.stages();
        self.active.iter_mut().for_each(|a| *a = true);
        self.omega.iter_mut().for_each(|w| *w = 0);
        self.psi.iter_mut().for_each(|p| *p = false);

        for j in 0..stages {
            let stage_no = j + 1;
            provider.stage_statistics(j, &self.active, &mut self.stats);
            let mut any_reject = false;
            let mut undecided = 0;
            for k in 0..self.omega.len() {
                if !self.active[k] {
                    continue;
                }
                let t = self.stats[k];
                if t >= design.efficacy[j] {
                    self.psi[k] = true;
                    self.omega[k] = stage_no;
                    any_reject = true;
                } else if !design.continues(j, t) {
                    self.omega[k] = stage_no;
                } else {
                    undecided += 1;
                }
            }
            for (a, &w) in self.active.iter_mut().zip(&self.omega) {
                *a = w == 0;
            }
            let stop = match design.rule {
                StoppingRule::Simultaneous => any_reject || undecided == 0,
                StoppingRule::Separate => undecided == 0,
            };
            if stop || stage_no == stages {
                for w in self.omega.iter_mut().filter(|w| **w == 0) {
                    *w = stage_no;
                }
                return;
            }
        }
    }

    /// `n (max_k ω_k + Σ_k ω_k)` for the last run.
    pub fn total_sample_size(&self, n: usize) -> usize {
        let max = self.omega.iter().copied().max().unwrap_or(0);
        n * (max + self.omega.iter().sum::<usize>())
    }
}

/// Runs one trial on explicit data.
pub fn run_trial<S: StageSource + ?Sized>(design: &Design, data: &S, mode: StatisticMode) -> Result<TrialResult> {
    let arms = data.arms_with_control() - 1;
    if data.stages() != design.stages() {
        return Err(Error::InvalidArgument(format!(
            "design has {} stages, data has {}",
            design.stages(),
            data.stages()
        )));
    }
    if data.group_size() != design.n {
        return Err(Error::InvalidArgument(format!(
            "design group size {} does not match data group size {}",
            design.n,
            data.group_size()
        )));
    }
    if matches!(mode, StatisticMode::TStat) {
        design.validate_for_arms(arms)?;
    }
    let mut runner = TrialRunner::new(arms);
    runner.run(design, data, mode);
    Ok(runner.result())
}
