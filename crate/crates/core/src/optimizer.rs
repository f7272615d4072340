//! The penalised sample-size objective, the single-stage reference size and a
//! cross-entropy search over group size and stopping boundaries.
//!
//! Every candidate is scored on the same response bank, so the objective is a
//! deterministic function of the design within a run.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bank::{EffectVector, ResponseBank};
use crate::dist::{std_normal_cdf, std_normal_quantile, RngStream};
use crate::engine::{statistic, Design, StatisticMode, StoppingRule};
use crate::error::{Error, Result};
use crate::oc::{realisation, OcEstimate, OcEvaluator};

/// The fixed problem: arms, stages, error targets, effect sizes and the
/// planning variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSettings {
    pub arms: usize,
    pub stages: usize,
    pub alpha: f64,
    pub beta: f64,
    pub delta1: f64,
    pub delta0: f64,
    pub sigma2: f64,
}

impl TrialSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.arms < 1 || self.stages < 1 {
            return bad(format!("need at least one arm and one stage, got K = {} and J = {}", self.arms, self.stages));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if !(self.delta1 > 0.0 && self.delta1.is_finite()) {
            return bad(format!("delta1 must be positive, got {}", self.delta1));
        }
        if !(self.delta0.is_finite() && self.delta0 < self.delta1) {
            return bad(format!("delta0 must be below delta1, got {}", self.delta0));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// `(δ₁, δ₀, …, δ₀)`.
    pub fn effect(&self) -> EffectVector {
        EffectVector::least_favourable(self.arms, self.delta1, self.delta0)
    }

    fn check_bank(&self, bank: &ResponseBank) -> Result<()> {
        if bank.arms() != self.arms || bank.stages() < self.stages {
            return Err(Error::InvalidConfig(format!(
                "bank has K = {}, J = {} but the settings need K = {}, J = {}",
                bank.arms(),
                bank.stages(),
                self.arms,
                self.stages
            )));
        }
        Ok(())
    }
}

/// Weights, error targets and penalty scale of the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub weights: [f64; 3],
    pub alpha: f64,
    pub beta: f64,
    pub penalty: f64,
    pub delta: EffectVector,
}

impl ObjectiveSpec {
    pub fn new(weights: [f64; 3], alpha: f64, beta: f64, penalty: f64, delta: EffectVector) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidConfig(format!("weights must be nonnegative, got {weights:?}")));
        }
        if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha and beta must lie in (0, 1), got {alpha} and {beta}"
            )));
        }
        if !(penalty > 0.0 && penalty.is_finite()) {
            return Err(Error::InvalidConfig(format!("penalty must be positive, got {penalty}")));
        }
        Ok(Self {
            weights,
            alpha,
            beta,
            penalty,
            delta,
        })
    }

    pub fn from_settings(settings: &TrialSettings, weights: [f64; 3], penalty: f64) -> Result<Self> {
        Self::new(weights, settings.alpha, settings.beta, penalty, settings.effect())
    }
}

/// `w₁ ESS(0) + w₂ ESS(δ) + w₃ n J (K+1)` plus `P` times the relative excess
/// of the estimated FWER over `α` and of the estimated type II error over `β`.
pub fn objective(
    design: &Design,
    oc_null: &OcEstimate,
    oc_alt: &OcEstimate,
    spec: &ObjectiveSpec,
    stages: usize,
    arms: usize,
) -> f64 {
    let [w1, w2, w3] = spec.weights;
    let max_n = (design.group_size() * stages * (arms + 1)) as f64;
    let alpha_hat = oc_null.fwer;
    let beta_hat = 1.0 - oc_alt.power;
    let mut excess = 0.0;
    if alpha_hat > spec.alpha {
        excess += (alpha_hat - spec.alpha) / spec.alpha;
    }
    if beta_hat > spec.beta {
        excess += (beta_hat - spec.beta) / spec.beta;
    }
    w1 * oc_null.ess + w2 * oc_alt.ess + w3 * max_n + spec.penalty * excess
}

/// Smallest single-stage design meeting the error targets on a bank.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleStage {
    /// Per-arm group size.
    pub n: usize,
    /// `n (K + 1)`.
    pub total: usize,
    pub critical_value: f64,
    pub fwer: f64,
    pub power: f64,
}

/// Searches `n = 2, 3, …` for the first single-stage design whose power at
/// `δ` reaches `1 - β` once its critical value holds the FWER at `α`.
///
/// Patients of each arm are taken from the bank in stage order, so the
/// search reaches `J · n_max` per arm. At each `n` the critical value is
/// the exact Monte Carlo solution: midway between the `⌊αR⌋`-th and next
/// largest null `max_k T_k`.
pub fn single_stage_reference(
    settings: &TrialSettings,
    mode: StatisticMode,
    bank: &ResponseBank,
) -> Result<SingleStage> {
    settings.validate()?;
    if bank.arms() != settings.arms {
        return Err(Error::InvalidConfig(format!(
            "bank has K = {} but the settings need K = {}",
            bank.arms(),
            settings.arms
        )));
    }
    let arms = settings.arms;
    let cap = bank.stages() * bank.n_max();
    // (K + 1) n >= K + 2 for a residual degree of freedom.
    let n_min = (arms + 2).div_ceil(arms + 1);
    let sigma = settings.sigma();
    let (null_shift, null_scale) = realisation(&EffectVector::zeros(arms), sigma, mode);
    let (alt_shift, alt_scale) = realisation(&settings.effect(), sigma, mode);
    let replicates = bank.replicates();
    let sizes = cap.saturating_sub(n_min) + 1;

    // Column `n - n_min` holds every replicate's null max_k T and alternative T_1.
    let mut null_max = vec![0.0; sizes * replicates];
    let mut alt_first = vec![0.0; sizes * replicates];
    let per_rep: Vec<(Vec<f64>, Vec<f64>)> = (0..replicates)
        .into_par_iter()
        .map_init(Vec::new, |buf, r| {
            let rep = bank.replicate(r, buf);
            let mut mean = vec![0.0; arms + 1];
            let mut m2 = vec![0.0; arms + 1];
            let mut nulls = Vec::with_capacity(sizes);
            let mut alts = Vec::with_capacity(sizes);
            for n in 1..=cap {
                for k in 0..=arms {
                    let z = rep[bank.block_offset(k, 0) + n - 1];
                    let d = z - mean[k];
                    mean[k] += d / n as f64;
                    m2[k] += d * (z - mean[k]);
                }
                if n < n_min {
                    continue;
                }
                let pooled = (m2.iter().sum::<f64>() / ((arms + 1) * (n - 1)) as f64).sqrt();
                let t = |shift: &[f64], scale: f64, k: usize| {
                    let denom = match mode {
                        StatisticMode::TStat => scale * pooled,
                        StatisticMode::ZStat { sigma } => sigma,
                    };
                    let diff = shift[k] + scale * mean[k] - (shift[0] + scale * mean[0]);
                    statistic(diff, denom, n, n)
                };
                let max_null = (1..=arms).map(|k| t(&null_shift, null_scale, k)).fold(f64::NEG_INFINITY, f64::max);
                nulls.push(max_null);
                alts.push(t(&alt_shift, alt_scale, 1));
            }
            (nulls, alts)
        })
        .collect();
    for (r, (nulls, alts)) in per_rep.into_iter().enumerate() {
        for (i, (a, b)) in nulls.into_iter().zip(alts).enumerate() {
            null_max[i * replicates + r] = a;
            alt_first[i * replicates + r] = b;
        }
    }

    let allowed = (settings.alpha * replicates as f64).floor() as usize;
    let target = 1.0 - settings.beta;
    let mut column = vec![0.0; replicates];
    for i in 0..sizes {
        column.copy_from_slice(&null_max[i * replicates..(i + 1) * replicates]);
        let critical = critical_value(&mut column, allowed);
        let count = |v: &[f64]| v.iter().filter(|&&t| t >= critical).count() as f64 / replicates as f64;
        let fwer = count(&null_max[i * replicates..(i + 1) * replicates]);
        let power = count(&alt_first[i * replicates..(i + 1) * replicates]);
        if power >= target {
            let n = n_min + i;
            return Ok(SingleStage {
                n,
                total: n * (arms + 1),
                critical_value: critical,
                fwer,
                power,
            });
        }
    }
    Err(Error::Resource(format!(
        "no single-stage design up to n = {cap} per arm reaches power {target}; rebuild the bank with a larger n_max"
    )))
}

// Smallest threshold `c` (up to a midpoint) with at most `allowed` values >= c.
fn critical_value(values: &mut [f64], allowed: usize) -> f64 {
    if allowed >= values.len() {
        return f64::NEG_INFINITY;
    }
    let desc = |a: &f64, b: &f64| b.total_cmp(a);
    let (_, &mut below, _) = values.select_nth_unstable_by(allowed, desc);
    if allowed == 0 {
        return below.next_up();
    }
    let above = values[..allowed].iter().copied().fold(f64::INFINITY, f64::min);
    let mid = 0.5 * (above + below);
    if mid > below {
        mid
    } else {
        below.next_up()
    }
}

/// Cross-entropy search settings.
///
/// The continuous vector is `(f₁ … f_{J-1}, e₁ … e_{J-1}, c_J)` with
/// `e_J = f_J = c_J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeConfig {
    pub population: usize,
    pub elite_frac: f64,
    /// Weight of the elite refit against the previous proposal.
    pub smoothing: f64,
    pub max_iters: usize,
    pub tol_sd: f64,
    pub n_range: (usize, usize),
    /// `[lo, hi]` per continuous coordinate; `None` uses [`default_box`].
    #[serde(default)]
    pub boundary_box: Option<Vec<(f64, f64)>>,
    /// Initial proposal means; `None` uses `f = 0`, `e = 2.5`, `c_J = 2`.
    #[serde(default)]
    pub initial_mean: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for CeConfig {
    fn default() -> Self {
        Self {
            population: 1000,
            elite_frac: 0.1,
            smoothing: 0.7,
            max_iters: 100,
            tol_sd: 0.01,
            n_range: (2, 60),
            boundary_box: None,
            initial_mean: None,
            seed: 1,
        }
    }
}

/// Futility in `[-1, 4]`, interim efficacy in `[0, 6]`, final critical value
/// in `[0, 4]`.
pub fn default_box(stages: usize) -> Vec<(f64, f64)> {
    let interim = stages - 1;
    let mut b = vec![(-1.0, 4.0); interim];
    b.extend(vec![(0.0, 6.0); interim]);
    b.push((0.0, 4.0));
    b
}

/// Initial proposal means taken from a design's boundaries.
pub fn warm_start(design: &Design) -> Vec<f64> {
    let j = design.stages() - 1;
    let mut m = design.futility()[..j].to_vec();
    m.extend_from_slice(&design.efficacy()[..j]);
    m.push(design.efficacy()[j]);
    m
}

impl CeConfig {
    pub fn elite_count(&self) -> usize {
        (self.population as f64 * self.elite_frac).ceil() as usize
    }

    pub fn validate(&self, settings: &TrialSettings) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.elite_frac > 0.0 && self.elite_frac < 1.0) {
            return bad(format!("elite_frac must lie in (0, 1), got {}", self.elite_frac));
        }
        if (self.population as f64) * self.elite_frac < 2.0 {
            return bad(format!(
                "population * elite_frac must be >= 2, got {} * {}",
                self.population, self.elite_frac
            ));
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return bad(format!("smoothing must lie in (0, 1], got {}", self.smoothing));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1".into());
        }
        if !(self.tol_sd > 0.0) {
            return bad(format!("tol_sd must be positive, got {}", self.tol_sd));
        }
        let (lo, hi) = self.n_range;
        let n_min = (settings.arms + 2).div_ceil(settings.arms + 1);
        if lo < n_min || hi < lo {
            return bad(format!("n_range must satisfy {n_min} <= lo <= hi, got [{lo}, {hi}]"));
        }
        let dims = 2 * settings.stages - 1;
        let bx = self.search_box(settings.stages);
        if bx.len() != dims {
            return bad(format!("boundary_box needs {dims} [lo, hi] pairs, got {}", bx.len()));
        }
        if bx.iter().any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
            return bad(format!("boundary_box entries need finite lo < hi, got {bx:?}"));
        }
        let interim = settings.stages - 1;
        for j in 0..interim {
            if bx[j].0 >= bx[interim + j].1 {
                return bad(format!(
                    "search box is infeasible: stage {} futility lower bound {} is not below efficacy upper bound {}",
                    j + 1,
                    bx[j].0,
                    bx[interim + j].1
                ));
            }
        }
        if let Some(m) = &self.initial_mean {
            if m.len() != dims || m.iter().any(|x| !x.is_finite()) {
                return bad(format!("initial_mean needs {dims} finite values, got {m:?}"));
            }
        }
        Ok(())
    }

    fn search_box(&self, stages: usize) -> Vec<(f64, f64)> {
        self.boundary_box.clone().unwrap_or_else(|| default_box(stages))
    }
}

/// State of the search after one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Best score seen so far, feasible or not.
    pub best_score: f64,
    pub mean_n: f64,
    pub sd_n: f64,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Worst score inside this iteration's elite.
    pub elite_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub best: Design,
    pub score: f64,
    pub oc_null: OcEstimate,
    pub oc_alt: OcEstimate,
    pub trace: Vec<TraceRow>,
    /// `α̂ <= α` and `1 - power <= β` on the search bank.
    pub feasible: bool,
    pub converged: bool,
    pub evaluations: usize,
    /// Candidates redrawn because some interim stage had `f >= e`.
    pub resampled: usize,
}

const MAX_DRAWS: usize = 10_000;

/// Proposal distribution: categorical `n`, independent truncated normals.
#[derive(Debug, Clone)]
struct Proposal {
    n_lo: usize,
    probs: Vec<f64>,
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl Proposal {
    fn n_moments(&self) -> (f64, f64) {
        let mean: f64 = self.probs.iter().enumerate().map(|(i, p)| p * (self.n_lo + i) as f64).sum();
        let var: f64 = self
            .probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * ((self.n_lo + i) as f64 - mean).powi(2))
            .sum();
        (mean, var.sqrt())
    }
}

#[derive(Clone)]
struct Candidate {
    n: usize,
    x: Vec<f64>,
}

/// Minimises [`objective`] over `n` and the boundaries by the cross-entropy
/// method on a shared bank. Returns the best-scoring design that meets both
/// error targets on that bank, or the best-scoring design overall (flagged
/// infeasible) when no evaluated candidate met them.
pub fn ce_optimize(
    settings: &TrialSettings,
    rule: StoppingRule,
    mode: StatisticMode,
    spec: &ObjectiveSpec,
    ce: &CeConfig,
    bank: &ResponseBank,
) -> Result<OptimResult> {
    settings.validate()?;
    ce.validate(settings)?;
    settings.check_bank(bank)?;
    if ce.n_range.1 > bank.n_max() {
        return Err(Error::Resource(format!(
            "n_range upper bound {} exceeds the bank capacity n_max = {}; rebuild the bank with a larger n_max",
            ce.n_range.1,
            bank.n_max()
        )));
    }
    if spec.delta.len() != settings.arms {
        return Err(Error::InvalidConfig(format!(
            "effect vector has {} entries, expected {}",
            spec.delta.len(),
            settings.arms
        )));
    }
    let evaluator = OcEvaluator::with_cache_capacity(bank, 4);
    let stages = settings.stages;
    let interim = stages - 1;
    let bx = ce.search_box(stages);
    let sigma = settings.sigma();
    let score_of = |design: &Design| -> Result<(f64, OcEstimate, OcEstimate)> {
        let pair = evaluator.estimate_pair(design, mode, &spec.delta, sigma)?;
        let s = objective(design, &pair.null, &pair.alt, spec, stages, settings.arms);
        Ok((s, pair.null, pair.alt))
    };
    let build = |c: &Candidate| {
        Design::from_interims(c.n, &c.x[..interim], &c.x[interim..2 * interim], c.x[2 * interim], rule)
    };

    let (n_lo, n_hi) = ce.n_range;
    let mean = ce.initial_mean.clone().unwrap_or_else(|| {
        let mut m = vec![0.0; interim];
        m.extend(vec![2.5; interim]);
        m.push(2.0);
        m
    });
    let mut proposal = Proposal {
        n_lo,
        probs: vec![1.0 / (n_hi - n_lo + 1) as f64; n_hi - n_lo + 1],
        mean: mean.iter().zip(&bx).map(|(m, (l, h))| m.clamp(*l, *h)).collect(),
        sd: bx.iter().map(|(l, h)| (h - l) / 4.0).collect(),
    };

    let mut rng = RngStream::new(ce.seed, u64::MAX);
    let elite = ce.elite_count();
    let mut best: Option<(f64, Candidate)> = None;
    let mut best_feasible: Option<(f64, Candidate)> = None;
    let mut trace = Vec::new();
    let mut resampled = 0;
    let mut evaluations = 0;
    let mut converged = false;

    for iteration in 1..=ce.max_iters {
        let mut population = Vec::with_capacity(ce.population);
        for _ in 0..ce.population {
            let mut draws = 0;
            let candidate = loop {
                let n = sample_categorical(&proposal.probs, rng.next_uniform()) + n_lo;
                let x: Vec<f64> = (0..bx.len())
                    .map(|i| truncated_normal(proposal.mean[i], proposal.sd[i], bx[i], rng.next_uniform()))
                    .collect();
                if (0..interim).all(|j| x[j] < x[interim + j]) {
                    break Candidate { n, x };
                }
                draws += 1;
                resampled += 1;
                if draws >= MAX_DRAWS {
                    return Err(Error::InvalidConfig(format!(
                        "search box is infeasible: {MAX_DRAWS} draws in a row had some f_j >= e_j"
                    )));
                }
            };
            population.push(candidate);
        }

        // Grouping by n keeps each group size's cached statistics warm.
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by_key(|&i| population[i].n);
        let mut scores = vec![0.0; population.len()];
        let mut feasible = vec![false; population.len()];
        for &i in &order {
            let design = build(&population[i])?;
            let (score, null, alt) = score_of(&design)?;
            scores[i] = score;
            feasible[i] = meets_targets(&null, &alt, spec);
        }
        evaluations += population.len();

        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        let top = &ranked[..elite];
        let leader = top[0];
        if best.as_ref().is_none_or(|(s, _)| scores[leader] < *s) {
            best = Some((scores[leader], population[leader].clone()));
        }
        if let Some(&i) = ranked.iter().find(|&&i| feasible[i]) {
            if best_feasible.as_ref().is_none_or(|(s, _)| scores[i] < *s) {
                best_feasible = Some((scores[i], population[i].clone()));
            }
        }

        let s = ce.smoothing;
        let m = elite as f64;
        let mut freq = vec![0.0; proposal.probs.len()];
        for &i in top {
            freq[population[i].n - n_lo] += 1.0 / m;
        }
        for (p, f) in proposal.probs.iter_mut().zip(&freq) {
            *p = s * f + (1.0 - s) * *p;
        }
        for d in 0..bx.len() {
            let em = top.iter().map(|&i| population[i].x[d]).sum::<f64>() / m;
            let ev = top.iter().map(|&i| (population[i].x[d] - em).powi(2)).sum::<f64>() / m;
            proposal.mean[d] = s * em + (1.0 - s) * proposal.mean[d];
            proposal.sd[d] = s * ev.sqrt() + (1.0 - s) * proposal.sd[d];
        }

        let (mean_n, sd_n) = proposal.n_moments();
        trace.push(TraceRow {
            iteration,
            best_score: best.as_ref().map_or(f64::INFINITY, |b| b.0),
            mean_n,
            sd_n,
            mean: proposal.mean.clone(),
            sd: proposal.sd.clone(),
            elite_threshold: scores[top[elite - 1]],
        });
        if sd_n < ce.tol_sd && proposal.sd.iter().all(|&v| v < ce.tol_sd) {
            converged = true;
            break;
        }
    }

    let (_, candidate) = best_feasible.or(best).expect("at least one iteration ran");
    let design = build(&candidate)?;
    let (score, oc_null, oc_alt) = score_of(&design)?;
    let feasible = meets_targets(&oc_null, &oc_alt, spec);
    Ok(OptimResult {
        best: design,
        score,
        oc_null,
        oc_alt,
        trace,
        feasible,
        converged,
        evaluations,
        resampled,
    })
}

fn meets_targets(null: &OcEstimate, alt: &OcEstimate, spec: &ObjectiveSpec) -> bool {
    null.fwer <= spec.alpha && 1.0 - alt.power <= spec.beta
}

fn sample_categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

// Inverse-CDF draw from N(mean, sd²) truncated to [lo, hi]. Works in the
// lower tail (reflecting if needed) so the CDF differences keep precision.
fn truncated_normal(mean: f64, sd: f64, (lo, hi): (f64, f64), u: f64) -> f64 {
    if !(sd > 1e-300) {
        return mean.clamp(lo, hi);
    }
    let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
    let (a, b, sign) = if a > 0.0 { (-b, -a, -1.0) } else { (a, b, 1.0) };
    let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
    let p = pa + u * (pb - pa);
    match std_normal_quantile(p) {
        Ok(z) if z.is_finite() && pb > pa => (mean + sign * sd * z.clamp(a, b)).clamp(lo, hi),
        _ => mean.clamp(lo, hi),
    }
}

/// Writes the trace as CSV: `iteration,best_score,mean_n,sd_n`, then a mean
/// and sd column per boundary coordinate, then `elite_threshold`.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], stages: usize, mut w: W) -> Result<()> {
    let mut names = Vec::new();
    for j in 1..stages {
        names.push(format!("f{j}"));
    }
    for j in 1..stages {
        names.push(format!("e{j}"));
    }
    names.push(format!("c{stages}"));
    let mut header = String::from("iteration,best_score,mean_n,sd_n");
    for n in &names {
        header.push_str(&format!(",{n}_mean,{n}_sd"));
    }
    header.push_str(",elite_threshold");
    writeln!(w, "{header}")?;
    for row in trace {
        let mut line = format!("{},{:.6},{:.6},{:.6}", row.iteration, row.best_score, row.mean_n, row.sd_n);
        for (m, s) in row.mean.iter().zip(&row.sd) {
            line.push_str(&format!(",{m:.6},{s:.6}"));
        }
        line.push_str(&format!(",{:.6}", row.elite_threshold));
        writeln!(w, "{line}")?;
    }
    Ok(())
}
