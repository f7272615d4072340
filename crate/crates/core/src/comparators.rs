//! Competing ways of running a MAMS trial when the variance is unknown, and
//! their evaluation over a grid of true variances.
//!
//! - `A1`: known-variance boundaries with z-statistics at the assumed σ.
//! - `A2`: the same boundaries with t-statistics.
//! - `A3`: the same boundaries moved by quantile substitution, t-statistics.
//! - `A4`: boundaries optimised for t-statistics.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bank::{EffectVector, ResponseBank};
use crate::dist::{std_normal_sf, t_isf};
use crate::engine::{Design, StatisticMode, StoppingRule};
use crate::error::{Error, Result};
use crate::oc::OcEvaluator;

const PUBLISHED_DESIGNS: &str = include_str!("../data/published_designs.csv");

/// Sequence of σ_T² values used for the published comparison.
pub const PUBLISHED_SIGMA2_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ApproachTag {
    A1,
    A2,
    A3,
    A4,
}

impl ApproachTag {
    pub const ALL: [ApproachTag; 4] = [ApproachTag::A1, ApproachTag::A2, ApproachTag::A3, ApproachTag::A4];
}

impl fmt::Display for ApproachTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ApproachTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A1" => Ok(ApproachTag::A1),
            "A2" => Ok(ApproachTag::A2),
            "A3" => Ok(ApproachTag::A3),
            "A4" => Ok(ApproachTag::A4),
            other => Err(Error::InvalidConfig(format!("unknown approach `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryTransform {
    None,
    QuantileSubstitution,
}

/// Effect sizes of one design scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub delta1: f64,
    pub delta0: f64,
}

impl Scenario {
    pub fn new(name: impl Into<String>, delta1: f64, delta0: f64) -> Self {
        Self {
            name: name.into(),
            delta1,
            delta0,
        }
    }

    pub fn effect(&self, arms: usize) -> EffectVector {
        EffectVector::least_favourable(arms, self.delta1, self.delta0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Approach {
    tag: ApproachTag,
    scenario: Scenario,
    base_design: Design,
    mode: StatisticMode,
    transform: BoundaryTransform,
}

impl Approach {
    /// Checks that z-statistics go with `A1` and quantile substitution with
    /// `A3`, and nowhere else.
    pub fn new(
        tag: ApproachTag,
        scenario: Scenario,
        base_design: Design,
        mode: StatisticMode,
        transform: BoundaryTransform,
    ) -> Result<Self> {
        let is_z = matches!(mode, StatisticMode::ZStat { .. });
        let is_qs = transform == BoundaryTransform::QuantileSubstitution;
        if is_z != (tag == ApproachTag::A1) {
            return Err(Error::InvalidConfig(format!(
                "approach {tag} must {}use z-statistics",
                if is_z { "not " } else { "" }
            )));
        }
        if is_qs != (tag == ApproachTag::A3) {
            return Err(Error::InvalidConfig(format!(
                "approach {tag} must {}use quantile substitution",
                if is_qs { "not " } else { "" }
            )));
        }
        Ok(Self {
            tag,
            scenario,
            base_design,
            mode,
            transform,
        })
    }

    /// The standard approach for `tag`: z-statistics at `assumed_sigma` for
    /// `A1`, t-statistics otherwise, substitution for `A3`.
    pub fn standard(tag: ApproachTag, scenario: Scenario, base_design: Design, assumed_sigma: f64) -> Result<Self> {
        let mode = match tag {
            ApproachTag::A1 => StatisticMode::z(assumed_sigma)?,
            _ => StatisticMode::TStat,
        };
        let transform = match tag {
            ApproachTag::A3 => BoundaryTransform::QuantileSubstitution,
            _ => BoundaryTransform::None,
        };
        Self::new(tag, scenario, base_design, mode, transform)
    }

    pub fn tag(&self) -> ApproachTag {
        self.tag
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn base_design(&self) -> &Design {
        &self.base_design
    }

    pub fn mode(&self) -> StatisticMode {
        self.mode
    }

    /// The design actually run, after any boundary transform.
    pub fn effective_design(&self, arms: usize) -> Result<Design> {
        match self.transform {
            BoundaryTransform::None => Ok(self.base_design.clone()),
            BoundaryTransform::QuantileSubstitution => quantile_substituted(&self.base_design, arms),
        }
    }
}

/// Residual degrees of freedom at each stage when all `K + 1` arms recruit
/// `n` per stage: `(K + 1) n j - (K + 1)`.
pub fn planned_degrees_of_freedom(n: usize, arms: usize, stages: usize) -> Vec<usize> {
    (1..=stages)
        .map(|j| ((arms + 1) * n * j).saturating_sub(arms + 1))
        .collect()
}

/// Replaces every boundary `b` at stage `j` by the `t_{ν_j}` point with the
/// same upper-tail probability as `b` under the standard normal.
pub fn quantile_substitute(
    efficacy: &[f64],
    futility: &[f64],
    n: usize,
    arms: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if efficacy.len() != futility.len() {
        return Err(Error::InvalidArgument("boundary vectors differ in length".into()));
    }
    let dfs = planned_degrees_of_freedom(n, arms, efficacy.len());
    let map = |b: f64, df: usize| -> Result<f64> {
        if !b.is_finite() {
            return Err(Error::InvalidArgument(format!("boundary {b} is not finite")));
        }
        if df < 1 {
            return Err(Error::InvalidArgument(
                "quantile substitution needs at least one degree of freedom".into(),
            ));
        }
        t_isf(std_normal_sf(b), df as f64)
    };
    let e = efficacy.iter().zip(&dfs).map(|(&b, &df)| map(b, df)).collect::<Result<_>>()?;
    let f = futility.iter().zip(&dfs).map(|(&b, &df)| map(b, df)).collect::<Result<_>>()?;
    Ok((e, f))
}

pub fn quantile_substituted(design: &Design, arms: usize) -> Result<Design> {
    let (e, f) = quantile_substitute(design.efficacy(), design.futility(), design.group_size(), arms)?;
    Design::new(design.group_size(), e, f, design.rule())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignFamily {
    Triangular,
    BalancedOptimal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PublishedDesign {
    pub scenario: Scenario,
    pub family: DesignFamily,
    pub design: Design,
}

/// The published known-variance triangular designs and t-test
/// balanced-optimal designs (`K = 3`, `J = 2`).
pub fn published_designs() -> Vec<PublishedDesign> {
    PUBLISHED_DESIGNS
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .map(|line| {
            let c: Vec<&str> = line.split(',').collect();
            let num = |s: &str| s.parse::<f64>().expect("published constant");
            let bounds = |s: &str| s.split(';').map(num).collect::<Vec<f64>>();
            let rule = match c[3] {
                "simultaneous" => StoppingRule::Simultaneous,
                _ => StoppingRule::Separate,
            };
            let family = match c[4] {
                "triangular" => DesignFamily::Triangular,
                _ => DesignFamily::BalancedOptimal,
            };
            let mut futility = bounds(c[6]);
            let efficacy = bounds(c[7]);
            let last = efficacy.len() - 1;
            futility[last] = efficacy[last];
            PublishedDesign {
                scenario: Scenario::new(c[0], num(c[1]), num(c[2])),
                family,
                design: Design::new(c[5].parse().expect("published n"), efficacy, futility, rule)
                    .expect("published design is valid"),
            }
        })
        .collect()
}

pub fn published_design(scenario: &str, rule: StoppingRule, family: DesignFamily) -> Option<PublishedDesign> {
    published_designs()
        .into_iter()
        .find(|p| p.scenario.name == scenario && p.design.rule() == rule && p.family == family)
}

/// All sixteen (scenario, rule, approach) combinations of the published
/// comparison, with z-statistics at `assumed_sigma` for `A1`.
pub fn published_approaches(assumed_sigma: f64) -> Result<Vec<Approach>> {
    let all = published_designs();
    let mut out = Vec::new();
    for tri in all.iter().filter(|p| p.family == DesignFamily::Triangular) {
        let opt = all
            .iter()
            .find(|p| {
                p.family == DesignFamily::BalancedOptimal
                    && p.scenario == tri.scenario
                    && p.design.rule() == tri.design.rule()
            })
            .expect("matching optimal design");
        for tag in ApproachTag::ALL {
            let base = if tag == ApproachTag::A4 { &opt.design } else { &tri.design };
            out.push(Approach::standard(tag, tri.scenario.clone(), base.clone(), assumed_sigma)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonGrid {
    pub sigma2_true: Vec<f64>,
    /// Scenario names to include; empty means all.
    #[serde(default)]
    pub scenarios: Vec<String>,
    /// Stopping rules to include; empty means all.
    #[serde(default)]
    pub rules: Vec<StoppingRule>,
}

impl ComparisonGrid {
    pub fn published() -> Self {
        Self {
            sigma2_true: PUBLISHED_SIGMA2_GRID.to_vec(),
            scenarios: Vec::new(),
            rules: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma2_true.is_empty() {
            return Err(Error::InvalidConfig("grid needs at least one sigma2_true value".into()));
        }
        if let Some(v) = self.sigma2_true.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(format!("sigma2_true values must be positive, got {v}")));
        }
        Ok(())
    }

    fn includes(&self, approach: &Approach) -> bool {
        (self.scenarios.is_empty() || self.scenarios.contains(&approach.scenario.name))
            && (self.rules.is_empty() || self.rules.contains(&approach.base_design.rule()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scenario: String,
    pub rule: StoppingRule,
    pub approach: ApproachTag,
    pub sigma2_true: f64,
    pub fwer: f64,
    pub power: f64,
    pub ess_null: f64,
    pub ess_alt: f64,
    pub mc_se_fwer: f64,
    pub replicates: usize,
}

/// One row per (approach, σ_T²) for every approach the grid selects.
pub fn evaluate_approaches(
    approaches: &[Approach],
    grid: &ComparisonGrid,
    bank: &ResponseBank,
) -> Result<Vec<ComparisonRow>> {
    grid.validate()?;
    let arms = bank.arms();
    let eval = OcEvaluator::new(bank);
    let mut rows = Vec::new();
    for approach in approaches.iter().filter(|a| grid.includes(a)) {
        let design = approach.effective_design(arms)?;
        let delta = approach.scenario.effect(arms);
        for &s2 in &grid.sigma2_true {
            let pair = eval.estimate_pair(&design, approach.mode, &delta, s2.sqrt())?;
            rows.push(ComparisonRow {
                scenario: approach.scenario.name.clone(),
                rule: design.rule(),
                approach: approach.tag,
                sigma2_true: s2,
                fwer: pair.fwer(),
                power: pair.power(),
                ess_null: pair.ess_null(),
                ess_alt: pair.ess_alt(),
                mc_se_fwer: pair.null.mc_se_fwer(),
                replicates: pair.null.replicates,
            });
        }
    }
    Ok(rows)
}

pub const COMPARISON_HEADER: &str =
    "scenario,rule,approach,sigma2_true,fwer,power,ess_null,ess_alt,mc_se_fwer,R";

/// Writes rows as CSV: rates to four decimals, sample sizes to one.
pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], mut w: W) -> Result<()> {
    writeln!(w, "{COMPARISON_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:.4},{:.4},{:.1},{:.1},{:.4},{}",
            r.scenario,
            r.rule,
            r.approach,
            r.sigma2_true,
            r.fwer,
            r.power,
            r.ess_null,
            r.ess_alt,
            r.mc_se_fwer,
            r.replicates
        )?;
    }
    Ok(())
}
