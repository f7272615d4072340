//! TOML run configuration shared by the command-line subcommands.
//!
//! ```toml
//! [settings]
//! arms = 3
//! stages = 2
//! alpha = 0.05
//! beta = 0.1
//! delta1 = 1.0
//! delta0 = 0.0
//! sigma2 = 1.0
//!
//! [bank]
//! replicates = 100000
//! seed = 20170601
//! n_max = 30            # optional
//!
//! [optimize]
//! rule = "simultaneous"
//! weights = [0.3333333333333333, 0.3333333333333333, 0.3333333333333333]
//! ```
//!
//! Every semantic check reports the line of the offending section.

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::bank::{BankConfig, EffectVector, StorageMode, DEFAULT_MEMORY_BUDGET_MB, DEFAULT_REPLICATES};
use crate::comparators::{ApproachTag, ComparisonGrid, Scenario, PUBLISHED_SIGMA2_GRID};
use crate::dist::std_normal_quantile;
use crate::engine::{Design, StatisticMode, StoppingRule};
use crate::error::{Error, Result};
use crate::optimizer::{CeConfig, TrialSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    #[default]
    T,
    Z,
}

impl Statistic {
    pub fn mode(self, sigma: f64) -> Result<StatisticMode> {
        match self {
            Statistic::T => Ok(StatisticMode::TStat),
            Statistic::Z => StatisticMode::z(sigma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankSection {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub seed: u64,
    /// Defaults to twice the approximate single-stage size spread over the stages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub storage: StorageMode,
    #[serde(default = "default_budget")]
    pub memory_budget_mb: u64,
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

fn default_budget() -> u64 {
    DEFAULT_MEMORY_BUDGET_MB
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub n: usize,
    pub futility: Vec<f64>,
    pub efficacy: Vec<f64>,
    pub rule: StoppingRule,
}

impl DesignSpec {
    pub fn design(&self) -> Result<Design> {
        Design::new(self.n, self.efficacy.clone(), self.futility.clone(), self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub rule: StoppingRule,
    pub weights: [f64; 3],
    #[serde(default)]
    pub statistic: Statistic,
    /// Penalty scale `P`; defaults to the single-stage reference total size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    /// CE settings; `seed` defaults to the bank seed and `n_range` to
    /// `[smallest valid n, n_max]`.
    #[serde(default)]
    pub ce: CeSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elite_frac: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_range: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_box: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproachSpec {
    pub tag: ApproachTag,
    pub scenario: String,
    pub delta1: f64,
    pub delta0: f64,
    #[serde(flatten)]
    pub design: DesignSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    #[serde(default = "published_grid")]
    pub sigma2_true: Vec<f64>,
    /// Include the sixteen published approaches.
    #[serde(default)]
    pub published: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<StoppingRule>,
    #[serde(default, rename = "approach", skip_serializing_if = "Vec::is_empty")]
    pub approaches: Vec<ApproachSpec>,
}

fn published_grid() -> Vec<f64> {
    PUBLISHED_SIGMA2_GRID.to_vec()
}

impl EvaluateSection {
    pub fn grid(&self) -> ComparisonGrid {
        ComparisonGrid {
            sigma2_true: self.sigma2_true.clone(),
            scenarios: self.scenarios.clone(),
            rules: self.rules.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(flatten)]
    pub design: DesignSpec,
    #[serde(default)]
    pub statistic: Statistic,
    /// Defaults to the planning variance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_true: Option<f64>,
    /// Per-arm effect values; the grid is their K-fold product. Defaults to
    /// `{0, δ₀, δ₁}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleStageSection {
    #[serde(default)]
    pub statistic: Statistic,
}

/// A parsed run configuration. Sections a subcommand does not use may be
/// absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub settings: TrialSettings,
    pub bank: BankSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluate: Option<EvaluateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_stage: Option<SingleStageSection>,
}

// Mirror of RunConfig that keeps section spans for error messages.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpannedConfig {
    settings: Spanned<TrialSettings>,
    bank: Spanned<BankSection>,
    #[serde(default)]
    optimize: Option<Spanned<OptimizeSection>>,
    #[serde(default)]
    evaluate: Option<Spanned<EvaluateSection>>,
    #[serde(default)]
    scan: Option<Spanned<ScanSection>>,
    #[serde(default)]
    single_stage: Option<Spanned<SingleStageSection>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    /// Parses and validates a configuration.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: SpannedConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string().trim_end().to_string()))?;
        let at = |span: std::ops::Range<usize>, section: &str, e: Error| {
            let msg = match e {
                Error::InvalidConfig(m) | Error::InvalidArgument(m) => m,
                other => other.to_string(),
            };
            Error::InvalidConfig(format!("line {}: [{section}] {msg}", line_of(text, span.start)))
        };
        let settings_span = raw.settings.span();
        let settings = raw.settings.into_inner();
        settings.validate().map_err(|e| at(settings_span.clone(), "settings", e))?;

        let bank_span = raw.bank.span();
        let bank = raw.bank.into_inner();
        if bank.replicates < 1 {
            return Err(at(bank_span, "bank", Error::InvalidConfig("replicates must be >= 1".into())));
        }
        if bank.n_max.is_some_and(|n| n < 2) {
            return Err(at(bank_span, "bank", Error::InvalidConfig("n_max must be >= 2".into())));
        }

        let config = RunConfig {
            settings,
            bank,
            optimize: raw.optimize.as_ref().map(|s| s.get_ref().clone()),
            evaluate: raw.evaluate.as_ref().map(|s| s.get_ref().clone()),
            scan: raw.scan.as_ref().map(|s| s.get_ref().clone()),
            single_stage: raw.single_stage.as_ref().map(|s| s.get_ref().clone()),
        };
        if let Some(s) = &raw.optimize {
            config.check_optimize().map_err(|e| at(s.span(), "optimize", e))?;
        }
        if let Some(s) = &raw.evaluate {
            config.check_evaluate().map_err(|e| at(s.span(), "evaluate", e))?;
        }
        if let Some(s) = &raw.scan {
            config.check_scan().map_err(|e| at(s.span(), "scan", e))?;
        }
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn check_optimize(&self) -> Result<()> {
        let o = self.optimize.as_ref().expect("checked by caller");
        o.statistic.mode(self.settings.sigma())?;
        if o.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidConfig(format!("weights must be nonnegative, got {:?}", o.weights)));
        }
        if o.penalty.is_some_and(|p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidConfig("penalty must be positive".into()));
        }
        self.ce_config()?.validate(&self.settings)
    }

    fn check_evaluate(&self) -> Result<()> {
        let e = self.evaluate.as_ref().expect("checked by caller");
        e.grid().validate()?;
        if !e.published && e.approaches.is_empty() {
            return Err(Error::InvalidConfig(
                "needs `published = true` or at least one [[evaluate.approach]]".into(),
            ));
        }
        for a in &e.approaches {
            a.design.design()?;
        }
        Ok(())
    }

    fn check_scan(&self) -> Result<()> {
        let s = self.scan.as_ref().expect("checked by caller");
        s.design.design()?;
        s.statistic.mode(self.settings.sigma())?;
        if s.sigma2_true.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("sigma2_true must be positive".into()));
        }
        if let Some(v) = &s.values {
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig("values must be a nonempty list of finite numbers".into()));
            }
        }
        Ok(())
    }

    /// `n_max` from the file, else twice the Bonferroni normal-approximation
    /// single-stage size divided over the stages (never below the top of the
    /// CE `n_range`).
    pub fn resolved_n_max(&self) -> usize {
        if let Some(n) = self.bank.n_max {
            return n;
        }
        let s = &self.settings;
        let z = std_normal_quantile(1.0 - s.alpha / s.arms as f64).unwrap_or(3.0)
            + std_normal_quantile(1.0 - s.beta).unwrap_or(1.3);
        let single = (2.0 * z * z * s.sigma2 / (s.delta1 * s.delta1)).ceil() as usize;
        let mut n = (2 * single).div_ceil(s.stages).max(2);
        if let Some((_, hi)) = self.optimize.as_ref().and_then(|o| o.ce.n_range) {
            n = n.max(hi);
        }
        n
    }

    pub fn bank_config(&self) -> BankConfig {
        BankConfig {
            replicates: self.bank.replicates,
            arms: self.settings.arms,
            stages: self.settings.stages,
            n_max: self.resolved_n_max(),
            seed: self.bank.seed,
            storage: self.bank.storage,
            memory_budget_mb: self.bank.memory_budget_mb,
        }
    }

    /// CE settings with defaults filled in.
    pub fn ce_config(&self) -> Result<CeConfig> {
        let o = self
            .optimize
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing [optimize] section".into()))?;
        let d = CeConfig::default();
        let n_min = (self.settings.arms + 2).div_ceil(self.settings.arms + 1);
        Ok(CeConfig {
            population: o.ce.population.unwrap_or(d.population),
            elite_frac: o.ce.elite_frac.unwrap_or(d.elite_frac),
            smoothing: o.ce.smoothing.unwrap_or(d.smoothing),
            max_iters: o.ce.max_iters.unwrap_or(d.max_iters),
            tol_sd: o.ce.tol_sd.unwrap_or(d.tol_sd),
            n_range: o.ce.n_range.unwrap_or((n_min, self.resolved_n_max())),
            boundary_box: o.ce.boundary_box.clone(),
            initial_mean: o.ce.initial_mean.clone(),
            seed: o.ce.seed.unwrap_or(self.bank.seed),
        })
    }

    /// Scenario named after the settings' effect sizes.
    pub fn scenario(&self) -> Scenario {
        Scenario::new("settings", self.settings.delta1, self.settings.delta0)
    }

    /// The `{values}^K` effect grid for a scan.
    pub fn scan_grid(&self) -> Result<Vec<EffectVector>> {
        let s = self
            .scan
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing [scan] section".into()))?;
        let values = s
            .values
            .clone()
            .unwrap_or_else(|| vec![0.0, self.settings.delta0, self.settings.delta1]);
        let arms = self.settings.arms;
        let count = values.len().pow(arms as u32);
        (0..count)
            .map(|mut code| {
                let mut theta = vec![0.0; arms];
                for t in theta.iter_mut().rev() {
                    *t = values[code % values.len()];
                    code /= values.len();
                }
                EffectVector::new(theta)
            })
            .collect()
    }

    /// The resolved configuration as TOML, for output headers.
    pub fn to_toml(&self) -> String {
        let mut resolved = self.clone();
        resolved.bank.n_max = Some(self.resolved_n_max());
        toml::to_string(&resolved).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[settings]\narms = 3\nstages = 2\nalpha = 0.05\nbeta = 0.1\ndelta1 = 1.0\ndelta0 = 0.0\nsigma2 = 1.0\n\n[bank]\nreplicates = 1000\nseed = 4\n";

    #[test]
    fn parses_minimal_config_with_defaults() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(c.bank.storage, StorageMode::Stored);
        assert_eq!(c.bank.memory_budget_mb, DEFAULT_MEMORY_BUDGET_MB);
        // Bonferroni size for delta = 1: 2 (z_{0.9833} + z_{0.9})^2 = 23.25 -> 24; 2 * 24 / 2.
        assert_eq!(c.resolved_n_max(), 24);
        let again = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(again.bank.n_max, Some(24));
        assert_eq!(again.settings, c.settings);
    }

    #[test]
    fn missing_key_is_named() {
        let text = BASE.replace("alpha = 0.05\n", "");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("alpha"), "{err}");
    }

    #[test]
    fn semantic_errors_carry_the_section_line() {
        let text = BASE.replace("beta = 0.1", "beta = 1.5");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line 1") && err.contains("beta"), "{err}");
        let text = format!("{BASE}\n[optimize]\nrule = \"separate\"\nweights = [1, 1, 1]\nce = {{ population = 5 }}\n");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line 14") && err.contains("elite_frac"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse(&format!("{BASE}replicats = 3\n")).unwrap_err().to_string();
        assert!(err.contains("replicats"), "{err}");
    }

    #[test]
    fn scan_grid_is_full_product() {
        let text = format!(
            "{BASE}\n[scan]\nn = 12\nfutility = [0.6, 2.0]\nefficacy = [2.9, 2.0]\nrule = \"simultaneous\"\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        let grid = c.scan_grid().unwrap();
        assert_eq!(grid.len(), 27);
        assert_eq!(grid[0].as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(grid[26].as_slice(), &[1.0, 1.0, 1.0]);
        let bad = text.replace("efficacy = [2.9, 2.0]", "efficacy = [0.5, 2.0]");
        assert!(RunConfig::parse(&bad).unwrap_err().to_string().contains("[scan]"));
    }

    #[test]
    fn evaluate_needs_approaches() {
        let text = format!("{BASE}\n[evaluate]\nsigma2_true = [1.0]\n");
        assert!(RunConfig::parse(&text).is_err());
        let text = format!(
            "{BASE}\n[evaluate]\nsigma2_true = [1.0]\n\n[[evaluate.approach]]\ntag = \"A4\"\nscenario = \"s\"\ndelta1 = 1.0\ndelta0 = 0.0\nn = 12\nfutility = [0.603, 2.01]\nefficacy = [2.942, 2.01]\nrule = \"simultaneous\"\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.evaluate.unwrap().approaches[0].tag, ApproachTag::A4);
    }
}
