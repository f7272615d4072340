//! The common-random-number bank of standard normal responses.
//!
//! Replicate `r`, arm `k` owns substream `r * (K + 1) + k` of the bank seed
//! and draws its `J * n_max` deviates stage by stage. A design with group
//! size `n <= n_max` uses the first `n` deviates of every (arm, stage) block,
//! so every candidate design is evaluated on nested subsets of one dataset.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::RngStream;
use crate::error::{Error, Result};

pub const DEFAULT_REPLICATES: usize = 100_000;
pub const DEFAULT_MEMORY_BUDGET_MB: u64 = 2048;

const MAGIC: &[u8; 8] = b"MAMSBANK";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StorageMode {
    /// Keep every deviate in memory.
    #[default]
    Stored,
    /// Regenerate a replicate's deviates from its substreams when needed.
    OnDemand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    pub replicates: usize,
    /// Number of experimental arms `K` (the control arm is extra).
    pub arms: usize,
    pub stages: usize,
    /// Per-arm, per-stage capacity.
    pub n_max: usize,
    pub seed: u64,
    #[serde(default)]
    pub storage: StorageMode,
    #[serde(default = "default_budget")]
    pub memory_budget_mb: u64,
}

fn default_budget() -> u64 {
    DEFAULT_MEMORY_BUDGET_MB
}

impl BankConfig {
    pub fn new(replicates: usize, arms: usize, stages: usize, n_max: usize, seed: u64) -> Self {
        Self {
            replicates,
            arms,
            stages,
            n_max,
            seed,
            storage: StorageMode::Stored,
            memory_budget_mb: DEFAULT_MEMORY_BUDGET_MB,
        }
    }

    pub fn on_demand(mut self) -> Self {
        self.storage = StorageMode::OnDemand;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.replicates < 1 {
            return bad("bank replicates must be >= 1");
        }
        if self.arms < 1 {
            return bad("number of experimental arms must be >= 1");
        }
        if self.stages < 1 {
            return bad("number of stages must be >= 1");
        }
        if self.n_max < 2 {
            return bad("bank n_max must be >= 2");
        }
        Ok(())
    }

    /// Total number of deviates `R (K + 1) J n_max`.
    pub fn entry_count(&self) -> u128 {
        self.replicates as u128
            * (self.arms as u128 + 1)
            * self.stages as u128
            * self.n_max as u128
    }

    /// Deviates belonging to one replicate.
    pub fn replicate_len(&self) -> usize {
        (self.arms + 1) * self.stages * self.n_max
    }
}

/// Treatment effects `θ_k = μ_k - μ_0` for the experimental arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EffectVector(Vec<f64>);

impl EffectVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidArgument("effect vector is empty".into()));
        }
        if let Some(v) = theta.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "effect vector entries must be finite, got {v}"
            )));
        }
        Ok(Self(theta))
    }

    pub fn zeros(arms: usize) -> Self {
        Self(vec![0.0; arms])
    }

    /// The least favourable configuration `(δ₁, δ₀, ..., δ₀)`.
    pub fn least_favourable(arms: usize, delta1: f64, delta0: f64) -> Self {
        let mut v = vec![delta0; arms];
        v[0] = delta1;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Arms whose null hypothesis is true (`θ_k <= 0`).
    pub fn true_nulls(&self) -> Vec<bool> {
        self.0.iter().map(|&t| t <= 0.0).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ResponseBank {
    config: BankConfig,
    deviates: Option<Vec<f64>>,
}

/// Builds the bank described by `config`.
pub fn build_bank(config: BankConfig) -> Result<ResponseBank> {
    ResponseBank::build(config)
}

impl ResponseBank {
    pub fn build(config: BankConfig) -> Result<Self> {
        config.validate()?;
        let deviates = match config.storage {
            StorageMode::OnDemand => None,
            StorageMode::Stored => {
                let bytes = config.entry_count() * 8;
                let budget = config.memory_budget_mb as u128 * 1024 * 1024;
                if bytes > budget {
                    return Err(Error::Resource(format!(
                        "bank needs {} MiB but the memory budget is {} MiB; \
                         lower n_max or replicates, or use on-demand storage",
                        bytes / (1024 * 1024),
                        config.memory_budget_mb
                    )));
                }
                let per = config.replicate_len();
                let mut data = vec![0.0; config.replicates * per];
                data.par_chunks_mut(per)
                    .enumerate()
                    .for_each(|(r, chunk)| fill_replicate(&config, r, chunk));
                Some(data)
            }
        };
        Ok(Self { config, deviates })
    }

    pub fn config(&self) -> &BankConfig {
        &self.config
    }

    pub fn replicates(&self) -> usize {
        self.config.replicates
    }

    pub fn arms(&self) -> usize {
        self.config.arms
    }

    pub fn stages(&self) -> usize {
        self.config.stages
    }

    pub fn n_max(&self) -> usize {
        self.config.n_max
    }

    pub fn is_stored(&self) -> bool {
        self.deviates.is_some()
    }

    /// All deviates of replicate `r`, laid out `[arm][stage][patient]`.
    ///
    /// Stored banks return a view into memory; on-demand banks regenerate
    /// into `buf`.
    pub fn replicate<'a>(&'a self, r: usize, buf: &'a mut Vec<f64>) -> &'a [f64] {
        let per = self.config.replicate_len();
        match &self.deviates {
            Some(d) => &d[r * per..(r + 1) * per],
            None => {
                buf.resize(per, 0.0);
                fill_replicate(&self.config, r, buf);
                buf
            }
        }
    }

    /// Offset of block (arm `k`, stage `j`) inside a replicate slice; both
    /// indices are zero-based.
    pub fn block_offset(&self, k: usize, j: usize) -> usize {
        (k * self.config.stages + j) * self.config.n_max
    }

    pub fn check_group_size(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidArgument("group size must be >= 1".into()));
        }
        if n > self.config.n_max {
            return Err(Error::InvalidArgument(format!(
                "group size {n} exceeds bank capacity n_max = {}",
                self.config.n_max
            )));
        }
        Ok(())
    }

    /// Concrete responses of replicate `r` for group size `n`:
    /// `X_kji = θ_k 1{k >= 1} + σ_T Z_kji`.
    pub fn realize(&self, r: usize, n: usize, theta: &EffectVector, sigma_true: f64) -> Result<TrialData> {
        self.check_group_size(n)?;
        if r >= self.config.replicates {
            return Err(Error::InvalidArgument(format!(
                "replicate {r} out of range (bank has {})",
                self.config.replicates
            )));
        }
        if theta.len() != self.config.arms {
            return Err(Error::InvalidArgument(format!(
                "effect vector has {} entries, bank has {} arms",
                theta.len(),
                self.config.arms
            )));
        }
        if !(sigma_true > 0.0 && sigma_true.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "true standard deviation must be positive, got {sigma_true}"
            )));
        }
        let mut buf = Vec::new();
        let rep = self.replicate(r, &mut buf);
        let (arms, stages) = (self.config.arms + 1, self.config.stages);
        let mut values = Vec::with_capacity(arms * stages * n);
        for k in 0..arms {
            let shift = if k == 0 { 0.0 } else { theta.as_slice()[k - 1] };
            for j in 0..stages {
                let off = self.block_offset(k, j);
                values.extend(rep[off..off + n].iter().map(|z| shift + sigma_true * z));
            }
        }
        Ok(TrialData {
            arms,
            stages,
            n,
            values,
        })
    }

    /// Writes the bank in the versioned little-endian binary format.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let c = &self.config;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(c.replicates as u64).to_le_bytes())?;
        w.write_all(&(c.arms as u32).to_le_bytes())?;
        w.write_all(&(c.stages as u32).to_le_bytes())?;
        w.write_all(&(c.n_max as u32).to_le_bytes())?;
        w.write_all(&c.seed.to_le_bytes())?;
        let mut buf = Vec::new();
        let mut bytes = Vec::with_capacity(c.replicate_len() * 8);
        for r in 0..c.replicates {
            bytes.clear();
            for z in self.replicate(r, &mut buf) {
                bytes.extend_from_slice(&z.to_le_bytes());
            }
            w.write_all(&bytes)?;
        }
        Ok(())
    }

    /// Reads a bank written by [`ResponseBank::write_to`]. The result is
    /// always held in memory.
    pub fn read_from<R: Read>(mut rd: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        rd.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::BankFormat("bad magic".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut rd)?);
        if version != FORMAT_VERSION {
            return Err(Error::BankFormat(format!("unsupported version {version}")));
        }
        let replicates = u64::from_le_bytes(read_array(&mut rd)?) as usize;
        let arms = u32::from_le_bytes(read_array(&mut rd)?) as usize;
        let stages = u32::from_le_bytes(read_array(&mut rd)?) as usize;
        let n_max = u32::from_le_bytes(read_array(&mut rd)?) as usize;
        let seed = u64::from_le_bytes(read_array(&mut rd)?);
        let config = BankConfig::new(replicates, arms, stages, n_max, seed);
        config.validate()?;
        let count = usize::try_from(config.entry_count())
            .map_err(|_| Error::BankFormat("entry count overflows".into()))?;
        let mut raw = vec![0u8; count * 8];
        rd.read_exact(&mut raw)
            .map_err(|e| Error::BankFormat(format!("truncated data: {e}")))?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(Self {
            config,
            deviates: Some(data),
        })
    }
}

fn read_array<const N: usize, R: Read>(rd: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    rd.read_exact(&mut b)
        .map_err(|e| Error::BankFormat(format!("truncated header: {e}")))?;
    Ok(b)
}

fn fill_replicate(config: &BankConfig, r: usize, out: &mut [f64]) {
    let arms = config.arms + 1;
    let per_arm = config.stages * config.n_max;
    for (k, block) in out.chunks_mut(per_arm).enumerate().take(arms) {
        let sub = (r * arms + k) as u64;
        RngStream::new(config.seed, sub).fill_std_normal(block);
    }
}

/// Responses of one trial, laid out `[arm][stage][patient]` with arm 0 the
/// control and zero-based stage indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialData {
    arms: usize,
    stages: usize,
    n: usize,
    values: Vec<f64>,
}

impl TrialData {
    /// `values` is indexed `[arm][stage][patient]` including the control arm.
    pub fn new(arms_with_control: usize, stages: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if arms_with_control < 2 || stages < 1 || n < 1 {
            return Err(Error::InvalidArgument(
                "trial data needs a control, at least one experimental arm, one stage and n >= 1"
                    .into(),
            ));
        }
        if values.len() != arms_with_control * stages * n {
            return Err(Error::InvalidArgument(format!(
                "expected {} responses, got {}",
                arms_with_control * stages * n,
                values.len()
            )));
        }
        Ok(Self {
            arms: arms_with_control,
            stages,
            n,
            values,
        })
    }

    /// Number of arms including the control.
    pub fn arms_with_control(&self) -> usize {
        self.arms
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn group_size(&self) -> usize {
        self.n
    }

    pub fn block(&self, k: usize, j: usize) -> &[f64] {
        let off = (k * self.stages + j) * self.n;
        &self.values[off..off + self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BankConfig {
        BankConfig::new(20, 3, 2, 12, 99)
    }

    #[test]
    fn rebuild_is_identical() {
        let a = build_bank(small()).unwrap();
        let b = build_bank(small()).unwrap();
        assert_eq!(a.deviates, b.deviates);
        assert_eq!(a.deviates.as_ref().unwrap().len() as u128, small().entry_count());
    }

    #[test]
    fn seed_changes_contents() {
        let a = build_bank(small()).unwrap();
        let mut cfg = small();
        cfg.seed += 1;
        let b = build_bank(cfg).unwrap();
        assert_ne!(a.deviates.unwrap()[0], b.deviates.unwrap()[0]);
    }

    #[test]
    fn on_demand_matches_stored() {
        let stored = build_bank(small()).unwrap();
        let lazy = build_bank(small().on_demand()).unwrap();
        assert!(!lazy.is_stored());
        let (mut b1, mut b2) = (Vec::new(), Vec::new());
        for r in 0..20 {
            assert_eq!(stored.replicate(r, &mut b1), lazy.replicate(r, &mut b2));
        }
    }

    #[test]
    fn budget_exceeded_is_resource_error() {
        let mut cfg = BankConfig::new(100_000, 3, 2, 60, 1);
        cfg.memory_budget_mb = 16;
        match build_bank(cfg) {
            Err(Error::Resource(msg)) => assert!(msg.contains("on-demand")),
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            BankConfig::new(0, 3, 2, 10, 1),
            BankConfig::new(10, 0, 2, 10, 1),
            BankConfig::new(10, 3, 0, 10, 1),
            BankConfig::new(10, 3, 2, 1, 1),
        ] {
            assert!(matches!(build_bank(cfg), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn realize_identity_and_affine() {
        let bank = build_bank(small()).unwrap();
        let zero = EffectVector::zeros(3);
        let raw = bank.realize(4, 7, &zero, 1.0).unwrap();
        let mut buf = Vec::new();
        let rep = bank.replicate(4, &mut buf).to_vec();
        assert_eq!(raw.block(2, 1), &rep[bank.block_offset(2, 1)..bank.block_offset(2, 1) + 7]);

        let theta = EffectVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        let x = bank.realize(4, 7, &theta, 2.0).unwrap();
        for i in 0..3 {
            assert_eq!(x.block(1, 0)[i], 1.0 + 2.0 * raw.block(1, 0)[i]);
        }
        // control responses are shared between effect settings
        let y = bank.realize(4, 7, &zero, 2.0).unwrap();
        assert_eq!(x.block(0, 0), y.block(0, 0));
        assert_eq!(x.block(0, 1), y.block(0, 1));
    }

    #[test]
    fn realize_rejects_oversized_group() {
        let bank = build_bank(small()).unwrap();
        assert!(bank.realize(0, 13, &EffectVector::zeros(3), 1.0).is_err());
        assert!(bank.realize(20, 5, &EffectVector::zeros(3), 1.0).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let bank = build_bank(small()).unwrap();
        let mut bytes = Vec::new();
        bank.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], b"MAMSBANK");
        assert_eq!(bytes.len(), 8 + 4 + 8 + 4 + 4 + 4 + 8 + 20 * 4 * 2 * 12 * 8);
        let back = ResponseBank::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back.config, bank.config);
        assert_eq!(back.deviates, bank.deviates);
        assert!(ResponseBank::read_from(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(ResponseBank::read_from(bad.as_slice()).is_err());
    }

    #[test]
    fn large_bank_grand_mean() {
        let bank = build_bank(BankConfig::new(100_000, 3, 2, 60, 2024)).unwrap();
        let d = bank.deviates.as_ref().unwrap();
        assert_eq!(d.len(), 48_000_000);
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        assert!(mean.abs() < 0.001, "grand mean {mean}");
    }
}
