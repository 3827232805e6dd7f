//! Sweep configuration (TOML).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constellation::Modulation;
use crate::detector::{DetectorConfig, SolverMode};
use crate::error::{Error, Result};
use crate::objective::LambdaSchedule;
use crate::qaoa::TrainBudget;
use crate::transfer::BankConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorId {
    Mf,
    Mmse,
    Kbest,
    RegExhaustive,
    UnregExhaustive,
    Direct,
    Transfer,
}

impl DetectorId {
    pub const ALL: [DetectorId; 7] = [
        DetectorId::Mf,
        DetectorId::Mmse,
        DetectorId::Kbest,
        DetectorId::RegExhaustive,
        DetectorId::UnregExhaustive,
        DetectorId::Direct,
        DetectorId::Transfer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorId::Mf => "mf",
            DetectorId::Mmse => "mmse",
            DetectorId::Kbest => "kbest",
            DetectorId::RegExhaustive => "reg-exhaustive",
            DetectorId::UnregExhaustive => "unreg-exhaustive",
            DetectorId::Direct => "direct",
            DetectorId::Transfer => "transfer",
        }
    }

    /// True for the blockwise K-best variants.
    pub fn is_blockwise(self) -> bool {
        self.detector_config(&DetectorParams::default()).is_some()
    }

    /// Blockwise detector settings; `None` for classical baselines.
    pub fn detector_config(self, p: &DetectorParams) -> Option<DetectorConfig> {
        let mode = match self {
            DetectorId::RegExhaustive | DetectorId::UnregExhaustive => SolverMode::Exhaustive,
            DetectorId::Direct => SolverMode::Direct,
            DetectorId::Transfer => SolverMode::Transfer,
            _ => return None,
        };
        Some(DetectorConfig {
            block_size: p.block_size,
            depth: p.depth,
            list_width: p.list_width,
            k_best: p.k_best,
            shots: p.shots,
            mode,
            regularization: (self != DetectorId::UnregExhaustive).then(|| LambdaSchedule::from_array(p.lambda)),
            online_budget: TrainBudget {
                evals_per_start: p.online_evals,
                restarts: p.online_restarts,
            },
        })
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorId::ALL
            .into_iter()
            .find(|d| d.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown detector '{s}'")))
    }
}

/// Parameters shared by the blockwise detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub block_size: usize,
    pub depth: usize,
    pub list_width: usize,
    pub k_best: usize,
    pub shots: usize,
    /// `[lambda_min, lambda_max, rho0, kappa]`
    pub lambda: [f64; 4],
    pub online_evals: usize,
    pub online_restarts: usize,
    /// `K` of the symbolwise baseline.
    pub classical_k: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            block_size: 2,
            depth: 4,
            list_width: 4,
            k_best: 4,
            shots: 1024,
            lambda: LambdaSchedule::TABLE1.as_array(),
            online_evals: TrainBudget::ONLINE.evals_per_start,
            online_restarts: TrainBudget::ONLINE.restarts,
            classical_k: 4,
        }
    }
}

/// Offline bank construction settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BankParams {
    pub k_temp: usize,
    pub n_ref: usize,
    pub offline_evals: usize,
    pub offline_restarts: usize,
}

impl Default for BankParams {
    fn default() -> Self {
        BankParams {
            k_temp: 4,
            n_ref: 32,
            offline_evals: TrainBudget::OFFLINE.evals_per_start,
            offline_restarts: TrainBudget::OFFLINE.restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub nt: usize,
    pub nr: usize,
    pub modulation: Modulation,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub detectors: Vec<DetectorId>,
    pub detector: DetectorParams,
    pub bank_build: BankParams,
    /// Template bank, required by the transfer detector.
    pub bank: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig::table1()
    }
}

impl SweepConfig {
    /// Default experimental configuration: 16x16 16QAM, 0:2:30 dB, 100 trials.
    pub fn table1() -> Self {
        SweepConfig {
            nt: 16,
            nr: 16,
            modulation: Modulation::Qam16,
            snr_db: snr_range(0.0, 2.0, 30.0).expect("static grid"),
            trials: 100,
            master_seed: 2024,
            detectors: DetectorId::ALL.to_vec(),
            detector: DetectorParams::default(),
            bank_build: BankParams::default(),
            bank: None,
            out: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Relative paths inside the file are relative to the file.
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.bank, &mut cfg.out].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn bits_per_trial(&self) -> usize {
        self.nt * self.modulation.bits_per_symbol()
    }

    pub fn needs_bank(&self) -> bool {
        self.detectors.contains(&DetectorId::Transfer)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR grid must be nonempty and finite".into()));
        }
        if self.detectors.is_empty() {
            return Err(Error::Config("no detectors selected".into()));
        }
        let mut seen = self.detectors.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.detectors.len() {
            return Err(Error::Config("duplicate detector".into()));
        }
        if self.nt == 0 || self.nr < self.nt {
            return Err(Error::Config(format!("need nr >= nt >= 1, got {}x{}", self.nr, self.nt)));
        }
        if self.detectors.contains(&DetectorId::Kbest) && self.detector.classical_k == 0 {
            return Err(Error::Config("classical_k must be >= 1".into()));
        }
        for d in &self.detectors {
            if let Some(c) = d.detector_config(&self.detector) {
                c.validate(self.modulation)?;
            }
        }
        Ok(())
    }

    /// Offline bank settings matching this sweep.
    pub fn bank_config(&self) -> BankConfig {
        BankConfig {
            nt: self.nt,
            nr: self.nr,
            modulation: self.modulation,
            block_size: self.detector.block_size,
            depth: self.detector.depth,
            k_temp: self.bank_build.k_temp,
            n_ref: self.bank_build.n_ref,
            snr_grid: self.snr_db.clone(),
            schedule: LambdaSchedule::from_array(self.detector.lambda),
            budget: TrainBudget {
                evals_per_start: self.bank_build.offline_evals,
                restarts: self.bank_build.offline_restarts,
            },
            master_seed: self.master_seed,
        }
    }
}

/// Inclusive grid `a, a + step, ..., b`.
pub fn snr_range(a: f64, step: f64, b: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !a.is_finite() || !b.is_finite() || b < a {
        return Err(Error::Config(format!("bad SNR range {a}:{step}:{b}")));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + step * i as f64).collect())
}

/// Parses `a:step:b`.
pub fn parse_snr_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad SNR range '{s}': {e}")))?;
    match parts[..] {
        [a, step, b] => snr_range(a, step, b),
        [a] => Ok(vec![a]),
        _ => Err(Error::Config(format!("expected a:step:b, got '{s}'"))),
    }
}

/// Parses a comma-separated detector list.
pub fn parse_detectors(s: &str) -> Result<Vec<DetectorId>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}
