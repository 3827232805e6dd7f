//! SNR-indexed QAOA template bank.
//!
//! Offline, each SNR grid point gets `n_ref` reference block problems drawn
//! from fresh channels. Every reference problem is trained directly, every
//! trained angle vector is scored by its mean normalized optimality gap over
//! all reference problems at that SNR, and the `k_temp` best are kept.

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::Modulation;
use crate::error::{Error, Result};
use crate::model::{generate_instance, RngStream};
use crate::objective::{block_observation, mmse_hard, BlockProblem, LambdaSchedule};
use crate::preprocess::preprocess;
use crate::qaoa::{direct_train, expectation, CostVector, QaoaParams, TrainBudget};

use super::block_cost_vector;

pub const BANK_VERSION: u32 = 1;

/// Stream tag separating bank construction from sweep streams.
const BANK_STREAM: u64 = 0xb4_4e_6b;

const GAP_EPS: f64 = 1e-12;
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Mean normalized optimality gap on the reference set.
    pub score: f64,
}

impl Template {
    pub fn params(&self) -> QaoaParams {
        QaoaParams {
            gammas: self.gammas.clone(),
            betas: self.betas.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub snr_db: f64,
    pub templates: Vec<Template>,
}

/// Persistent template bank (JSON document, version 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateBank {
    pub version: u32,
    pub depth: usize,
    pub qubits: usize,
    pub block_size: usize,
    pub modulation: Modulation,
    pub k_temp: usize,
    /// `[lambda_min, lambda_max, rho0, kappa]`
    pub lambda: [f64; 4],
    pub master_seed: u64,
    pub n_ref: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offline_budget: Option<TrainBudget>,
    pub entries: Vec<BankEntry>,
}

impl TemplateBank {
    /// Checks header and parameter dimensions.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Bank(msg));
        if self.version != BANK_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        if self.depth == 0 || self.k_temp == 0 || self.block_size == 0 {
            return bad("depth, k_temp and block_size must be >= 1".into());
        }
        if self.qubits != self.block_size * self.modulation.bits_per_symbol() {
            return bad(format!(
                "qubits {} != block_size {} x {} bits",
                self.qubits,
                self.block_size,
                self.modulation.bits_per_symbol()
            ));
        }
        if self.entries.is_empty() {
            return bad("no SNR entries".into());
        }
        for e in &self.entries {
            if !e.snr_db.is_finite() {
                return bad("non-finite SNR".into());
            }
            if e.templates.is_empty() || e.templates.len() > self.k_temp {
                return bad(format!(
                    "{} templates at {} dB, header k_temp = {}",
                    e.templates.len(),
                    e.snr_db,
                    self.k_temp
                ));
            }
            for t in &e.templates {
                if t.gammas.len() != self.depth || t.betas.len() != self.depth {
                    return bad(format!(
                        "template of depth {}/{} at {} dB, header depth = {}",
                        t.gammas.len(),
                        t.betas.len(),
                        e.snr_db,
                        self.depth
                    ));
                }
                if t.gammas.iter().chain(&t.betas).any(|v| !v.is_finite()) {
                    return bad("non-finite angle".into());
                }
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> LambdaSchedule {
        LambdaSchedule::from_array(self.lambda)
    }

    pub fn grid(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.snr_db).collect()
    }

    /// Templates of the nearest grid point; ties go to the lower SNR.
    pub fn lookup(&self, rho: f64) -> Result<&[Template]> {
        let mut best: Option<&BankEntry> = None;
        for e in &self.entries {
            best = match best {
                None => Some(e),
                Some(b) => {
                    let (db, de) = ((b.snr_db - rho).abs(), (e.snr_db - rho).abs());
                    if de < db || (de == db && e.snr_db < b.snr_db) {
                        Some(e)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best.map(|e| e.templates.as_slice())
            .ok_or_else(|| Error::Bank("empty bank".into()))
    }
}

/// Offline construction settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankConfig {
    pub nt: usize,
    pub nr: usize,
    pub modulation: Modulation,
    pub block_size: usize,
    pub depth: usize,
    pub k_temp: usize,
    pub n_ref: usize,
    pub snr_grid: Vec<f64>,
    pub schedule: LambdaSchedule,
    pub budget: TrainBudget,
    pub master_seed: u64,
}

impl BankConfig {
    pub fn table1() -> Self {
        BankConfig {
            nt: 16,
            nr: 16,
            modulation: Modulation::Qam16,
            block_size: 2,
            depth: 4,
            k_temp: 4,
            n_ref: 32,
            snr_grid: (0..=15).map(|i| 2.0 * i as f64).collect(),
            schedule: LambdaSchedule::TABLE1,
            budget: TrainBudget::OFFLINE,
            master_seed: 2024,
        }
    }

    pub fn qubits(&self) -> usize {
        self.block_size * self.modulation.bits_per_symbol()
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_grid.is_empty() {
            return Err(Error::Config("empty SNR grid".into()));
        }
        if self.n_ref < self.k_temp || self.k_temp == 0 {
            return Err(Error::Config(format!(
                "need n_ref ({}) >= k_temp ({}) >= 1",
                self.n_ref, self.k_temp
            )));
        }
        if self.block_size == 0 || self.block_size > self.nt || self.nr < self.nt {
            return Err(Error::Config(format!(
                "block size {} with {}x{} antennas",
                self.block_size, self.nr, self.nt
            )));
        }
        if self.depth == 0 {
            return Err(Error::Config("depth must be >= 1".into()));
        }
        Ok(())
    }
}

/// Draws one reference block problem at `snr_db`: a random full-size block
/// of a fresh channel use, conditioned on the true transmitted suffix.
/// Problems with a flat cost are redrawn.
pub fn reference_problem(cfg: &BankConfig, snr_db: f64, rng: &mut RngStream) -> Result<CostVector> {
    for _ in 0..MAX_REDRAWS {
        let inst = generate_instance(cfg.nt, cfg.nr, cfg.modulation, snr_db, rng)?;
        let plan = preprocess(&inst.h, &inst.y, cfg.block_size)?;
        let full: Vec<usize> = (0..plan.num_blocks())
            .filter(|&l| plan.block_sizes[l] == cfg.block_size)
            .collect();
        let ell = full[rng.gen_range(0..full.len())];
        let z_true = plan.permute(&inst.x);
        let range = plan.block_range(ell);
        let y_bar = block_observation(&plan, ell, &z_true[range.end..])?;
        let anchor = plan.permute(&mmse_hard(&inst.h, &inst.y, inst.sigma2, cfg.modulation)?);
        let prob = BlockProblem::new(
            ell,
            y_bar,
            plan.diag_block(ell),
            Some(anchor[range].to_vec()),
            cfg.schedule.lambda(snr_db),
            cfg.modulation,
        )?;
        let cost = block_cost_vector(&prob)?;
        if cost.max() - cost.min() > GAP_EPS {
            return Ok(cost);
        }
    }
    Err(Error::Bank("could not draw a non-degenerate reference problem".into()))
}

/// `(F(theta) - min c) / (max c - min c + eps)`
pub fn normalized_gap(params: &QaoaParams, cost: &CostVector) -> f64 {
    let (lo, hi) = (cost.min(), cost.max());
    (expectation(cost, params) - lo) / (hi - lo + GAP_EPS)
}

/// Mean normalized gap of one angle vector over a set of problems.
pub fn mean_gap(params: &QaoaParams, costs: &[CostVector]) -> f64 {
    costs.iter().map(|c| normalized_gap(params, c)).sum::<f64>() / costs.len() as f64
}

/// Picks the `k` lowest-scoring parameter vectors, best first; ties keep
/// the earlier index.
pub fn select_templates(trained: &[QaoaParams], costs: &[CostVector], k: usize) -> Vec<Template> {
    let mut scored: Vec<(usize, f64)> = trained
        .par_iter()
        .map(|p| mean_gap(p, costs))
        .enumerate()
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    scored
        .into_iter()
        .take(k)
        .map(|(i, score)| Template {
            gammas: trained[i].gammas.clone(),
            betas: trained[i].betas.clone(),
            score,
        })
        .collect()
}

/// Reference problems for grid point `grid_index`, drawn from the bank
/// stream family `family` (0 is the training set).
pub fn reference_set(cfg: &BankConfig, grid_index: usize, family: u64, count: usize) -> Result<Vec<CostVector>> {
    let snr = cfg.snr_grid[grid_index];
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::derive(cfg.master_seed, &[BANK_STREAM, family, grid_index as u64, i as u64]);
            reference_problem(cfg, snr, &mut rng)
        })
        .collect()
}

/// Builds a template bank.
pub fn build_bank(cfg: &BankConfig) -> Result<TemplateBank> {
    cfg.validate()?;
    let mut entries = Vec::with_capacity(cfg.snr_grid.len());
    for (g, &snr) in cfg.snr_grid.iter().enumerate() {
        let costs = reference_set(cfg, g, 0, cfg.n_ref)?;
        let trained: Vec<QaoaParams> = costs
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let mut rng = RngStream::derive(cfg.master_seed, &[BANK_STREAM, u64::MAX, g as u64, i as u64]);
                direct_train(c, cfg.depth, cfg.budget, &mut rng).map(|t| t.params)
            })
            .collect::<Result<_>>()?;
        entries.push(BankEntry {
            snr_db: snr,
            templates: select_templates(&trained, &costs, cfg.k_temp),
        });
    }
    let bank = TemplateBank {
        version: BANK_VERSION,
        depth: cfg.depth,
        qubits: cfg.qubits(),
        block_size: cfg.block_size,
        modulation: cfg.modulation,
        k_temp: cfg.k_temp,
        lambda: cfg.schedule.as_array(),
        master_seed: cfg.master_seed,
        n_ref: cfg.n_ref,
        offline_budget: Some(cfg.budget),
        entries,
    };
    bank.validate()?;
    Ok(bank)
}

pub fn save_bank(bank: &TemplateBank, path: impl AsRef<Path>) -> Result<()> {
    bank.validate()?;
    let mut s = serde_json::to_string_pretty(bank)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn load_bank(path: impl AsRef<Path>) -> Result<TemplateBank> {
    let text = fs::read_to_string(path)?;
    let bank: TemplateBank = serde_json::from_str(&text).map_err(|e| Error::Bank(format!("malformed file: {e}")))?;
    bank.validate()?;
    Ok(bank)
}
