//! Backward blockwise K-best detection with a pluggable local block solver.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::constellation::{symbols_to_bits, Modulation};
use crate::error::{Error, Result};
use crate::model::linalg::C64;
use crate::model::{DetectionInstance, RngStream};
use crate::objective::{block_observation, mmse_hard, BlockProblem, LambdaSchedule, MAX_EXHAUSTIVE_Q};
use crate::preprocess::{preprocess, BlockPlan};
use crate::qaoa::TrainBudget;
use crate::transfer::{
    rank_candidates, solve_block_direct, solve_block_transfer, LocalCandidate, LocalList, TemplateBank,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Exhaustive,
    Direct,
    Transfer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub block_size: usize,
    pub depth: usize,
    /// Local list width `T`.
    pub list_width: usize,
    /// Retained paths `K`.
    pub k_best: usize,
    pub shots: usize,
    pub mode: SolverMode,
    /// `None` disables the MMSE-anchored penalty.
    pub regularization: Option<LambdaSchedule>,
    pub online_budget: TrainBudget,
}

impl DetectorConfig {
    /// Default experimental configuration with the given local solver.
    pub fn table1(mode: SolverMode) -> Self {
        DetectorConfig {
            block_size: 2,
            depth: 4,
            list_width: 4,
            k_best: 4,
            shots: 1024,
            mode,
            regularization: Some(LambdaSchedule::TABLE1),
            online_budget: TrainBudget::ONLINE,
        }
    }

    pub fn unregularized(mut self) -> Self {
        self.regularization = None;
        self
    }

    pub fn validate(&self, modulation: Modulation) -> Result<()> {
        if self.block_size == 0 || self.list_width == 0 || self.k_best == 0 {
            return Err(Error::Config("block size, T and K must be >= 1".into()));
        }
        let q = self.block_size * modulation.bits_per_symbol();
        if q > MAX_EXHAUSTIVE_Q {
            return Err(Error::TooManyVariables {
                q,
                max: MAX_EXHAUSTIVE_Q,
            });
        }
        if self.mode != SolverMode::Exhaustive && (self.depth == 0 || self.shots == 0) {
            return Err(Error::Config("QAOA modes need depth >= 1 and shots >= 1".into()));
        }
        Ok(())
    }
}

/// Work counters. Reported only, never used for control flow.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub local_calls: usize,
    pub qaoa_inferences: usize,
    pub optimizer_evals: usize,
    pub ped_updates: usize,
}

impl Counters {
    pub fn add(&mut self, other: &Counters) {
        self.local_calls += other.local_calls;
        self.qaoa_inferences += other.qaoa_inferences;
        self.optimizer_evals += other.optimizer_evals;
        self.ped_updates += other.ped_updates;
    }
}

/// One retained partial path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEntry {
    /// Detection-order symbols from the current block to the last.
    pub suffix: Vec<C64>,
    /// Accumulated unregularized PED.
    pub ped: f64,
    /// Accumulated adopted local cost, for instrumentation.
    pub local_cost: f64,
    bits: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Decision in antenna order.
    pub x_hat: Vec<C64>,
    /// Decision in detection order.
    pub z_hat: Vec<C64>,
    pub final_ped: f64,
    pub counters: Counters,
    /// Final frontier, best first.
    pub frontier: Vec<PathEntry>,
    pub plan: BlockPlan,
}

/// Enumerates all `2^q` assignments and keeps the best `t`.
pub fn solve_block_exhaustive(prob: &BlockProblem, t: usize) -> Result<LocalList> {
    if t == 0 {
        return Err(Error::Config("list width T must be >= 1".into()));
    }
    let q = prob.q();
    let table = prob.cost_table()?;
    // Cheap preselection on the table before materializing candidates.
    let mut idx: Vec<usize> = (0..table.len()).collect();
    idx.sort_by(|&a, &b| {
        table[a]
            .total_cmp(&table[b])
            .then(crate::constellation::lex_key(a, q).cmp(&crate::constellation::lex_key(b, q)))
    });
    idx.truncate(t);
    let cands = idx.into_iter().map(|k| LocalCandidate::new(prob, k, 0.0)).collect();
    Ok(LocalList {
        candidates: rank_candidates(cands, q, t),
        qaoa_inferences: 0,
        optimizer_evals: 0,
    })
}

fn check_bank(bank: &TemplateBank, cfg: &DetectorConfig, modulation: Modulation) -> Result<()> {
    if bank.modulation != modulation || bank.block_size != cfg.block_size || bank.depth != cfg.depth {
        return Err(Error::Bank(format!(
            "bank ({}, b = {}, p = {}) does not match detector ({modulation}, b = {}, p = {})",
            bank.modulation, bank.block_size, bank.depth, cfg.block_size, cfg.depth
        )));
    }
    Ok(())
}

/// Orders children by PED, then bit string, then parent.
fn child_order(a: &(PathEntry, usize), b: &(PathEntry, usize)) -> Ordering {
    a.0.ped
        .total_cmp(&b.0.ped)
        .then_with(|| a.0.bits.cmp(&b.0.bits))
        .then(a.1.cmp(&b.1))
}

/// Runs blockwise K-best detection on one channel use.
pub fn detect(
    inst: &DetectionInstance,
    cfg: &DetectorConfig,
    bank: Option<&TemplateBank>,
    rng: &mut RngStream,
) -> Result<Detection> {
    let modulation = inst.modulation;
    cfg.validate(modulation)?;
    let bank = match (cfg.mode, bank) {
        (SolverMode::Transfer, Some(b)) => {
            check_bank(b, cfg, modulation)?;
            Some(b)
        }
        (SolverMode::Transfer, None) => return Err(Error::Bank("transfer mode needs a template bank".into())),
        (_, Some(_)) => return Err(Error::Config("a template bank is only used in transfer mode".into())),
        (_, None) => None,
    };

    let plan = preprocess(&inst.h, &inst.y, cfg.block_size)?;
    let (lambda, anchor) = match &cfg.regularization {
        Some(s) => (
            s.lambda(inst.snr_db),
            Some(plan.permute(&mmse_hard(&inst.h, &inst.y, inst.sigma2, modulation)?)),
        ),
        None => (0.0, None),
    };

    let mut counters = Counters::default();
    let mut frontier = vec![PathEntry {
        suffix: Vec::new(),
        ped: 0.0,
        local_cost: 0.0,
        bits: Vec::new(),
    }];

    for ell in (0..plan.num_blocks()).rev() {
        let range = plan.block_range(ell);
        let r_diag = plan.diag_block(ell);
        let z_ref = anchor.as_ref().map(|a| a[range.clone()].to_vec());
        let mut children = Vec::new();
        for (k, parent) in frontier.iter().enumerate() {
            let y_bar = block_observation(&plan, ell, &parent.suffix)?;
            let prob = BlockProblem::new(ell, y_bar, r_diag.clone(), z_ref.clone(), lambda, modulation)?;
            let list = match (cfg.mode, bank) {
                (SolverMode::Transfer, Some(bank)) if prob.q() == bank.qubits => {
                    solve_block_transfer(&prob, bank, inst.snr_db, cfg.list_width, cfg.shots, rng)?
                }
                (SolverMode::Direct, _) => {
                    solve_block_direct(&prob, cfg.depth, cfg.list_width, cfg.shots, cfg.online_budget, rng)?
                }
                // Exhaustive mode, or a residual block the bank cannot serve.
                _ => solve_block_exhaustive(&prob, cfg.list_width)?,
            };
            counters.local_calls += 1;
            counters.qaoa_inferences += list.qaoa_inferences;
            counters.optimizer_evals += list.optimizer_evals;
            for c in list.candidates {
                let delta = prob.ped(&c.symbols);
                counters.ped_updates += 1;
                let mut suffix = c.symbols.clone();
                suffix.extend_from_slice(&parent.suffix);
                let mut bits = symbols_to_bits(&c.symbols, modulation);
                bits.extend_from_slice(&parent.bits);
                children.push((
                    PathEntry {
                        suffix,
                        ped: parent.ped + delta,
                        local_cost: parent.local_cost + c.exact_metric,
                        bits,
                    },
                    k,
                ));
            }
        }
        if children.is_empty() {
            return Err(Error::Config(format!("no candidates at block {ell}")));
        }
        children.sort_by(child_order);
        children.truncate(cfg.k_best);
        frontier = children.into_iter().map(|(p, _)| p).collect();
    }

    let best = &frontier[0];
    Ok(Detection {
        x_hat: plan.unpermute(&best.suffix),
        z_hat: best.suffix.clone(),
        final_ped: best.ped,
        counters,
        frontier,
        plan,
    })
}

/// `1 + (L - 1) K`
pub fn local_call_bound(num_blocks: usize, k: usize) -> usize {
    1 + num_blocks.saturating_sub(1) * k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_instance;

    fn instance(nt: usize, snr: f64, seed: u64) -> DetectionInstance {
        generate_instance(nt, nt, Modulation::Qam16, snr, &mut RngStream::new(seed)).unwrap()
    }

    #[test]
    fn exhaustive_list_sorted_and_distinct() {
        let inst = instance(4, 10.0, 1);
        let cfg = DetectorConfig::table1(SolverMode::Exhaustive);
        let d = detect(&inst, &cfg, None, &mut RngStream::new(0)).unwrap();
        assert_eq!(d.x_hat.len(), 4);
        for w in d.frontier.windows(2) {
            assert!(w[0].ped <= w[1].ped);
        }
        assert!(d.counters.local_calls <= local_call_bound(2, 4));
        assert_eq!(d.counters.optimizer_evals, 0);
    }

    #[test]
    fn noiseless_recovers_transmission() {
        let inst = instance(8, 80.0, 3);
        let cfg = DetectorConfig::table1(SolverMode::Exhaustive);
        let d = detect(&inst, &cfg, None, &mut RngStream::new(0)).unwrap();
        for (a, b) in d.x_hat.iter().zip(inst.x.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn final_ped_matches_residual() {
        let inst = instance(6, 12.0, 9);
        let cfg = DetectorConfig::table1(SolverMode::Exhaustive);
        let d = detect(&inst, &cfg, None, &mut RngStream::new(0)).unwrap();
        let hx = inst.h.matvec(&d.x_hat).unwrap();
        let r: f64 = inst.y.iter().zip(hx.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert!((r - d.final_ped).abs() < 1e-8, "{r} vs {}", d.final_ped);
    }

    #[test]
    fn mode_and_bank_must_agree() {
        let inst = instance(4, 10.0, 1);
        let cfg = DetectorConfig::table1(SolverMode::Transfer);
        assert!(detect(&inst, &cfg, None, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn residual_block_handled() {
        let inst = instance(5, 14.0, 4);
        let cfg = DetectorConfig::table1(SolverMode::Exhaustive);
        let d = detect(&inst, &cfg, None, &mut RngStream::new(0)).unwrap();
        assert_eq!(d.plan.block_sizes, vec![2, 2, 1]);
        assert_eq!(d.x_hat.len(), 5);
    }
}
