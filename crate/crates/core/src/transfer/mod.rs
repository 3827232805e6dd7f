//! QAOA local block solvers: parameter transfer from an SNR-indexed
//! template bank, and per-block direct training.

pub mod bank;

pub use bank::{build_bank, load_bank, save_bank, BankConfig, BankEntry, Template, TemplateBank};

use std::collections::BTreeMap;

use crate::constellation::{index_spins, lex_key};
use crate::error::{Error, Result};
use crate::model::linalg::C64;
use crate::model::RngStream;
use crate::objective::{extract_hubo, BlockProblem};
use crate::qaoa::{build_cost_vector, direct_train, run_ansatz, sample_state, CostVector, QaoaParams, TrainBudget};

/// One distinct local solution proposed by a block solver.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCandidate {
    /// Computational basis index of the spin string.
    pub index: usize,
    pub spins: Vec<i8>,
    pub symbols: Vec<C64>,
    /// Adopted local cost, recomputed from the symbols.
    pub exact_metric: f64,
    /// Empirical sampling frequency; 0 for non-sampling solvers.
    pub freq: f64,
}

impl LocalCandidate {
    pub fn new(prob: &BlockProblem, index: usize, freq: f64) -> Self {
        let symbols = prob.symbols_of_index(index);
        LocalCandidate {
            index,
            spins: index_spins(index, prob.q()),
            exact_metric: prob.cost_of_symbols(&symbols),
            symbols,
            freq,
        }
    }
}

/// Local candidate list plus the work spent producing it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocalList {
    pub candidates: Vec<LocalCandidate>,
    /// Fixed-parameter ansatz preparations used for sampling.
    pub qaoa_inferences: usize,
    /// QAOA objective evaluations spent in online training.
    pub optimizer_evals: usize,
}

/// Sorts by `(exact_metric, lexicographic spin string)` and keeps `t`.
pub fn rank_candidates(mut cands: Vec<LocalCandidate>, q: usize, t: usize) -> Vec<LocalCandidate> {
    cands.sort_by(|a, b| {
        a.exact_metric
            .total_cmp(&b.exact_metric)
            .then(lex_key(a.index, q).cmp(&lex_key(b.index, q)))
    });
    cands.truncate(t);
    cands
}

/// Cost Hamiltonian diagonal of a block problem.
pub fn block_cost_vector(prob: &BlockProblem) -> Result<CostVector> {
    build_cost_vector(&extract_hubo(prob)?)
}

/// Samples the ansatz and merges distinct outcomes into `pool`, keeping
/// the largest frequency seen for each.
fn sample_into(
    cost: &CostVector,
    params: &QaoaParams,
    n_shots: usize,
    rng: &mut RngStream,
    pool: &mut BTreeMap<usize, f64>,
) {
    let psi = run_ansatz(cost, params);
    for (index, count) in sample_state(&psi, n_shots, rng) {
        let f = count as f64 / n_shots as f64;
        let e = pool.entry(index).or_insert(f);
        if f > *e {
            *e = f;
        }
    }
}

fn check_list_args(t: usize, n_shots: usize) -> Result<()> {
    if t == 0 {
        return Err(Error::Config("list width T must be >= 1".into()));
    }
    if n_shots == 0 {
        return Err(Error::Config("n_shots must be >= 1".into()));
    }
    Ok(())
}

/// Transfer realization: every stored template for the nearest SNR grid
/// point is run unchanged, the sampled candidates of all templates are
/// pooled, and the best `t` distinct ones by exact metric are kept.
pub fn solve_block_transfer(
    prob: &BlockProblem,
    bank: &TemplateBank,
    rho: f64,
    t: usize,
    n_shots: usize,
    rng: &mut RngStream,
) -> Result<LocalList> {
    check_list_args(t, n_shots)?;
    if prob.q() != bank.qubits {
        return Err(Error::Bank(format!(
            "bank is for {} qubits, block has {}",
            bank.qubits,
            prob.q()
        )));
    }
    let templates = bank.lookup(rho)?;
    if templates.is_empty() {
        return Err(Error::Bank(format!("no templates near {rho} dB")));
    }
    let cost = block_cost_vector(prob)?;
    let mut pool = BTreeMap::new();
    for tpl in templates {
        sample_into(&cost, &tpl.params(), n_shots, rng, &mut pool);
    }
    let cands = pool
        .into_iter()
        .map(|(index, f)| LocalCandidate::new(prob, index, f))
        .collect();
    Ok(LocalList {
        candidates: rank_candidates(cands, prob.q(), t),
        qaoa_inferences: templates.len(),
        optimizer_evals: 0,
    })
}

/// Direct realization: train angles for this block, then sample once.
pub fn solve_block_direct(
    prob: &BlockProblem,
    p: usize,
    t: usize,
    n_shots: usize,
    budget: TrainBudget,
    rng: &mut RngStream,
) -> Result<LocalList> {
    check_list_args(t, n_shots)?;
    let cost = block_cost_vector(prob)?;
    let trained = direct_train(&cost, p, budget, rng)?;
    let mut pool = BTreeMap::new();
    sample_into(&cost, &trained.params, n_shots, rng, &mut pool);
    let cands = pool
        .into_iter()
        .map(|(index, f)| LocalCandidate::new(prob, index, f))
        .collect();
    Ok(LocalList {
        candidates: rank_candidates(cands, prob.q(), t),
        qaoa_inferences: 1,
        optimizer_evals: trained.evals,
    })
}
