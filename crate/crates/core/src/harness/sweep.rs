//! Monte Carlo BER sweeps with common random numbers.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{detect_kbest_classical, detect_mf, detect_mmse};
use crate::constellation::symbols_to_bits;
use crate::detector::{detect, Counters};
use crate::error::{Error, Result};
use crate::model::linalg::{norm_sqr, C64};
use crate::model::{generate_instance, DetectionInstance, RngStream};
use crate::transfer::TemplateBank;

use super::config::{DetectorId, SweepConfig};

/// Stream tag for per-detector randomness (QAOA sampling and training).
const DETECTOR_STREAM: u64 = 0xde7e_c7;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "BQAMD_THREADS";

/// One detector's output on one channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub detector: DetectorId,
    /// Digest of the instance the detector was given.
    pub instance_digest: u64,
    pub bits: Vec<u8>,
    pub bit_errors: usize,
    /// `||y - H x_hat||^2`
    pub residual: f64,
    /// Blockwise detectors only.
    pub counters: Option<Counters>,
    pub num_blocks: usize,
}

/// All decisions for one `(snr, trial)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub snr_index: usize,
    pub trial: usize,
    pub digest: u64,
    pub tx_bits: Vec<u8>,
    pub decisions: Vec<Decision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub detector: String,
    pub snr_db: f64,
    pub trials: usize,
    pub bit_errors: usize,
    pub total_bits: usize,
    pub ber: f64,
    /// `1 / total_bits`, the single-error floor for plotting zero BER.
    pub plot_floor: f64,
    pub mean_final_ped: f64,
    pub local_calls_mean: f64,
    pub local_calls_max: usize,
    pub optimizer_evals: usize,
    pub qaoa_inferences: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<BerRecord>,
    pub outcomes: Vec<TrialOutcome>,
}

/// Execution strategy. Both produce identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// Worker count from `BQAMD_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

fn check_bank_coverage(cfg: &SweepConfig, bank: Option<&TemplateBank>) -> Result<()> {
    if !cfg.needs_bank() {
        return Ok(());
    }
    let bank = bank.ok_or_else(|| Error::Bank("transfer detector selected but no bank given".into()))?;
    let grid = bank.grid();
    for s in &cfg.snr_db {
        if !grid.iter().any(|g| g == s) {
            return Err(Error::Bank(format!("bank has no entry for {s} dB")));
        }
    }
    Ok(())
}

fn run_detector(
    id: DetectorId,
    cfg: &SweepConfig,
    inst: &DetectionInstance,
    bank: Option<&TemplateBank>,
    rng: &mut RngStream,
) -> Result<Decision> {
    let mut counters = None;
    let mut num_blocks = 0;
    let x_hat: Vec<C64> = match id {
        DetectorId::Mf => detect_mf(inst)?,
        DetectorId::Mmse => detect_mmse(inst)?,
        DetectorId::Kbest => detect_kbest_classical(inst, cfg.detector.classical_k)?,
        _ => {
            let dc = id.detector_config(&cfg.detector).expect("blockwise detector");
            let bank = if id == DetectorId::Transfer { bank } else { None };
            let d = detect(inst, &dc, bank, rng)?;
            counters = Some(d.counters);
            num_blocks = d.plan.num_blocks();
            d.x_hat
        }
    };
    let bits = symbols_to_bits(&x_hat, inst.modulation);
    let bit_errors = bits.iter().zip(&inst.tx_bits).filter(|(a, b)| a != b).count();
    let hx = inst.h.matvec(&x_hat)?;
    let r: Vec<C64> = inst.y.iter().zip(hx.iter()).map(|(a, b)| a - b).collect();
    Ok(Decision {
        detector: id,
        instance_digest: inst.digest(),
        bits,
        bit_errors,
        residual: norm_sqr(&r),
        counters,
        num_blocks,
    })
}

/// Generates the channel use for `(snr_index, trial)` and runs every
/// selected detector on it.
pub fn run_trial(
    cfg: &SweepConfig,
    bank: Option<&TemplateBank>,
    snr_index: usize,
    trial: usize,
) -> Result<TrialOutcome> {
    let snr = cfg.snr_db[snr_index];
    let mut rng = RngStream::substream(cfg.master_seed, snr_index as u64, trial as u64);
    let inst = generate_instance(cfg.nt, cfg.nr, cfg.modulation, snr, &mut rng)?;
    let decisions = cfg
        .detectors
        .iter()
        .map(|&id| {
            let mut drng = RngStream::derive(
                cfg.master_seed,
                &[DETECTOR_STREAM, id as u64, snr_index as u64, trial as u64],
            );
            run_detector(id, cfg, &inst, bank, &mut drng)
        })
        .collect::<Result<_>>()?;
    Ok(TrialOutcome {
        snr_index,
        trial,
        digest: inst.digest(),
        tx_bits: inst.tx_bits,
        decisions,
    })
}

/// Runs the full grid and aggregates one record per `(detector, snr)`.
pub fn run_sweep(cfg: &SweepConfig, bank: Option<&TemplateBank>, exec: Execution) -> Result<SweepResult> {
    cfg.validate()?;
    check_bank_coverage(cfg, bank)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.snr_db.len())
        .flat_map(|g| (0..cfg.trials).map(move |t| (g, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = match exec {
        Execution::Serial => jobs
            .iter()
            .map(|&(g, t)| run_trial(cfg, bank, g, t))
            .collect::<Result<_>>()?,
        Execution::Parallel => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = thread_cap()? {
                builder = builder.num_threads(n);
            }
            let pool = builder
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| {
                jobs.par_iter()
                    .map(|&(g, t)| run_trial(cfg, bank, g, t))
                    .collect::<Result<_>>()
            })?
        }
    };
    let records = aggregate(cfg, &outcomes);
    Ok(SweepResult { records, outcomes })
}

/// Folds trial outcomes into records, ordered by detector then SNR.
pub fn aggregate(cfg: &SweepConfig, outcomes: &[TrialOutcome]) -> Vec<BerRecord> {
    let mut records = Vec::new();
    for (di, &id) in cfg.detectors.iter().enumerate() {
        for (g, &snr) in cfg.snr_db.iter().enumerate() {
            let ds: Vec<&Decision> = outcomes
                .iter()
                .filter(|o| o.snr_index == g)
                .map(|o| &o.decisions[di])
                .collect();
            let trials = ds.len();
            let total_bits = trials * cfg.bits_per_trial();
            let bit_errors: usize = ds.iter().map(|d| d.bit_errors).sum();
            let calls = |d: &&Decision| d.counters.map_or(0, |c| c.local_calls);
            let n = trials.max(1) as f64;
            records.push(BerRecord {
                detector: id.name().to_string(),
                snr_db: snr,
                trials,
                bit_errors,
                total_bits,
                ber: if total_bits == 0 { 0.0 } else { bit_errors as f64 / total_bits as f64 },
                plot_floor: if total_bits == 0 { 0.0 } else { 1.0 / total_bits as f64 },
                mean_final_ped: ds.iter().map(|d| d.residual).sum::<f64>() / n,
                local_calls_mean: ds.iter().map(calls).sum::<usize>() as f64 / n,
                local_calls_max: ds.iter().map(calls).max().unwrap_or(0),
                optimizer_evals: ds.iter().map(|d| d.counters.map_or(0, |c| c.optimizer_evals)).sum(),
                qaoa_inferences: ds.iter().map(|d| d.counters.map_or(0, |c| c.qaoa_inferences)).sum(),
            });
        }
    }
    records
}

pub const CSV_HEADER: &str = "detector,snr_db,trials,bit_errors,total_bits,ber,plot_floor,mean_final_ped,local_calls_mean";

/// Writes records as LF-terminated CSV with shortest round-trip floats.
pub fn write_csv(records: &[BerRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.detector,
            r.snr_db,
            r.trials,
            r.bit_errors,
            r.total_bits,
            r.ber,
            r.plot_floor,
            r.mean_final_ped,
            r.local_calls_mean
        )?;
    }
    Ok(())
}

pub fn csv_string(records: &[BerRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("write to memory");
    String::from_utf8(buf).expect("ascii")
}

/// Per-detector unweighted grid mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub detector: String,
    pub mean_ber: f64,
    pub points: usize,
}

/// Averages BER over the SNR grid for every detector present. Every
/// detector must cover exactly the same set of SNR points.
pub fn summarize(records: &[BerRecord]) -> Result<Vec<SummaryRow>> {
    let mut grid: Vec<f64> = records.iter().map(|r| r.snr_db).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut names: Vec<&str> = Vec::new();
    for r in records {
        if !names.contains(&r.detector.as_str()) {
            names.push(&r.detector);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let mine: Vec<&BerRecord> = records.iter().filter(|r| r.detector == name).collect();
            let mut snrs: Vec<f64> = mine.iter().map(|r| r.snr_db).collect();
            snrs.sort_by(f64::total_cmp);
            if snrs != grid {
                return Err(Error::IncompleteGrid(format!(
                    "{name} covers {} of {} SNR points",
                    snrs.len(),
                    grid.len()
                )));
            }
            Ok(SummaryRow {
                detector: name.to_string(),
                mean_ber: mine.iter().map(|r| r.ber).sum::<f64>() / mine.len() as f64,
                points: mine.len(),
            })
        })
        .collect()
}

/// `(snr, ber_a, ber_b)` for every grid point both detectors cover.
pub fn compare(records: &[BerRecord], a: &str, b: &str) -> Vec<(f64, f64, f64)> {
    records
        .iter()
        .filter(|r| r.detector == a)
        .filter_map(|ra| {
            records
                .iter()
                .find(|rb| rb.detector == b && rb.snr_db == ra.snr_db)
                .map(|rb| (ra.snr_db, ra.ber, rb.ber))
        })
        .collect()
}

/// Looks up one record.
pub fn record<'a>(records: &'a [BerRecord], detector: &str, snr_db: f64) -> Option<&'a BerRecord> {
    records.iter().find(|r| r.detector == detector && r.snr_db == snr_db)
}
