//! Experiment orchestration: configuration, sweeps, CSV output.

pub mod config;
pub mod sweep;

pub use config::{parse_detectors, parse_snr_range, snr_range, BankParams, DetectorId, DetectorParams, SweepConfig};
pub use sweep::{
    aggregate, compare, csv_string, record, run_sweep, run_trial, summarize, write_csv, BerRecord, Decision,
    Execution, SummaryRow, SweepResult, TrialOutcome, CSV_HEADER,
};
