use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use bqamd::harness::{
    parse_detectors, parse_snr_range, run_sweep, summarize, write_csv, Execution, SweepConfig,
};
use bqamd::oracle::run_checks;
use bqamd::transfer::{build_bank, load_bank, save_bank};

#[derive(Parser)]
#[command(name = "bqamd", version, about = "Blockwise QAOA-aware MIMO detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER sweep and write per-(detector, SNR) records as CSV.
    Sweep {
        /// TOML sweep configuration (defaults to the built-in 16x16 preset).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV; stdout if absent and not set in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated detector ids.
        #[arg(long)]
        detectors: Option<String>,
        /// SNR grid as a:step:b (dB).
        #[arg(long)]
        snr: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        /// Template bank for the transfer detector.
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Run trials on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// Build the SNR-indexed template bank offline.
    BuildBank {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run desk-scale oracle checks and print pass/fail.
    Oracle {
        /// Instances per check.
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<SweepConfig> {
    match path {
        Some(p) => SweepConfig::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(SweepConfig::table1()),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Sweep {
            config,
            out,
            seed,
            detectors,
            snr,
            trials,
            bank,
            serial,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(d) = detectors {
                cfg.detectors = parse_detectors(&d)?;
            }
            if let Some(s) = snr {
                cfg.snr_db = parse_snr_range(&s)?;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if bank.is_some() {
                cfg.bank = bank;
            }
            if out.is_some() {
                cfg.out = out;
            }
            cfg.validate()?;
            let bank = match (&cfg.bank, cfg.needs_bank()) {
                (Some(p), true) => Some(load_bank(p).with_context(|| format!("loading bank {}", p.display()))?),
                (None, true) => bail!("the transfer detector needs --bank or `bank = ...` in the config"),
                _ => None,
            };
            let exec = if serial { Execution::Serial } else { Execution::Parallel };
            let res = run_sweep(&cfg, bank.as_ref(), exec)?;
            match &cfg.out {
                Some(p) => {
                    let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
                    let mut w = BufWriter::new(f);
                    write_csv(&res.records, &mut w)?;
                    w.flush()?;
                }
                None => write_csv(&res.records, io::stdout().lock())?,
            }
            if let Ok(rows) = summarize(&res.records) {
                for r in rows {
                    let evals: usize = res
                        .records
                        .iter()
                        .filter(|x| x.detector == r.detector)
                        .map(|x| x.optimizer_evals)
                        .sum();
                    eprintln!(
                        "{:<18} mean BER {:.4e} over {} points, optimizer evals {evals}",
                        r.detector, r.mean_ber, r.points
                    );
                }
            }
            Ok(())
        }
        Command::BuildBank { config, out, seed } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let bank = build_bank(&cfg.bank_config())?;
            save_bank(&bank, &out).with_context(|| format!("writing {}", out.display()))?;
            eprintln!(
                "wrote {} SNR entries x {} templates to {}",
                bank.entries.len(),
                bank.k_temp,
                out.display()
            );
            Ok(())
        }
        Command::Oracle { instances, seed } => {
            let results = run_checks(instances, seed)?;
            let mut failed = 0;
            for r in &results {
                println!("{} {} ({})", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                bail!("{failed} oracle check(s) failed");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
