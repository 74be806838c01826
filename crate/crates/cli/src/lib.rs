//! Command-line harness for the batch processor-sharing toolkit: model
//! constants, exact PMFs, simulation summaries, figure data and validation
//! reports. Output is CSV and JSON, deterministic in the configuration and
//! seed.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration error,
//! 3 truncation failure, 4 simulation guard.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_tolerance, ExperimentConfig, HqSource, Mode, Profile};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "batchps", version, about = "M^[X]/M/1 processor-sharing queue with geometric batches")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral constants and tail-law parameters.
    Constants(CommonArgs),
    /// Exact PMFs of M, M̃ (both routes), J and J | b, m as CSV.
    Pmf {
        #[command(flatten)]
        common: CommonArgs,
        /// Batch size of the J | b, m table.
        #[arg(long)]
        b: Option<u64>,
        /// Residual job count of the J | b, m table.
        #[arg(long)]
        m: Option<u64>,
    },
    /// Tagged-batch simulation: empirical PMFs, Ω ccdf and a JSON summary.
    Simulate(CommonArgs),
    /// Data behind the J-law and Ω-tail figures, at their fixed parameters.
    Figures {
        #[command(flatten)]
        common: CommonArgs,
        /// Figures to emit (3, 4, 5, 6); all by default.
        #[arg(long = "figure", value_delimiter = ',')]
        figures: Vec<u8>,
    },
    /// Run the invariant suite and write a validation report.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// Also rerun with a perturbed constant and require exactly one new
        /// failure.
        #[arg(long)]
        self_test: bool,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Batch arrival rate.
    #[arg(long, conflicts_with = "rho_star")]
    pub rho: Option<f64>,
    /// Load ρ/(1 − q).
    #[arg(long = "rho-star")]
    pub rho_star: Option<f64>,
    /// Geometric batch-size parameter.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tagged batches to simulate.
    #[arg(long)]
    pub replications: Option<u64>,
    /// Replication profile: fast (10⁶) or full (10⁷).
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Batches discarded at the start of a stream-mode run.
    #[arg(long)]
    pub warmup: Option<u64>,
    /// Events after which a replication is abandoned.
    #[arg(long)]
    pub event_cap: Option<u64>,
    /// Probability mass a truncated PMF may leave out.
    #[arg(long)]
    pub tail_bound: Option<f64>,
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub b_max: Option<usize>,
    /// m_max of the J law behind H_q.
    #[arg(long)]
    pub hq_m_max: Option<usize>,
    #[arg(long, value_enum)]
    pub hq_source: Option<HqSource>,
    /// Busy periods simulated alongside the tagged batches.
    #[arg(long)]
    pub busy_periods: Option<u64>,
    /// Leading records written to records.csv.
    #[arg(long)]
    pub records: Option<usize>,
    /// Replications per parallel work unit.
    #[arg(long)]
    pub chunk: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// NAME=VALUE, repeatable.
    #[arg(long = "tolerance", value_parser = parse_tolerance)]
    pub tolerance: Vec<(String, f64)>,
}

impl CommonArgs {
    /// The file (if any) overlaid with the flags.
    pub fn config(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let flags = ExperimentConfig {
            rho: self.rho,
            rho_star: self.rho_star,
            q: self.q,
            seed: self.seed,
            replications: self.replications,
            profile: self.profile,
            mode: self.mode,
            warmup: self.warmup,
            event_cap: self.event_cap,
            tail_bound: self.tail_bound,
            m_max: self.m_max,
            k_max: self.k_max,
            b_max: self.b_max,
            hq_m_max: self.hq_m_max,
            hq_source: self.hq_source,
            busy_periods: self.busy_periods,
            records: self.records,
            chunk: self.chunk,
            out: self.out.clone(),
            tolerances: self.tolerance.iter().cloned().collect(),
            ..Default::default()
        };
        Ok(base.overlay(flags))
    }
}

/// Run one parsed command line, writing human-readable output to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Constants(common) => {
            // the CSV is optional: only written when an output directory is given
            let cfg = common.config()?;
            let write_csv = cfg.out.is_some();
            commands::constants::run(&cfg.resolve(config::FAST_REPLICATIONS)?, write_csv, stdout)
        }
        Command::Pmf { common, b, m } => {
            let cfg = common.config()?.overlay(ExperimentConfig {
                b,
                m,
                ..Default::default()
            });
            commands::pmf::run(&cfg.resolve(config::FAST_REPLICATIONS)?, stdout)
        }
        Command::Simulate(common) => commands::simulate::run(&common.config()?.resolve(config::FAST_REPLICATIONS)?, stdout),
        Command::Figures { common, figures } => {
            let cfg = common.config()?.overlay(ExperimentConfig {
                figures: (!figures.is_empty()).then_some(figures),
                ..Default::default()
            });
            commands::figures::run(&cfg.resolve(config::FAST_REPLICATIONS)?, stdout)
        }
        Command::Validate { common, self_test } => {
            let s = common.config()?.resolve(commands::validate::DEFAULT_REPLICATIONS)?;
            commands::validate::run(&s, self_test, stdout)
        }
    }
}
