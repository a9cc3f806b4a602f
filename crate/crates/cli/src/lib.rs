//! Command-line pipeline: collect data from a plant, synthesize a certificate
//! from the data alone, recheck it and verify it in closed loop.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod demo;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use deltaiss::synthesis::SynthesisError;
use thiserror::Error;

pub use config::{DataSpec, DictionarySpec, PlantFile, RunConfig, SynthesisSpec, VerifySpec};

/// Failure classes with stable process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data are not rich enough: {0}")]
    Richness(String),
    #[error("no certificate: {0}")]
    Infeasible(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Richness(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::RankPreconditionViolated(r) => CliError::Richness(format!(
                "lifted data ranks {:?} but the dictionary needs rank {} (the input must excite every monomial){}",
                r.ranks,
                r.required_rank,
                r.note.map(|n| format!("; {n}")).unwrap_or_default()
            )),
            SynthesisError::SdpInfeasible { .. } | SynthesisError::NumericalFailure(_) => CliError::Infeasible(e.to_string()),
            SynthesisError::VerificationFailed(_) => CliError::Verification(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<deltaiss::verify::VerifyError> for CliError {
    fn from(e: deltaiss::verify::VerifyError) -> Self {
        use deltaiss::verify::VerifyError as V;
        match e {
            V::Io(io) => CliError::Io(io),
            V::Synthesis(s) => s.into(),
            V::MissingRhoBound | V::Dimension(_) | V::Plant(_) => CliError::Config(e.to_string()),
            V::Csv(c) => CliError::Config(c.to_string()),
        }
    }
}

impl From<deltaiss::plant::PlantError> for CliError {
    fn from(e: deltaiss::plant::PlantError) -> Self {
        match e {
            deltaiss::plant::PlantError::Io(io) => CliError::Io(io),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "deltaiss", version, about = "Data-driven incremental ISS controller synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Run directory; overrides `output` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite existing artifacts.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the plant twice under one input and write the data bundle.
    Collect {
        #[command(flatten)]
        common: Common,
        /// Excitation seed; overrides `data.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Solve for a certificate from a data bundle. Never reads the plant file.
    Synthesize {
        #[command(flatten)]
        common: Common,
        /// Data bundle directory; defaults to `<out>/data`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Recheck a certificate against its data, then simulate closed-loop pairs.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        certificate: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Seed for the initial-state draws; overrides `verify.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Draw x0 in [0, 2e4]^n and x0~ in [-2e4, 0)^n.
        #[arg(long = "paper-range")]
        split_range: bool,
        /// Upper bound on ||B||, needed when the two reference inputs differ.
        #[arg(long = "B-norm-bound", alias = "b-norm-bound")]
        b_norm_bound: Option<f64>,
        #[arg(long)]
        pairs: Option<usize>,
    },
    /// Recompute every certificate condition from the raw data.
    Recheck {
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Collect, synthesize and verify on the builtin rigid spacecraft.
    DemoSpacecraft {
        #[arg(long, default_value = "demo-run")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of samples per trajectory.
        #[arg(long, default_value_t = 300)]
        samples: usize,
        #[arg(long = "paper-range")]
        split_range: bool,
        #[arg(long)]
        pairs: Option<usize>,
    },
}

/// Runs a parsed command; the returned text is a short human summary.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Collect { common, seed, samples } => commands::collect(&common, seed, samples),
        Command::Synthesize { common, data } => commands::synthesize(&common, data),
        Command::Verify {
            common,
            certificate,
            data,
            seed,
            split_range,
            b_norm_bound,
            pairs,
        } => commands::verify(
            &common,
            &commands::VerifyArgs {
                certificate,
                data,
                seed,
                split_range,
                b_norm_bound,
                pairs,
            },
        ),
        Command::Recheck { certificate, data, tol } => commands::recheck(&certificate, &data, tol),
        Command::DemoSpacecraft {
            out,
            force,
            seed,
            samples,
            split_range,
            pairs,
        } => demo::run(&demo::DemoArgs {
            out,
            force,
            seed,
            samples,
            split_range,
            pairs,
        })
        .map(|s| s.render()),
    }
}
