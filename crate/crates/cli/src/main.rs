//! hecke-virt: batch front end for coset combinatorics, Hecke traces, block
//! Hecke matrices and character estimates.  Output is JSON (schema 1).

mod commands;
mod config;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hecke_core::HeckeError;

use config::{RunArgs, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "hecke-virt", version, about = "Hecke operators on discrete-series traces for PSL(2,Z) in PGL(2,Z[1/p])")]
struct Cli {
    #[command(flatten)]
    args: RunArgs,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Right coset transversal of the level, and the double coset of --sigma
    Cosets,
    /// Product of two Hecke classes: e, Tp, Tp^m or an exponent m
    HeckeMul { a: String, b: String },
    /// Scalar trace of the Hecke operator of --sigma at --level
    Trace,
    /// Block Hecke matrix on the Galerkin basis
    Matrix,
    /// Character estimate along the levels Γ(p^k)
    Character {
        #[arg(long, default_value_t = 4)]
        k_max: u32,
        /// height bound for the per-level sums (0 reports prefactors only)
        #[arg(long, default_value_t = 20)]
        level_height: u64,
    },
    /// Run the invariant suite
    Verify,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Budget(String),
    Verify(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Budget(_) => 3,
            Failure::Verify(_) => 4,
            Failure::Numeric(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Budget(m) | Failure::Verify(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<HeckeError> for Failure {
    fn from(e: HeckeError) -> Self {
        let m = e.to_string();
        match e {
            HeckeError::Config(_)
            | HeckeError::InvalidWeight(_)
            | HeckeError::InvalidPoint(_)
            | HeckeError::NotInGroup(_)
            | HeckeError::BadDenominator(_)
            | HeckeError::NegativeDeterminant
            | HeckeError::NonHyperbolic
            | HeckeError::NotSplit
            | HeckeError::NontrivialStabilizer => Failure::Config(m),
            HeckeError::BudgetExceeded(_) => Failure::Budget(m),
            HeckeError::SingularMatrix
            | HeckeError::NonConvergence(_)
            | HeckeError::QuadratureFailure(_)
            | HeckeError::IllConditioned(_)
            | HeckeError::Overflow(_) => Failure::Numeric(m),
        }
    }
}

/// The JSON document plus whether every check in it passed.
pub struct Report {
    pub doc: serde_json::Value,
    pub ok: bool,
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Report, Failure> {
    match cmd {
        Command::Cosets => commands::cosets(cfg),
        Command::HeckeMul { a, b } => commands::hecke_mul(cfg, a, b),
        Command::Trace => commands::trace(cfg),
        Command::Matrix => commands::matrix(cfg),
        Command::Character { k_max, level_height } => commands::character(cfg, *k_max, *level_height),
        Command::Verify => commands::verify(cfg),
    }
}

#[cfg(feature = "parallel")]
fn run_with_threads(cmd: &Command, cfg: &RunConfig) -> Result<Report, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        b = b.num_threads(t);
    }
    let pool = b.build().map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cmd, cfg))
}

#[cfg(not(feature = "parallel"))]
fn run_with_threads(cmd: &Command, cfg: &RunConfig) -> Result<Report, Failure> {
    // a sequential build runs on the calling thread whatever --threads says
    let _ = cfg.threads;
    dispatch(cmd, cfg)
}

fn emit(cfg: &RunConfig, doc: &serde_json::Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(doc).map_err(|e| Failure::Numeric(e.to_string()))?;
    text.push('\n');
    match &cfg.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Failure::Config(e.to_string()))
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = RunConfig::from_args(&cli.args)?;
    let rep = run_with_threads(&cli.cmd, &cfg)?;
    emit(&cfg, &rep.doc)?;
    if !rep.ok {
        return Err(Failure::Verify("one or more checks exceeded their budget".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message().replace('\n', " "));
            ExitCode::from(f.code())
        }
    }
}
