//! `qrecon`: verification suites and demo pipelines with machine-readable reports.
//!
//! Exit status: 0 when every check passes, 1 on a failed check or computation
//! error, 2 on a usage error.

mod chain_demo;
mod output;
mod petz_demo;
mod povm_check;
mod selector_check;
mod sweep;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qrecon::Error;

use chain_demo::{Expectation, SchemeName};
use output::{Format, Report, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "qrecon", version, about = "Reconstruction and recovery checks for matrices and quantum states")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, env = "QRECON_SEED", default_value_t = 0)]
    seed: u64,
    /// Relative tolerance for numerical rank decisions.
    #[arg(long, global = true, env = "QRECON_RTOL", default_value_t = qrecon::linalg::DEFAULT_RTOL)]
    rtol: f64,
    /// Tolerance on mutual-information equalities, in bits.
    #[arg(long, global = true, env = "QRECON_MI_TOL", default_value_t = 1e-8)]
    mi_tol: f64,
    /// Trace distance below which a recovered state counts as exact.
    #[arg(long, global = true, env = "QRECON_TRACE_TOL", default_value_t = 1e-8)]
    trace_tol: f64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, env = "QRECON_OUT")]
    out: Option<PathBuf>,
    /// Report format; matrix-sweep defaults to csv, everything else to json.
    #[arg(long, global = true, env = "QRECON_FORMAT", value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Seven four-party states: rank and information quantities, and conditions C1-C4.
    VerifyTable,
    /// Truncated pseudoskeleton reconstruction against its error bounds.
    MatrixSweep {
        /// Number of random instances.
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 12)]
        max_dim: usize,
        #[arg(long, default_value_t = 4)]
        max_rank: usize,
    },
    /// Run a chain pipeline on a named state.
    ChainDemo {
        /// State family: ghz, ghz@<alpha>, cghz, w, addstate, sigma+, sigma-.
        #[arg(long)]
        state: String,
        #[arg(long, value_enum)]
        scheme: SchemeName,
        /// Number of sites.
        #[arg(long, default_value_t = 6)]
        n: usize,
        /// Override the expected outcome.
        #[arg(long, value_enum)]
        expect: Option<Expectation>,
    },
    /// Petz recovery identities on random channels and bipartite recovery examples.
    PetzDemo {
        #[arg(long, default_value_t = 100)]
        pairs: usize,
    },
    /// POVMs that determine the outputs of random linear maps.
    PovmCheck {
        #[arg(long, default_value_t = 50)]
        maps: usize,
        #[arg(long, default_value_t = 5)]
        states: usize,
    },
    /// Selector-based reconstruction after long-range Petz recovery.
    SelectorCheck {
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Number of random Markov chains added to the fixed examples.
        #[arg(long, default_value_t = 3)]
        markov: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyTable => "verify-table",
            Command::MatrixSweep { .. } => "matrix-sweep",
            Command::ChainDemo { .. } => "chain-demo",
            Command::PetzDemo { .. } => "petz-demo",
            Command::PovmCheck { .. } => "povm-check",
            Command::SelectorCheck { .. } => "selector-check",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::MatrixSweep { .. } => Format::Csv,
            _ => Format::Json,
        }
    }
}

fn is_usage_error(e: &Error) -> bool {
    matches!(e, Error::InvalidArgument(_))
}

fn dispatch(cfg: &RunConfig, command: &Command) -> qrecon::Result<Report> {
    match command {
        Command::VerifyTable => table::run(cfg),
        Command::MatrixSweep {
            count,
            max_dim,
            max_rank,
        } => sweep::run(
            cfg,
            &sweep::SweepParams {
                count: *count,
                max_dim: *max_dim,
                max_rank: *max_rank,
            },
        ),
        Command::ChainDemo { state, scheme, n, expect } => {
            let named = chain_demo::parse_state(state, *n)?;
            chain_demo::run(cfg, named, *scheme, *expect)
        }
        Command::PetzDemo { pairs } => petz_demo::run(cfg, *pairs),
        Command::PovmCheck { maps, states } => povm_check::run(cfg, *maps, *states),
        Command::SelectorCheck { n, markov } => selector_check::run(cfg, *n, *markov),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = RunConfig {
        command: cli.command.name(),
        seed: cli.seed,
        rtol: cli.rtol,
        mi_tol: cli.mi_tol,
        trace_tol: cli.trace_tol,
    };
    let report = match dispatch(&cfg, &cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("qrecon {}: {e}", cfg.command);
            return ExitCode::from(if is_usage_error(&e) { 2 } else { 1 });
        }
    };
    let format = cli.format.unwrap_or_else(|| cli.command.default_format());
    if let Err(e) = output::emit(&cfg, &report, format, cli.out.as_deref()) {
        eprintln!("qrecon {}: cannot write report: {e}", cfg.command);
        return ExitCode::from(1);
    }
    eprintln!("{} {}: {}", cfg.command, if report.pass { "PASS" } else { "FAIL" }, report.summary);
    ExitCode::from(if report.pass { 0 } else { 1 })
}
