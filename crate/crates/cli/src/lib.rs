//! Command-line front end for the `ltvdiss` analyses.
//!
//! Every command prints a report whose `key=value` block comes first and
//! exits with 0 (holds / success), 1 (property fails), 2 (input or usage
//! error) or 3 (numerical failure).

pub mod config;
pub mod report;

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{load_system, Config, ParseError};
pub use report::{fmt9, parse_summary, Report};

pub const EXIT_HOLDS: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ltvdiss", version, about = "Dissipativity analysis of linear time-varying systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Rocket,
    Heating,
}

/// Where the system comes from, and the grid and tolerances to use.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Config file with a [system] section (and optionally [storage],
    /// [grid], [tolerances], [input], [ph]).
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Config file whose [storage] section overrides the one in --system.
    #[arg(long)]
    pub storage: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "system")]
    pub preset: Option<Preset>,
    /// Rocket mass m(t).
    #[arg(long, default_value = "2 - t")]
    pub m: String,
    /// Heating production flow q_p(t).
    #[arg(long, default_value = "1")]
    pub qp: String,
    /// Heating demand flow q_d(t).
    #[arg(long, default_value = "1")]
    pub qd: String,
    /// Heating total volume.
    #[arg(long, default_value_t = 2.0)]
    pub vs: f64,
    /// Heating initial hot-layer volume.
    #[arg(long, default_value_t = 1.0)]
    pub vh0: f64,
    /// Preset domain `lo:hi`; defaults to the grid interval.
    #[arg(long)]
    pub domain: Option<String>,
    /// `a:b:n`, shorthand for --interval a:b --nodes n.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub interval: Option<String>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub kyp_tol: Option<f64>,
    #[arg(long)]
    pub psd_tol: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Directory for CSV and config artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Input signal and initial state; default to zero.
#[derive(Debug, Clone, Args)]
pub struct Signal {
    /// Input u(t): an expression, or a JSON list of expressions.
    #[arg(long)]
    pub input: Option<String>,
    /// Initial state: a number, or a JSON list of numbers.
    #[arg(long)]
    pub x0: Option<String>,
}

/// Exactly one of the three transformations.
#[derive(Debug, Clone, Args)]
pub struct TransformArgs {
    /// State change x = Z(t) x̃, as a JSON matrix of expressions.
    #[arg(long, conflicts_with_all = ["v", "theta"])]
    pub z: Option<String>,
    /// Port change u = V(t) ǔ, as a JSON matrix of expressions.
    #[arg(long, conflicts_with = "theta")]
    pub v: Option<String>,
    /// Time change t = θ(t̂).
    #[arg(long, requires = "new_domain")]
    pub theta: Option<String>,
    /// Domain of t̂, `lo:hi`.
    #[arg(long)]
    pub new_domain: Option<String>,
    /// Relative threshold of the invertibility test.
    #[arg(long, default_value_t = 1e-10)]
    pub singular_tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nodewise KYP inequality for the storage Q.
    CheckKyp {
        #[command(flatten)]
        common: Common,
    },
    /// KYP inequality integrated over the interval.
    CheckIntegralKyp {
        #[command(flatten)]
        common: Common,
    },
    /// Simulates the system on the grid.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        signal: Signal,
    },
    /// Supply over the interval, and the dissipation inequality if Q is given.
    Supply {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        signal: Signal,
        /// Violation allowed in the dissipation inequality.
        #[arg(long, default_value_t = 1e-6)]
        dissipation_tol: f64,
    },
    /// Spectrum of the discretized Popov operator (nonnegative supply test).
    Popov {
        #[command(flatten)]
        common: Common,
        /// Also test dyadic subintervals down to this many halvings.
        #[arg(long, default_value_t = 0)]
        levels: u32,
    },
    /// Port-Hamiltonian representation built from a KYP solution Q.
    CanonicalPh {
        #[command(flatten)]
        common: Common,
    },
    /// Finite-horizon available storage at one state.
    AvailableStorage {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        at: f64,
        /// A number, or a JSON list of numbers.
        #[arg(long)]
        state: String,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
    },
    /// Power balance residual along a simulated trajectory.
    PowerBalance {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        signal: Signal,
        /// Largest residual per grid interval that counts as balanced.
        #[arg(long, default_value_t = 1e-6)]
        balance_tol: f64,
    },
    /// Applies a transformation and prints the transformed system.
    Transform {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        transform: TransformArgs,
    },
    /// Checks that KYP, supply and pH structure survive a transformation.
    VerifyInvariance {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        transform: TransformArgs,
        #[command(flatten)]
        signal: Signal,
        #[arg(long, default_value_t = 1e-6)]
        supply_tol: f64,
    },
    /// Reachability Gramian on the interval.
    Gramian {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    /// The inputs describe an invalid system or storage.
    #[error("{0}")]
    Input(ltvdiss::Error),
    /// The analysis itself failed.
    #[error("{0}")]
    Analysis(ltvdiss::Error),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use ltvdiss::Error as E;
        match self {
            CliError::Usage(_) | CliError::Parse(_) | CliError::Io(_) => EXIT_INPUT,
            CliError::Input(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Analysis(e) if e.is_numerical() => EXIT_NUMERICAL,
            // the analysed property is what failed
            CliError::Analysis(
                E::NotAKypSolution { .. }
                | E::A12NotZero { .. }
                | E::C2NotZero { .. }
                | E::RankNotConstant { .. }
                | E::RankIncreaseDetected { .. }
                | E::InvariantViolation { .. }
                | E::DPlusDHNotUniformlyPositive { .. },
            ) => EXIT_FAILS,
            CliError::Analysis(_) => EXIT_INPUT,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Parse(_) => "parse",
            CliError::Io(_) => "io",
            CliError::Input(_) => "input",
            CliError::Analysis(_) => "analysis",
        }
    }

    /// Structured stderr block.
    pub fn render(&self) -> String {
        let mut r = Report::default();
        r.str("status", "error")
            .str("error_kind", self.kind())
            .int("exit_code", self.exit_code() as usize);
        if let CliError::Parse(p) = self {
            r.str("file", p.file.clone()).int("line", p.line);
        }
        r.str("message", self.to_string().replace('\n', " "));
        r.render()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Outcome of one command: the report and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub code: i32,
}

pub fn run(cli: Cli) -> CliResult<Outcome> {
    commands::dispatch(cli.command)
}

/// Parses arguments, runs, prints, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_HOLDS };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(o) => {
            print!("{}", o.report.render());
            o.code
        }
        Err(e) => {
            eprint!("{}", e.render());
            e.exit_code()
        }
    }
}
