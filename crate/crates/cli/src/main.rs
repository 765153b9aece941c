//! `rblab`: Model RB instances, solving, flips, encoding, analytics and
//! experiments from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use rblab::Error;

const EXIT_DOMAIN: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_USAGE: u8 = 64;

const AFTER_HELP: &str = "\
Exit status: 0 success, 1 domain error, 2 node/clause/attempt budget exhausted,
3 infeasible parameters (check-params), 64 usage error.

--config FILE reads a flat TOML table whose keys are the long flag names of the
subcommand (for example `n = 8` or `r-values = [1.0, 1.5]`). Flags given on the
command line win over the file; a flag repeated on the command line keeps its
last value. Unknown keys are rejected.

RBLAB_NODE_BUDGET overrides the solver node budget.";

#[derive(Parser, Debug)]
#[command(name = "rblab", version, about = "Model RB random CSP toolkit", after_help = AFTER_HELP)]
pub struct Cli {
    /// TOML file of flag values for the subcommand
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for experiments; results do not depend on it
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    /// Format of written records
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SolveMode {
    /// Stop at the first solution
    Decide,
    /// Count every solution
    Count,
    /// Stop after a second solution
    Unique,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Original,
    Symmetric,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DirectionArg {
    SatToUnsat,
    UnsatToSat,
}

/// Model parameters shared by the generating subcommands.
#[derive(Args, Debug, Clone, Copy)]
pub struct Model {
    /// Number of variables
    #[arg(long)]
    n: usize,
    /// Domain exponent, d = round(n^alpha)
    #[arg(long)]
    alpha: f64,
    /// Constraint arity
    #[arg(long)]
    k: usize,
    /// Tightness, the forbidden fraction of each constraint
    #[arg(long)]
    p: f64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate an instance file
    Gen {
        #[command(flatten)]
        model: Model,
        /// Constraint density, m = round(r n ln d)
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = VariantArg::Original)]
        variant: VariantArg,
        /// Instance file to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an instance
    Solve {
        /// Instance file
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = SolveMode::Decide)]
        mode: SolveMode,
        /// Also write the result here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count the solutions of an instance
    Count {
        /// Instance file
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Also write the result here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply the tuple-swap flip to a binary instance
    Flip {
        /// Instance file
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        /// Constraint to repair (1-based, unsat-to-sat only); scanned in order if absent
        #[arg(long)]
        u: Option<usize>,
        /// Flipped instance file to write
        #[arg(long)]
        out: PathBuf,
        /// Certificate file to write
        #[arg(long, value_name = "FILE")]
        cert: PathBuf,
    },
    /// Find or count near-misses at one constraint
    NearMiss {
        /// Instance file
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Constraint index (1-based)
        #[arg(long)]
        u: usize,
        /// Count every near-miss instead of finding one
        #[arg(long)]
        count: bool,
    },
    /// Pr[SAT] against r
    Sweep {
        #[command(flatten)]
        model: Model,
        /// Explicit r values; overrides --from/--to/--steps
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        r_values: Option<Vec<f64>>,
        /// First r as a multiple of the critical r
        #[arg(long, default_value_t = 0.6)]
        from: f64,
        /// Last r as a multiple of the critical r
        #[arg(long, default_value_t = 1.8)]
        to: f64,
        /// Number of evenly spaced r values
        #[arg(long, default_value_t = 13)]
        steps: usize,
        /// Instances per r
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Records file to write
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flip experiment at the calibrated r
    FlipExp {
        #[command(flatten)]
        model: Model,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        /// Flips to collect
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report file to write
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// How often every variable lies in a self-unsatisfiable constraint
    CoverageExp {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        r: f64,
        /// UNSAT instances to collect
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report file to write
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic moments at a model point
    Moments {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        r: f64,
        /// Real-valued d and m with independent tuple pairs, instead of the rounded generator
        #[arg(long)]
        ideal: bool,
        /// Print only this field (dotted path, e.g. degree.prob_bound)
        #[arg(long)]
        quantity: Option<String>,
        /// Report file to write
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the parameter requirements
    CheckParams {
        #[command(flatten)]
        model: Model,
        /// Report file to write
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Log-encode an instance as DIMACS CNF
    Encode {
        /// Instance file
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// DIMACS file to write
        #[arg(long)]
        out: PathBuf,
        /// Refuse encodings with more clauses than this
        #[arg(long, default_value_t = rblab::satenc::DEFAULT_CLAUSE_BUDGET)]
        clause_budget: u64,
    },
}

pub enum Failure {
    Usage(String),
    Run(Error),
    /// check-params output for a point that fails some requirement.
    Infeasible(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BudgetExceeded { .. } | Error::Size { .. } | Error::SamplingExhausted { .. } => EXIT_BUDGET,
        _ => EXIT_DOMAIN,
    }
}

fn parse(argv: Vec<String>) -> Result<Cli, ExitCode> {
    let cmd = Cli::command()
        .args_override_self(true)
        .mut_subcommands(|s| s.args_override_self(true));
    let argv = match config::expand(&cmd, argv) {
        Ok(a) => a,
        Err(config::ConfigError(msg)) => {
            eprintln!("error: {msg}");
            return Err(ExitCode::from(EXIT_USAGE));
        }
    };
    let matches = cmd.try_get_matches_from(argv).map_err(|e| {
        let _ = e.print();
        if e.use_stderr() {
            ExitCode::from(EXIT_USAGE)
        } else {
            ExitCode::SUCCESS
        }
    })?;
    Cli::from_arg_matches(&matches).map_err(|e| {
        let _ = e.print();
        ExitCode::from(EXIT_USAGE)
    })
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args().collect()) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    match commands::run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Infeasible(table)) => {
            println!("{table}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
