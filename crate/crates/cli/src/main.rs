use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rnl_core::rng::DEFAULT_SEED;
use rnl_core::Error;

mod commands;

/// Ricci negative metrics on solvable extensions of nilpotent Lie algebras.
///
/// ALGEBRA is a corpus name (`heisenberg:5`, `tricky5`, see `rnl corpus`) or
/// a path to a JSON algebra file. Matrices and vectors are JSON arrays whose
/// entries are numbers or "p/q" strings. Numbers in JSON output are strings
/// with 17 significant digits; exact rationals are "p/q".
///
/// Exit codes: 0 success, 1 usage or input error, 2 precondition failure,
/// 3 unknown or inconclusive, 4 numerical failure.
#[derive(Parser, Debug)]
#[command(name = "rnl", version, max_term_width = 100)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, env = "RNL_SEED")]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct AlgebraArg {
    /// Corpus name or algebra file.
    #[arg(long, short = 'a', value_name = "ALGEBRA")]
    pub algebra: String,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Ricci operator of the solvable extension by a derivation (JSON), or of
    /// the nilpotent metric when no derivation is given.
    Ricci {
        #[command(flatten)]
        algebra: AlgebraArg,
        /// Derivation: a diagonal vector or a square matrix.
        #[arg(long, short = 'd')]
        derivation: Option<String>,
    },
    /// Basis of the derivation algebra, row-major matrices (JSON).
    Derivations {
        #[command(flatten)]
        algebra: AlgebraArg,
    },
    /// Diagonal torus, its weights and the orthogonal Weyl group (JSON).
    Torus {
        #[command(flatten)]
        algebra: AlgebraArg,
    },
    /// Nice-basis test with the violated conditions (JSON).
    Nice {
        #[command(flatten)]
        algebra: AlgebraArg,
    },
    /// Moment map value, optionally at `h . mu` (JSON).
    Moment {
        #[command(flatten)]
        algebra: AlgebraArg,
        /// Invertible basis change h.
        #[arg(long)]
        basis_change: Option<String>,
    },
    /// Convex hull of the weights F_ij^k: vertices, facets, f-vector (JSON).
    Hull {
        #[command(flatten)]
        algebra: AlgebraArg,
    },
    /// Moment values along a random orbit sample (CSV).
    ///
    /// Columns: `sample`, `diagonalized` (0/1), `m1..mn` (diagonal of the
    /// moment value), then one `c_i_j_k` column per structure constant of the
    /// input holding c^2 / sum c^2 at the moved bracket (hull coordinates;
    /// constants created by the basis change are omitted).
    OrbitSample {
        #[command(flatten)]
        algebra: AlgebraArg,
        /// diag, torus, or derivation:<vector> for the centralizer of D.
        #[arg(long, default_value = "torus")]
        group: String,
        #[arg(long, default_value_t = 32)]
        count: usize,
    },
    /// Certificate that a diagonal derivation is strongly Ricci negative (JSON).
    Certify {
        #[command(flatten)]
        algebra: AlgebraArg,
        #[arg(long, short = 'd')]
        derivation: String,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        /// Metric search budget in Ricci evaluations.
        #[arg(long, default_value_t = rnl_core::search::DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Cone section at a trace level (JSON or CSV), or cone membership of a
    /// derivation when --derivation is given.
    ///
    /// CSV columns: `vertex`, then `x1..xk` torus coordinates, then
    /// `d1..dn` diagonal entries.
    Cone {
        #[command(flatten)]
        algebra: AlgebraArg,
        #[arg(long, default_value_t = 1.0)]
        trace_level: f64,
        /// Random probe directions for sampled sections.
        #[arg(long, default_value_t = rnl_core::cone::SAMPLE_COUNT)]
        resolution: usize,
        /// Require the exact regime (nice basis, multiplicity-free torus).
        #[arg(long, conflicts_with = "sampled")]
        exact: bool,
        /// Force the sampled inner approximation.
        #[arg(long)]
        sampled: bool,
        #[arg(long, short = 'd')]
        derivation: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Degeneration along a curve with a curvature predicate (JSON).
    Degenerate {
        /// Source algebra; ignored for the milnor curves.
        #[arg(long, short = 'a')]
        algebra: Option<String>,
        /// diag:<exponents>, heintze:<D>, milnor-heis or milnor-hyp.
        #[arg(long)]
        curve: String,
        #[arg(long, value_enum, default_value_t = PredicateArg::RicciNegative)]
        predicate: PredicateArg,
        #[arg(long, default_value_t = 1048576.0)]
        t_max: f64,
    },
    /// List corpus entries, or print one as an algebra file.
    Corpus {
        name: Option<String>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    NiceLp,
    SampledLp,
    Search,
    Auto,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredicateArg {
    RicciNegative,
    ScalarNegative,
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_PRECONDITION: u8 = 2;
pub const EXIT_UNKNOWN: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

/// What a subcommand produced: text for stdout and an exit status.
pub struct Output {
    pub text: String,
    pub code: u8,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::Schema { .. } | Error::UnknownAlgebra(_) | Error::Io(_) | Error::Json(_) => {
            EXIT_USAGE
        }
        Error::Clustering { .. } | Error::NoConvergence { .. } | Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_PRECONDITION,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match commands::run(&cli.command, seed) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.text.as_bytes());
            if !out.text.ends_with('\n') {
                let _ = stdout.write_all(b"\n");
            }
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
