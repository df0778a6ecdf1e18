//! Command-line front end for the `abundancy-core` experiments.
//!
//! Every subcommand prints a one-line JSON summary on stdout and writes any
//! requested files. Exit status: 0 success, 1 failed verification, 2 usage or
//! input error, 3 budget refusal.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use abundancy_core::genfunc::GenfuncError;
use abundancy_core::limit_stats::LimitError;
use abundancy_core::perm_oracle::OracleError;
use abundancy_core::qseries::QSeriesError;
use abundancy_core::sieve::SieveError;
use abundancy_core::tori::ToriError;

/// Environment variable naming the table cache directory.
pub const CACHE_ENV: &str = "ABUNDANCY_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = ".abundancy-cache";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "abundancy",
    version,
    about = "Experiments on B(l,n) and the index B(l,n)/n^(l-1)"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Tabulate B(l, n) for n <= nmax into a CSV file with a JSON sidecar.
    Sieve(SieveArgs),
    /// Count commuting l-tuples in S_n by orbit number.
    Bruteforce(BruteforceArgs),
    /// Expand exp(x L_l(z)) and emit the rows A(l, n, k).
    Genfunc(GenfuncArgs),
    /// Extract A(l, n, k)/n! by trapezoidal contour quadrature.
    Cauchy(CauchyArgs),
    /// Check the q-analogue of the power rule against its exact right side.
    Qcheck(QcheckArgs),
    /// Check both parts of the mean-value theorem for B(l, n)/n^(l-1).
    VerifyTheorem(VerifyTheoremArgs),
    /// Error-term statistics for sum sigma(n)/n and the histogram of X.
    VerifyConjecture(VerifyConjectureArgs),
    /// Euler-product moments of the limiting distribution.
    Moments(MomentsArgs),
    /// Build, check and export twisted tori.
    Tori(ToriArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SieveArgs {
    #[arg(long, default_value_t = 2)]
    pub ell: u32,
    #[arg(long, default_value_t = 1_000_000)]
    pub nmax: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Refuse tables whose working memory would exceed this many bytes.
    #[arg(long)]
    pub memory_budget: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct BruteforceArgs {
    #[arg(long, default_value_t = 2)]
    pub ell: u32,
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Largest admissible n!^l.
    #[arg(long)]
    pub max_work: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct GenfuncArgs {
    #[arg(long, default_value_t = 2)]
    pub ell: u32,
    /// Highest power of z kept.
    #[arg(long, default_value_t = 10)]
    pub order: usize,
    /// Also evaluate H_{l,n}(x) at this rational, given as p/q.
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CauchyArgs {
    #[arg(long, default_value_t = 2)]
    pub ell: u32,
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub k: u32,
    /// Contour radius in (0, 1).
    #[arg(long)]
    pub r: f64,
    /// Quadrature points M.
    #[arg(long, default_value_t = 2048)]
    pub grid: usize,
    /// Terms kept in the inner series (default: enough for 1e-17).
    #[arg(long)]
    pub trunc: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct QcheckArgs {
    #[arg(long, default_value_t = 2)]
    pub ell: u32,
    /// Base q as p/q with |q| < 1.
    #[arg(long, required_unless_present = "grid")]
    pub q: Option<String>,
    /// Argument z as p/q.
    #[arg(long, required_unless_present = "grid")]
    pub z: Option<String>,
    /// Required agreement between truncated and exact sides.
    #[arg(long, default_value_t = 1e-10)]
    pub eps: f64,
    /// Force the truncation length instead of deriving it from the bound.
    #[arg(long)]
    pub terms: Option<u32>,
    /// Run the whole reference grid (l <= 6) instead of one case.
    #[arg(long, conflicts_with_all = ["q", "z"])]
    pub grid: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyTheoremArgs {
    #[arg(long, default_value_t = 2)]
    pub ell: u32,
    /// Range of N (default: the whole table, or 10^6 when sieving).
    #[arg(long)]
    pub nmax: Option<u64>,
    /// Saved table to use instead of sieving.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Allowed |mean - zeta(2)...zeta(l)| (default 2e-5 for l = 2, else 1e-3).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Tail tolerance for the power-rule grid.
    #[arg(long, default_value_t = 1e-10)]
    pub eps: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyConjectureArgs {
    /// Saved l = 2 table to use instead of sieving.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Range of N (default: the whole table, or 10^6 when sieving).
    #[arg(long)]
    pub nmax: Option<u64>,
    #[arg(long, default_value_t = 250)]
    pub bins: usize,
    /// Histogram CSV output.
    #[arg(long)]
    pub hist: Option<PathBuf>,
    /// Summary JSON output.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Fail when |mean_E + mu| / mu exceeds this.
    #[arg(long, default_value_t = 1e-4)]
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    #[arg(long, default_value_t = 2)]
    pub ell: u32,
    /// Moment order m.
    #[arg(long, default_value_t = 1)]
    pub order: u32,
    #[arg(long, default_value_t = 10_000)]
    pub prime_cutoff: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub eps: f64,
    /// Saved table for the empirical moment.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Range of the empirical moment; sieves when no table is given.
    #[arg(long)]
    pub nmax: Option<u64>,
    /// Allowed gap to reference values (default: the reported tail bound).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 1e-2)]
    pub empirical_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ToriArgs {
    /// Dimensions f_1,...,f_l.
    #[arg(long, required_unless_present = "double_count")]
    pub dims: Option<String>,
    /// Twist vectors for directions 2..l separated by ';', entries by ','.
    #[arg(long)]
    pub twists: Option<String>,
    /// Write the graph in DOT format.
    #[arg(long)]
    pub dot: Option<PathBuf>,
    /// Validate the realization.
    #[arg(long)]
    pub check: bool,
    /// Compare every relabeled torus with the brute-force transitive tuples.
    #[arg(long, requires_all = ["ell", "n"])]
    pub double_count: bool,
    #[arg(long)]
    pub ell: Option<u32>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub max_work: Option<u64>,
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

/// Parsed and validated invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub threads: Option<usize>,
    pub cache_dir: PathBuf,
    pub command: Command,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Budget(_) => EXIT_BUDGET,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Budget(m) => write!(f, "refused: {m}"),
        }
    }
}

impl From<SieveError> for CliError {
    fn from(e: SieveError) -> Self {
        match e {
            SieveError::OverBudget { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::OverBudget { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<GenfuncError> for CliError {
    fn from(e: GenfuncError) -> Self {
        match e {
            GenfuncError::Sieve(s) => s.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ToriError> for CliError {
    fn from(e: ToriError) -> Self {
        match e {
            ToriError::Oracle(o) => o.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<QSeriesError> for CliError {
    fn from(e: QSeriesError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<LimitError> for CliError {
    fn from(e: LimitError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--{name} must be a positive number (got {v})"
        )))
    }
}

fn at_least<T: PartialOrd + std::fmt::Display>(name: &str, v: T, min: T) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--{name} must be at least {min} (got {v})"
        )))
    }
}

impl RunConfig {
    pub fn from_args<I, T>(argv: I) -> Result<RunConfig, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        let cli = Cli::try_parse_from(argv)?;
        let cache_dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR));
        Ok(RunConfig {
            threads: cli.threads,
            cache_dir,
            command: cli.command,
        })
    }

    /// Range checks that clap cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(t) = self.threads {
            at_least("threads", t, 1)?;
        }
        match &self.command {
            Command::Sieve(a) => {
                at_least("ell", a.ell, 1)?;
                at_least("nmax", a.nmax, 1)
            }
            Command::Bruteforce(a) => {
                at_least("ell", a.ell, 1)?;
                at_least("n", a.n, 1)
            }
            Command::Genfunc(a) => {
                at_least("ell", a.ell, 1)?;
                at_least("order", a.order, 1)
            }
            Command::Cauchy(a) => {
                at_least("ell", a.ell, 1)?;
                at_least("grid", a.grid, 1)?;
                positive("tol", a.tol)?;
                if !(a.r > 0.0 && a.r < 1.0) {
                    return Err(CliError::Usage(format!(
                        "--r must lie in (0, 1) (got {})",
                        a.r
                    )));
                }
                Ok(())
            }
            Command::Qcheck(a) => {
                at_least("ell", a.ell, 2)?;
                positive("eps", a.eps)
            }
            Command::VerifyTheorem(a) => {
                at_least("ell", a.ell, 2)?;
                a.nmax.map_or(Ok(()), |n| at_least("nmax", n, 1))?;
                positive("eps", a.eps)?;
                a.tol.map_or(Ok(()), |t| positive("tol", t))
            }
            Command::VerifyConjecture(a) => {
                at_least("bins", a.bins, 1)?;
                positive("max-rel-err", a.max_rel_err)?;
                a.nmax.map_or(Ok(()), |n| at_least("nmax", n, 1))
            }
            Command::Moments(a) => {
                at_least("ell", a.ell, 2)?;
                at_least("order", a.order, 1)?;
                at_least("prime-cutoff", a.prime_cutoff, 2)?;
                positive("eps", a.eps)?;
                positive("empirical-tol", a.empirical_tol)?;
                a.tol.map_or(Ok(()), |t| positive("tol", t))
            }
            Command::Tori(a) => {
                if let Some(n) = a.n {
                    at_least("n", n, 1)?;
                }
                if let Some(ell) = a.ell {
                    at_least("ell", ell, 1)?;
                }
                Ok(())
            }
        }
    }
}

/// Runs one invocation and returns its exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::from_args(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&config) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VERIFY,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Dispatches a validated config. `Ok(false)` means a check failed.
pub fn execute(config: &RunConfig) -> Result<bool, CliError> {
    config.validate()?;
    if let Some(t) = config.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    match &config.command {
        Command::Sieve(a) => commands::sieve(a),
        Command::Bruteforce(a) => commands::bruteforce(a),
        Command::Genfunc(a) => commands::genfunc(a),
        Command::Cauchy(a) => commands::cauchy(a),
        Command::Qcheck(a) => commands::qcheck(a),
        Command::VerifyTheorem(a) => commands::verify_theorem(config, a),
        Command::VerifyConjecture(a) => commands::verify_conjecture(config, a),
        Command::Moments(a) => commands::moments(config, a),
        Command::Tori(a) => commands::tori(a),
    }
}
