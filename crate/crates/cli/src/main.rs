mod commands;
mod config;
mod io;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use exactdim::Mode;

/// Fourier-decaying measures on sets of exact Diophantine order, built and checked
/// at finite scale.
#[derive(Parser, Debug)]
#[command(name = "exactdim", version)]
pub struct Cli {
    #[arg(long, global = true, default_value = "desk")]
    pub mode: Mode,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 0x5eed)]
    pub seed: u64,
    #[arg(long = "out-dir", global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 2.634)]
    pub tau1: f64,
    #[arg(long, default_value_t = 2.0)]
    pub tau2: f64,
    #[arg(long = "eps", default_value_t = 0.05)]
    pub epsilon: f64,
    /// `0`, `golden`, `silver`, `surd:p,r,d,s` or `cf:a1,a2,...`
    #[arg(long, default_value = "0")]
    pub theta: String,
    /// TOML file with a `[params]` section; overrides the flags above.
    #[arg(long = "params")]
    pub file: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Derived exponents and admissibility.
    Params(ParamArgs),
    /// Searches `(q1, q2)` for a fraction closer to `x` than the inner annulus radius.
    /// Without `--x`, runs the randomized experiment over points built in two prime
    /// annuli with `q1` in the given range.
    Gap {
        #[command(flatten)]
        params: ParamArgs,
        /// A decimal, or `p/q+offset` for a point anchored at the fraction `(p − θ)/q`.
        #[arg(long)]
        x: Option<String>,
        /// A single `q1`, or a range `lo:hi` for the experiment.
        #[arg(long, default_value = "101:199")]
        q1: String,
        #[arg(long)]
        q2: Option<i64>,
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long = "q2-cap", default_value_t = 10_000_000)]
        q2_cap: i64,
    },
    /// Decay certificate of the bump transform.
    Bump {
        #[arg(long, default_value_t = 64)]
        depth: usize,
        #[arg(long, default_value_t = 0.27)]
        prefactor: f64,
        #[arg(long, default_value = "1e2:1e4")]
        certify: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Regime report of one layer, optionally with a coefficient dump.
    Layer {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long = "M")]
        m: u64,
        /// Run the regime checks; otherwise only the coefficient dump is written.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value = "regimes.json")]
        out: PathBuf,
        /// Coefficient dump over `|s| ≤ window`.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        window: i64,
    },
    /// The product measures and their inductive bounds.
    Measure {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long = "M1", default_value_t = 16)]
        m1: u64,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Largest sampled |s|.
        #[arg(long)]
        window: Option<f64>,
        /// Largest densely stored |s|.
        #[arg(long, default_value_t = 100_000)]
        dense: i64,
        #[arg(long, default_value = "mu.csv")]
        out: PathBuf,
    },
    /// The convolution stability estimate at one step of the schedule.
    Stability {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long = "Mj")]
        mj: u64,
        #[arg(long, conflicts_with = "real")]
        synthetic: bool,
        #[arg(long)]
        real: bool,
    },
    /// Lifting to the torus, or windowing a periodic measure back to the line.
    Periodize {
        #[arg(long = "check-lift", conflicts_with = "window")]
        check_lift: bool,
        #[arg(long)]
        window: bool,
        /// Torus resolution for the lift check, as a power of two.
        #[arg(long, default_value_t = 20)]
        log2n: u32,
        #[arg(long, default_value = "1:1e5")]
        xi: String,
        #[arg(long, default_value_t = 300)]
        samples: usize,
        /// Coefficient dump to window; without it, `(1+|s|)^-power` with phase `(-1)^s`.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0.3)]
        power: f64,
        #[arg(long = "eps", default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value = "windowed.csv")]
        out: PathBuf,
    },
    /// Log-log decay fit of a coefficient dump.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "1e3:1e6")]
        range: String,
    },
    /// The normality double sum at frequencies m(a^j - a^k).
    Normality {
        #[arg(long, default_value_t = 2)]
        a: u64,
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        m: i64,
        #[arg(long = "Nmax", default_value_t = 10_000)]
        nmax: usize,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// The whole pipeline from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(commands::EXIT_USAGE);
        }
    }
    match commands::dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
