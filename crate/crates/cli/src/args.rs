use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "normbound", version, about = "Normal-domination tail bounds and their certification")]
pub struct Cli {
    /// Output format; CSV is a fixed-column projection of the JSON record.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,

    /// Write the record to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Cap on worker threads; results never depend on it.
    #[arg(long, env = "NORMBOUND_THREADS", global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// The constants c, k, k1, k2, k3 for one order pair.
    Constants {
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
    },
    /// Tail bounds on P(S_n >= x) for aggregate scale s.
    Bound {
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        s: f64,
        #[arg(long, value_enum, default_value_t = Method::Combined)]
        method: Method,
    },
    /// Scales and bounds from a file of per-step conditions.
    BoundSequence {
        #[arg(long)]
        file: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
    },
    /// Exact tail of a weighted sign sum against the discrete comparison.
    Rademacher {
        #[arg(long)]
        n: u32,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        /// Comma-separated weights (default: n equal weights 1/sqrt(n)).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        weights: Option<Vec<f64>>,
    },
    /// Run a verification suite; exit 1 if any inequality fails.
    Verify {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Monte Carlo tails of S_n and M_n.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 1_000_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated thresholds.
        #[arg(long = "x", value_delimiter = ',', allow_negative_numbers = true, default_value = "1,2,3")]
        x_grid: Vec<f64>,
    },
    /// Concentration scales and bounds for a corpus file.
    Lipschitz {
        #[arg(long)]
        file: PathBuf,
        /// Comma-separated thresholds; empty emits scales only.
        #[arg(long = "x", value_delimiter = ',', allow_negative_numbers = true)]
        x_grid: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Hoeffding,
    Pinelis,
    Combined,
    Optimal,
    All,
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// `rademacher:N`, `rademacher-linear:N`, `two-point:R`,
    /// `sign-adapted:N`, `drifted:R:DRIFT:N`, `one-sided:P:N`, or a path to a
    /// model JSON file.
    #[arg(long)]
    pub model: String,
}

#[derive(Debug, Subcommand)]
pub enum Suite {
    /// L(r, t) <= R(t) on a product grid.
    Lemma {
        #[arg(long, default_value_t = 200)]
        r_steps: usize,
        #[arg(long, default_value_t = -30.0, allow_negative_numbers = true)]
        t_min: f64,
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        t_max: f64,
        #[arg(long, default_value_t = 0.01)]
        t_step: f64,
    },
    /// Fifth-moment domination on t in [-6s, 6s], step s/4.
    Moments {
        #[command(flatten)]
        model: ModelArg,
        /// Compare against this scale instead of the model's own.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Tail domination of S_n (and M_n for martingales) on the lattice.
    Tails {
        #[command(flatten)]
        model: ModelArg,
        /// Compare against this scale instead of the model's own.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Maximal and snapshot moment inequalities.
    Maximal {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        t: f64,
    },
    /// k <= k1 <= min(k2, k3) and the diagonal limit of k1.
    ConstantsChain {
        #[arg(long, value_delimiter = ',', default_value = "1.5,2,3,5")]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 0.25)]
        beta_step: f64,
    },
}
