use std::path::PathBuf;
use std::str::FromStr;

use bkr::Generator;
use clap::{Args, Parser, Subcommand};

use crate::RunConfig;

/// Landmark count for the low-rank path, or `exact`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rank(pub Option<usize>);

impl FromStr for Rank {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("exact") {
            return Ok(Rank(None));
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive integer or \"exact\", got {s:?}")),
            Ok(m) => Ok(Rank(Some(m))),
        }
    }
}

fn parse_generator(s: &str) -> Result<Generator, String> {
    s.parse().map_err(|e: bkr::BkrError| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "bkr", version, about = "Bayesian kernelised tests of dependence and independence")]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Region of practical independence: BdCor at or below this counts as independent.
    #[arg(long, global = true, default_value_t = 0.025)]
    pub ropi: f64,
    /// Posterior probability needed for a single-pair decision.
    #[arg(long, global = true, default_value_t = 0.85)]
    pub threshold: f64,
    /// Joint probability needed for the accepted statement set.
    #[arg(long, global = true, default_value_t = 0.9)]
    pub gamma: f64,
    #[arg(long = "mc-samples", global = true, default_value_t = 1000)]
    pub mc_samples: usize,
    /// Nyström landmarks per variable, or `exact`.
    #[arg(long = "nystrom-rank", global = true, default_value = "128")]
    pub nystrom_rank: Rank,
    /// Permutations for the HSIC baseline.
    #[arg(long, global = true, default_value_t = 500)]
    pub permutations: usize,
    /// Significance level of the HSIC baseline (family-wise in `benchmark`).
    #[arg(long, global = true, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON schema sidecar (default: the data path with `.schema.json`).
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl GlobalOpts {
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            ropi: self.ropi,
            threshold: self.threshold,
            gamma: self.gamma,
            n_mc: self.mc_samples,
            nystrom_rank: self.nystrom_rank.0,
            n_perm: self.permutations,
            alpha: self.alpha,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// BdCor posterior and decision for one pair of columns.
    Test { data: PathBuf, x: String, y: String },
    /// All-pairs BdCor matrix with joint acceptance.
    Matrix {
        data: PathBuf,
        /// Restrict to these columns (comma separated).
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
    },
    /// HSIC permutation test for one pair of columns.
    Baseline { data: PathBuf, x: String, y: String },
    /// Synthetic benchmark against the HSIC baseline.
    Benchmark {
        #[arg(long, default_value = "d1", value_parser = parse_generator)]
        generator: Generator,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Coupling strengths (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "0,0.9")]
        rho: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// CSV table (default: `--out` with a `.csv` extension).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Directory receiving every generated dataset.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Write one synthetic dataset to `--out` (and its schema).
    Generate {
        #[arg(long, default_value = "d1", value_parser = parse_generator)]
        generator: Generator,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0.9)]
        rho: f64,
    },
}
