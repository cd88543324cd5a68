//! Batch commands behind the `bkr` binary. Each command returns a
//! serialisable report; [`run`] wires them to files and stdout.

pub mod args;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bkr::benchmark::{run_benchmark, BenchmarkConfig, BenchmarkRow};
use bkr::bdcor::PosteriorSamples;
use bkr::kernels::gram_for_column;
use bkr::{
    decide, joint_accept, load_dataset, pairwise_marginal, pairwise_matrix, save_dataset, BkrError, DecisionLabel,
    Generator, Histogram, JointReport, MatrixConfig, McConfig, NhstConfig, NhstResult, RngStream, HISTOGRAM_BINS,
};
use serde::Serialize;

pub use args::{Cli, Command, GlobalOpts};

pub type Dataset = bkr::Dataset;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] BkrError),
}

impl CliError {
    /// 1 usage or configuration, 2 data, 3 numeric degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numeric_degeneracy() => 3,
            CliError::Core(e) if e.is_data_error() => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub ropi: f64,
    pub threshold: f64,
    pub gamma: f64,
    pub n_mc: usize,
    /// `None` runs on exact Gram matrices.
    pub nystrom_rank: Option<usize>,
    pub n_perm: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            ropi: 0.025,
            threshold: 0.85,
            gamma: 0.9,
            n_mc: bkr::DEFAULT_MC_SAMPLES,
            nystrom_rank: Some(bkr::DEFAULT_LANDMARKS),
            n_perm: bkr::nhst::DEFAULT_PERMUTATIONS,
            alpha: bkr::nhst::DEFAULT_ALPHA,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Usage(m));
        if !(0.0..=1.0).contains(&self.ropi) {
            return bad(format!("--ropi {} outside [0, 1]", self.ropi));
        }
        if !(self.threshold > 0.5 && self.threshold < 1.0) {
            return bad(format!("--threshold {} outside (0.5, 1)", self.threshold));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("--gamma {} outside (0, 1)", self.gamma));
        }
        if self.n_mc == 0 {
            return bad("--mc-samples must be positive".into());
        }
        if self.nystrom_rank == Some(0) {
            return bad("--nystrom-rank must be positive or \"exact\"".into());
        }
        if self.n_perm == 0 {
            return bad("--permutations must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("--alpha {} outside (0, 1)", self.alpha));
        }
        Ok(())
    }

    fn matrix(&self) -> MatrixConfig {
        let mut m = MatrixConfig::new(McConfig::new(self.n_mc, self.seed), self.ropi);
        m.nystrom_rank = self.nystrom_rank;
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub x: String,
    pub y: String,
    pub n: usize,
    pub n_mc: usize,
    pub seed: u64,
    pub nystrom_rank: Option<usize>,
    pub posterior_mean: f64,
    pub tau_mean: f64,
    pub quantiles: Quantiles,
    pub histogram: Histogram,
    pub p_dependent: f64,
    pub p_independent: f64,
    pub ropi: f64,
    pub threshold: f64,
    pub decision: DecisionLabel,
}

fn pair_indices(dataset: &Dataset, x: &str, y: &str) -> Result<[usize; 2]> {
    let i = dataset.column_index(x)?;
    let j = dataset.column_index(y)?;
    if i == j {
        return Err(CliError::Usage(format!("cannot test column {x:?} against itself")));
    }
    Ok([i, j])
}

/// BdCor posterior and decision for one column pair, on the rows where both
/// are observed.
pub fn cmd_test(dataset: &Dataset, x: &str, y: &str, cfg: &RunConfig) -> Result<TestReport> {
    cfg.validate()?;
    let cols = pair_indices(dataset, x, y)?;
    let sub = dataset.complete_cases(&cols);
    let mut mcfg = cfg.matrix();
    mcfg.keep_samples = true;
    let matrix = pairwise_matrix(&sub, &mcfg)?;
    let post: &PosteriorSamples<f64> = matrix.pairs[0].samples().expect("samples kept");
    let decision = decide(post, cfg.ropi, cfg.threshold)?;
    Ok(TestReport {
        x: x.to_string(),
        y: y.to_string(),
        n: sub.n_rows(),
        n_mc: cfg.n_mc,
        seed: cfg.seed,
        nystrom_rank: cfg.nystrom_rank.filter(|&m| m < sub.n_rows()),
        posterior_mean: post.mean(),
        tau_mean: post.tau_mean(),
        quantiles: Quantiles {
            q025: post.quantile(0.025),
            q50: post.quantile(0.5),
            q975: post.quantile(0.975),
        },
        histogram: post.histogram(HISTOGRAM_BINS),
        p_dependent: decision.p_dependent,
        p_independent: decision.p_independent,
        ropi: cfg.ropi,
        threshold: cfg.threshold,
        decision: decision.label,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairSummary {
    pub x: String,
    pub y: String,
    pub n: usize,
    pub posterior_mean: f64,
    pub tau_mean: f64,
    pub p_dependent: f64,
    pub decision: DecisionLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatrixReport {
    pub columns: Vec<String>,
    pub n: usize,
    pub n_mc: usize,
    pub seed: u64,
    pub ropi: f64,
    pub threshold: f64,
    /// Cell `(i, j)` is the posterior mean of BdCor.
    pub posterior_mean: Vec<Vec<f64>>,
    /// Cell `(i, j)` is `P(BdCor > ROPI)`.
    pub p_dependent: Vec<Vec<f64>>,
    pub pairs: Vec<PairSummary>,
    /// Absent when rows with missing cells forced pairwise-complete analysis.
    pub joint: Option<JointReport>,
}

fn label(p_dep: f64, threshold: f64) -> DecisionLabel {
    if p_dep > threshold {
        DecisionLabel::Dependent
    } else if 1.0 - p_dep > threshold {
        DecisionLabel::Independent
    } else {
        DecisionLabel::Undecided
    }
}

/// All-pairs posterior means, dependence probabilities and the joint
/// acceptance report. Missing cells fall back to pairwise-complete marginals
/// without a joint report.
pub fn cmd_matrix(dataset: &Dataset, columns: &[String], cfg: &RunConfig) -> Result<MatrixReport> {
    cfg.validate()?;
    let data = if columns.is_empty() {
        dataset.clone()
    } else {
        let idx = columns
            .iter()
            .map(|c| dataset.column_index(c))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        dataset.select_columns(&idx)
    };
    let mut mcfg = cfg.matrix();
    mcfg.keep_samples = false;
    let (matrix, joint) = if data.first_incomplete_column().is_none() {
        let m = pairwise_matrix(&data, &mcfg)?;
        let j = joint_accept(&m, cfg.gamma)?;
        (m, Some(j))
    } else {
        (pairwise_marginal(&data, &mcfg)?, None)
    };
    let pairs = matrix
        .pairs
        .iter()
        .map(|p| PairSummary {
            x: matrix.names[p.i].clone(),
            y: matrix.names[p.j].clone(),
            n: p.n,
            posterior_mean: p.posterior_mean,
            tau_mean: p.tau_mean,
            p_dependent: p.p_dependent,
            decision: label(p.p_dependent, cfg.threshold),
        })
        .collect();
    Ok(MatrixReport {
        columns: matrix.names.clone(),
        n: data.n_rows(),
        n_mc: cfg.n_mc,
        seed: cfg.seed,
        ropi: cfg.ropi,
        threshold: cfg.threshold,
        posterior_mean: matrix.mean_matrix(),
        p_dependent: matrix.p_dependent_matrix(),
        pairs,
        joint,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineReport {
    pub x: String,
    pub y: String,
    pub n: usize,
    pub seed: u64,
    pub result: NhstResult,
}

/// HSIC permutation test for one column pair at level `alpha`.
pub fn cmd_baseline(dataset: &Dataset, x: &str, y: &str, cfg: &RunConfig) -> Result<BaselineReport> {
    cfg.validate()?;
    let cols = pair_indices(dataset, x, y)?;
    let sub = dataset.complete_cases(&cols);
    let kx = gram_for_column(sub.column(0), sub.kernel_spec(0))?;
    let ky = gram_for_column(sub.column(1), sub.kernel_spec(1))?;
    let ncfg = NhstConfig {
        n_perm: cfg.n_perm,
        alpha: cfg.alpha,
        seed: cfg.seed,
    };
    Ok(BaselineReport {
        x: x.to_string(),
        y: y.to_string(),
        n: sub.n_rows(),
        seed: cfg.seed,
        result: bkr::hsic_permutation_test(&kx, &ky, &ncfg)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub generator: Generator,
    pub n: usize,
    pub repetitions: usize,
    pub config: RunConfig,
    pub rows: Vec<BenchmarkRow>,
}

/// File stem for an emitted benchmark dataset.
pub fn dataset_stem(generator: Generator, rho: f64, rep: usize) -> String {
    format!("{generator}_rho{rho}_rep{rep}")
}

/// Synthetic benchmark over a grid of coupling strengths. With `emit`, every
/// generated dataset is also written there as CSV plus schema.
pub fn cmd_benchmark(
    generator: Generator,
    n: usize,
    rhos: &[f64],
    repetitions: usize,
    cfg: &RunConfig,
    emit: Option<&Path>,
) -> Result<BenchmarkReport> {
    cfg.validate()?;
    if rhos.is_empty() {
        return Err(CliError::Usage("--rho needs at least one value".into()));
    }
    if repetitions == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    let bcfg = BenchmarkConfig {
        generator,
        n,
        rhos: rhos.to_vec(),
        repetitions,
        seed: cfg.seed,
        n_mc: cfg.n_mc,
        ropi: cfg.ropi,
        gamma: cfg.gamma,
        threshold: cfg.threshold,
        nystrom_rank: cfg.nystrom_rank,
        n_perm: cfg.n_perm,
        alpha: cfg.alpha,
    };
    if let Some(dir) = emit {
        std::fs::create_dir_all(dir)?;
    }
    let rows = run_benchmark::<f64>(&bcfg, |rho, rep, d| match emit {
        Some(dir) => {
            let stem = dataset_stem(generator, rho, rep);
            save_dataset(d, dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.schema.json")))
        }
        None => Ok(()),
    })?;
    Ok(BenchmarkReport {
        generator,
        n,
        repetitions,
        config: *cfg,
        rows,
    })
}

/// Writes benchmark rows as CSV with a header.
pub fn write_benchmark_csv<W: Write>(rows: &[BenchmarkRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(BkrError::from)?;
    }
    w.flush()?;
    Ok(())
}

/// One synthetic dataset from the data stream of `seed`.
pub fn cmd_generate(generator: Generator, n: usize, rho: f64, seed: u64) -> Result<Dataset> {
    let data = generator.generate::<f64, _>(n, rho, &mut RngStream::data(seed, 0).rng())?;
    Ok(data.dataset)
}

/// Default schema sidecar: `data.csv` → `data.schema.json`.
pub fn default_schema_path(csv: &Path) -> PathBuf {
    csv.with_extension("schema.json")
}

pub fn to_json<S: Serialize>(report: &S) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load(data: &Path, opts: &GlobalOpts) -> Result<Dataset> {
    let schema = opts.schema.clone().unwrap_or_else(|| default_schema_path(data));
    Ok(load_dataset(data, schema)?)
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let opts = &cli.opts;
    let cfg = opts.run_config();
    cfg.validate()?;
    let out = opts.out.as_deref();
    match &cli.command {
        Command::Test { data, x, y } => emit(&to_json(&cmd_test(&load(data, opts)?, x, y, &cfg)?), out),
        Command::Matrix { data, columns } => emit(&to_json(&cmd_matrix(&load(data, opts)?, columns, &cfg)?), out),
        Command::Baseline { data, x, y } => emit(&to_json(&cmd_baseline(&load(data, opts)?, x, y, &cfg)?), out),
        Command::Benchmark {
            generator,
            n,
            rho,
            reps,
            csv,
            emit: emit_dir,
        } => {
            let report = cmd_benchmark(*generator, *n, rho, *reps, &cfg, emit_dir.as_deref())?;
            emit(&to_json(&report), out)?;
            let csv_path = csv.clone().or_else(|| out.map(|p| p.with_extension("csv")));
            if let Some(p) = csv_path {
                write_benchmark_csv(&report.rows, BufWriter::new(File::create(p)?))?;
            }
            Ok(())
        }
        Command::Generate { generator, n, rho } => {
            let d = cmd_generate(*generator, *n, *rho, cfg.seed)?;
            let Some(csv) = out else {
                return Err(CliError::Usage("generate needs --out <file.csv>".into()));
            };
            let schema = opts.schema.clone().unwrap_or_else(|| default_schema_path(csv));
            save_dataset(&d, csv, schema)?;
            Ok(())
        }
    }
}
