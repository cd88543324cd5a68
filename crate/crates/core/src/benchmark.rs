//! Repeated synthetic experiments comparing joint BdCor decisions with
//! Bonferroni-corrected HSIC permutation tests.

use serde::{Deserialize, Serialize};

use crate::bdcor::McConfig;
use crate::data::Dataset;
use crate::dp_posterior::RngStream;
use crate::error::Result;
use crate::kernels::gram_for_column;
use crate::multiple_comparisons::{joint_accept, pairwise_matrix, Direction, MatrixConfig};
use crate::nhst::{bonferroni, hsic_permutation_test_pair, NhstConfig};
use crate::scalar::Scalar;
use crate::synthetic::{Generator, SyntheticTruth};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub generator: Generator,
    pub n: usize,
    pub rhos: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    pub n_mc: usize,
    pub ropi: f64,
    /// Joint credibility level for the accepted statement set.
    pub gamma: f64,
    /// Marginal decision threshold, reported alongside the joint counts.
    pub threshold: f64,
    pub nystrom_rank: Option<usize>,
    pub n_perm: usize,
    /// Family-wise level, divided over all pairs.
    pub alpha: f64,
}

impl BenchmarkConfig {
    pub fn new(generator: Generator, n: usize, rhos: Vec<f64>, repetitions: usize) -> Self {
        BenchmarkConfig {
            generator,
            n,
            rhos,
            repetitions,
            seed: 0,
            n_mc: crate::bdcor::DEFAULT_MC_SAMPLES,
            ropi: 0.025,
            gamma: 0.85,
            threshold: 0.85,
            nystrom_rank: None,
            n_perm: crate::nhst::DEFAULT_PERMUTATIONS,
            alpha: crate::nhst::DEFAULT_ALPHA,
        }
    }
}

/// Decision counts from one generated dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    /// Jointly accepted independence statements.
    pub bkr_ind: usize,
    /// Jointly accepted dependence statements.
    pub bkr_dep: usize,
    /// Accepted statements that agree with the truth.
    pub bkr_correct: usize,
    /// Pairs whose marginal P(BdCor > ROPI) exceeds the threshold.
    pub marginal_dep: usize,
    /// Pairs whose marginal P(BdCor ≤ ROPI) exceeds the threshold.
    pub marginal_ind: usize,
    /// Rejections of independence by the corrected permutation tests.
    pub hsic_dep: usize,
    /// Rejections on truly dependent pairs.
    pub hsic_correct: usize,
}

/// Averages over the repetitions at one coupling strength.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub generator: Generator,
    pub n: usize,
    pub rho: f64,
    pub repetitions: usize,
    pub true_dep: usize,
    pub true_ind: usize,
    pub bkr_ind: f64,
    pub bkr_dep: f64,
    pub bkr_all: f64,
    pub bkr_accuracy: f64,
    pub marginal_ind: f64,
    pub marginal_dep: f64,
    pub hsic_dep: f64,
    pub hsic_accuracy: f64,
}

/// Seeds for repetition `rep`. Repetitions at different `rho` reuse the same
/// latent draws.
fn rep_seeds(seed: u64, rep: usize) -> (RngStream, u64) {
    (RngStream::data(seed, rep), RngStream::subseed(seed, rep))
}

/// Run both procedures on one dataset with known truth.
pub fn evaluate<T: Scalar>(
    dataset: &Dataset<T>,
    truth: &SyntheticTruth,
    cfg: &BenchmarkConfig,
    seed: u64,
) -> Result<ReplicateOutcome> {
    let mut mcfg = MatrixConfig::new(McConfig::new(cfg.n_mc, seed), cfg.ropi);
    mcfg.nystrom_rank = cfg.nystrom_rank;
    mcfg.keep_samples = false;
    let matrix = pairwise_matrix(dataset, &mcfg)?;
    let joint = joint_accept(&matrix, cfg.gamma)?;

    let mut out = ReplicateOutcome::default();
    for s in &joint.accepted {
        let dep = s.direction == Direction::Dependent;
        if dep {
            out.bkr_dep += 1;
        } else {
            out.bkr_ind += 1;
        }
        if dep == truth.is_dependent(s.i, s.j) {
            out.bkr_correct += 1;
        }
    }
    for p in &matrix.pairs {
        if p.p_dependent > cfg.threshold {
            out.marginal_dep += 1;
        } else if 1.0 - p.p_dependent > cfg.threshold {
            out.marginal_ind += 1;
        }
    }

    let grams = dataset
        .columns()
        .iter()
        .zip(dataset.kernel_specs())
        .map(|(c, &s)| gram_for_column(c, s))
        .collect::<Result<Vec<_>>>()?;
    let ncfg = NhstConfig {
        n_perm: cfg.n_perm,
        alpha: bonferroni(cfg.alpha, matrix.pairs.len()),
        seed,
    };
    for (pid, p) in matrix.pairs.iter().enumerate() {
        let r = hsic_permutation_test_pair(&grams[p.i], &grams[p.j], &ncfg, pid)?;
        if r.rejected {
            out.hsic_dep += 1;
            if truth.is_dependent(p.i, p.j) {
                out.hsic_correct += 1;
            }
        }
    }
    Ok(out)
}

/// Run the whole grid. `on_dataset(rho, rep, data)` sees every generated
/// dataset before it is analysed.
pub fn run_benchmark<T: Scalar>(
    cfg: &BenchmarkConfig,
    mut on_dataset: impl FnMut(f64, usize, &Dataset<T>) -> Result<()>,
) -> Result<Vec<BenchmarkRow>> {
    let mut rows = Vec::with_capacity(cfg.rhos.len());
    for &rho in &cfg.rhos {
        let truth = SyntheticTruth::for_rho(rho);
        let k = truth.pairs.len() as f64;
        let mut sum = [0usize; 7];
        for rep in 0..cfg.repetitions {
            let (data_stream, seed) = rep_seeds(cfg.seed, rep);
            let data = cfg.generator.generate::<T, _>(cfg.n, rho, &mut data_stream.rng())?;
            on_dataset(rho, rep, &data.dataset)?;
            let o = evaluate(&data.dataset, &truth, cfg, seed)?;
            for (acc, v) in sum.iter_mut().zip([
                o.bkr_ind,
                o.bkr_dep,
                o.bkr_correct,
                o.marginal_ind,
                o.marginal_dep,
                o.hsic_dep,
                o.hsic_correct,
            ]) {
                *acc += v;
            }
        }
        let reps = cfg.repetitions.max(1) as f64;
        let avg = |v: usize| v as f64 / reps;
        rows.push(BenchmarkRow {
            generator: cfg.generator,
            n: cfg.n,
            rho,
            repetitions: cfg.repetitions,
            true_dep: truth.dependent_count(),
            true_ind: truth.independent_count(),
            bkr_ind: avg(sum[0]),
            bkr_dep: avg(sum[1]),
            bkr_all: avg(sum[0] + sum[1]),
            bkr_accuracy: avg(sum[2]) / k,
            marginal_ind: avg(sum[3]),
            marginal_dep: avg(sum[4]),
            hsic_dep: avg(sum[5]),
            hsic_accuracy: avg(sum[6]) / k,
        });
    }
    Ok(rows)
}
