//! All-pairs BdCor with shared posterior weights, and the joint acceptance
//! procedure over the resulting statements.
//!
//! Every pair reads the same weight draw at iteration `t`, so the joint
//! posterior probability of several statements is an exact fraction of
//! iterations in which all of them hold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bdcor::{run_pairs, ExactEngine, LowRankEngine, McConfig, PairTrace, PosteriorSamples};
use crate::data::Dataset;
use crate::dp_posterior::RngStream;
use crate::error::{BkrError, Result};
use crate::kernels::{ColumnKernel, GramMatrix};
use crate::nystrom::{nystrom_for_kernel, FeatureMatrix};
use crate::scalar::Scalar;

/// Default joint credibility level.
pub const DEFAULT_GAMMA: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixConfig {
    pub mc: McConfig,
    pub ropi: f64,
    /// Nyström landmark count; `None`, or any value `≥ n`, uses exact Gram
    /// matrices.
    pub nystrom_rank: Option<usize>,
    /// Keep every pair's full sample array (otherwise only the per-iteration
    /// indicators and summaries survive).
    pub keep_samples: bool,
}

impl MatrixConfig {
    pub fn new(mc: McConfig, ropi: f64) -> Self {
        MatrixConfig {
            mc,
            ropi,
            nystrom_rank: None,
            keep_samples: true,
        }
    }
}

/// Which side of the ROPI a statement asserts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `BdCor > ROPI`
    Dependent,
    /// `BdCor ≤ ROPI`
    Independent,
}

/// Posterior summary of one pair `(i, j)`, `i < j`.
#[derive(Clone, Debug)]
pub struct PairResult<T> {
    pub i: usize,
    pub j: usize,
    /// Rows the pair was computed on.
    pub n: usize,
    pub posterior_mean: f64,
    pub tau_mean: f64,
    pub p_dependent: f64,
    above: Vec<bool>,
    samples: Option<PosteriorSamples<T>>,
}

impl<T: Scalar> PairResult<T> {
    fn new(i: usize, j: usize, n: usize, trace: &PairTrace<T>, ropi: f64, keep: bool) -> Result<Self> {
        let post = PosteriorSamples::from_trace(trace)?;
        let r = T::of(ropi);
        let above: Vec<bool> = post.samples().iter().map(|&s| s > r).collect();
        Ok(PairResult {
            i,
            j,
            n,
            posterior_mean: post.mean().as_f64(),
            tau_mean: post.tau_mean().as_f64(),
            p_dependent: above.iter().filter(|&&a| a).count() as f64 / above.len() as f64,
            above,
            samples: keep.then_some(post),
        })
    }

    /// Per-iteration indicator of `BdCor > ROPI`.
    pub fn above_ropi(&self) -> &[bool] {
        &self.above
    }

    pub fn samples(&self) -> Option<&PosteriorSamples<T>> {
        self.samples.as_ref()
    }
}

/// Output of an all-pairs run.
#[derive(Clone, Debug)]
pub struct PairwiseMatrix<T> {
    pub names: Vec<String>,
    pub n_mc: usize,
    pub ropi: f64,
    /// True when every pair used the same rows and the same weight draws.
    pub shared_weights: bool,
    pub pairs: Vec<PairResult<T>>,
}

impl<T: Scalar> PairwiseMatrix<T> {
    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&PairResult<T>> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.pairs.iter().find(|p| p.i == i && p.j == j)
    }

    /// `k × k` posterior means; the diagonal is the self-comparison value 1.
    pub fn mean_matrix(&self) -> Vec<Vec<f64>> {
        self.symmetric(|p| p.posterior_mean)
    }

    /// `k × k` probabilities of `BdCor > ROPI`; diagonal 1.
    pub fn p_dependent_matrix(&self) -> Vec<Vec<f64>> {
        self.symmetric(|p| p.p_dependent)
    }

    fn symmetric(&self, f: impl Fn(&PairResult<T>) -> f64) -> Vec<Vec<f64>> {
        let k = self.k();
        let mut m = vec![vec![1.0; k]; k];
        for p in &self.pairs {
            m[p.i][p.j] = f(p);
            m[p.j][p.i] = f(p);
        }
        m
    }
}

fn all_pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|i| ((i + 1)..k).map(move |j| (i, j))).collect()
}

enum Prepared<T> {
    Exact(Vec<GramMatrix<T>>),
    LowRank(Vec<FeatureMatrix<T>>),
}

fn prepare<T: Scalar>(dataset: &Dataset<T>, cfg: &MatrixConfig, column_ids: &[usize]) -> Result<Prepared<T>> {
    let n = dataset.n_rows();
    let kernels: Vec<ColumnKernel<'_, T>> = dataset
        .columns()
        .iter()
        .zip(dataset.kernel_specs())
        .map(|(c, &s)| ColumnKernel::new(c, s))
        .collect::<Result<_>>()?;
    match cfg.nystrom_rank {
        Some(m) if m < n => {
            let feats = kernels
                .par_iter()
                .zip(column_ids)
                .map(|(k, &c)| nystrom_for_kernel(k, m, RngStream::landmarks(cfg.mc.seed, c)))
                .collect::<Vec<Result<_>>>()
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            Ok(Prepared::LowRank(feats))
        }
        _ => Ok(Prepared::Exact(kernels.par_iter().map(ColumnKernel::gram).collect())),
    }
}

fn run_prepared<T: Scalar>(
    prepared: &Prepared<T>,
    k: usize,
    pairs: &[(usize, usize)],
    pair_ids: &[usize],
    names: &[String],
    mc: &McConfig,
) -> Result<Vec<PairTrace<T>>> {
    match prepared {
        Prepared::Exact(g) => run_pairs(
            &ExactEngine {
                grams: g.iter().collect(),
            },
            k,
            pairs,
            pair_ids,
            names,
            mc,
        ),
        Prepared::LowRank(f) => run_pairs(
            &LowRankEngine {
                features: f.iter().collect(),
            },
            k,
            pairs,
            pair_ids,
            names,
            mc,
        ),
    }
}

fn check_cfg(cfg: &MatrixConfig) -> Result<()> {
    if !(0.0..=1.0).contains(&cfg.ropi) {
        return Err(BkrError::InvalidArgument(format!("ropi {} outside [0, 1]", cfg.ropi)));
    }
    if cfg.mc.n_mc == 0 {
        return Err(BkrError::InvalidArgument("n_mc must be positive".into()));
    }
    if cfg.nystrom_rank == Some(0) {
        return Err(BkrError::InvalidArgument("Nyström rank must be positive".into()));
    }
    Ok(())
}

/// BdCor posteriors for every column pair of a complete dataset, all driven
/// by one shared weight draw per iteration. Kernels are built once per
/// column.
pub fn pairwise_matrix<T: Scalar>(dataset: &Dataset<T>, cfg: &MatrixConfig) -> Result<PairwiseMatrix<T>> {
    check_cfg(cfg)?;
    let k = dataset.n_cols();
    if k < 2 {
        return Err(BkrError::InvalidArgument("need at least two columns".into()));
    }
    if let Some(c) = dataset.first_incomplete_column() {
        return Err(BkrError::IncompleteRows(dataset.column(c).name().to_string()));
    }
    let n = dataset.n_rows();
    if n < 3 {
        return Err(BkrError::InvalidArgument(format!("BdCor needs n >= 3, got {n}")));
    }
    let names = dataset.names();
    let pairs = all_pairs(k);
    let ids: Vec<usize> = (0..pairs.len()).collect();
    let column_ids: Vec<usize> = (0..k).collect();
    let prepared = prepare(dataset, cfg, &column_ids)?;
    let traces = run_prepared(&prepared, k, &pairs, &ids, &names, &cfg.mc)?;
    let results = pairs
        .iter()
        .zip(&traces)
        .map(|(&(i, j), t)| PairResult::new(i, j, n, t, cfg.ropi, cfg.keep_samples))
        .collect::<Result<Vec<_>>>()?;
    Ok(PairwiseMatrix {
        names,
        n_mc: cfg.mc.n_mc,
        ropi: cfg.ropi,
        shared_weights: true,
        pairs: results,
    })
}

/// Pairwise-complete analysis for data with missing cells: each pair drops
/// its own incomplete rows. Marginal summaries only; the result is flagged
/// as not sharing weights, so [`joint_accept`] refuses it.
pub fn pairwise_marginal<T: Scalar>(dataset: &Dataset<T>, cfg: &MatrixConfig) -> Result<PairwiseMatrix<T>> {
    check_cfg(cfg)?;
    let k = dataset.n_cols();
    if k < 2 {
        return Err(BkrError::InvalidArgument("need at least two columns".into()));
    }
    let names = dataset.names();
    let pairs = all_pairs(k);
    let mut results = Vec::with_capacity(pairs.len());
    for (pid, &(i, j)) in pairs.iter().enumerate() {
        let sub = dataset.complete_cases(&[i, j]);
        let n = sub.n_rows();
        if n < 3 {
            return Err(BkrError::InvalidArgument(format!(
                "pair ({}, {}) has only {n} complete rows",
                names[i], names[j]
            )));
        }
        let prepared = prepare(&sub, cfg, &[i, j])?;
        let sub_names = [names[i].clone(), names[j].clone()];
        let traces = run_prepared(&prepared, 2, &[(0, 1)], &[pid], &sub_names, &cfg.mc)?;
        results.push(PairResult::new(i, j, n, &traces[0], cfg.ropi, cfg.keep_samples)?);
    }
    let complete = dataset.first_incomplete_column().is_none();
    Ok(PairwiseMatrix {
        names,
        n_mc: cfg.mc.n_mc,
        ropi: cfg.ropi,
        shared_weights: complete && cfg.nystrom_rank.is_none_or(|m| m >= dataset.n_rows()),
        pairs: results,
    })
}

/// A directional claim about one pair with its marginal posterior
/// probability (always at least one half).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStatement {
    pub i: usize,
    pub j: usize,
    pub direction: Direction,
    pub marginal_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointReport {
    pub gamma: f64,
    /// Accepted statements, most probable first.
    pub accepted: Vec<PairStatement>,
    /// Joint probability of all accepted statements; `None` when nothing
    /// was accepted.
    pub joint_probability: Option<f64>,
    /// Joint probability after appending the first rejected statement.
    pub next_joint_probability: Option<f64>,
    /// Every statement in acceptance order.
    pub ranked: Vec<PairStatement>,
}

/// Joint acceptance from per-pair, per-iteration indicators of
/// `BdCor > ROPI`. All indicator vectors must come from the same iterations.
///
/// Each pair contributes its majority direction (dependence only on a strict
/// majority). Statements are sorted by marginal probability, ties by pair
/// index, and the longest prefix whose joint probability exceeds `gamma` is
/// accepted.
pub fn joint_accept_indicators(above: &[((usize, usize), &[bool])], gamma: f64) -> Result<JointReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(BkrError::InvalidArgument(format!("gamma {gamma} outside (0, 1)")));
    }
    let iters = above.first().map_or(0, |(_, a)| a.len());
    if iters == 0 {
        return Err(BkrError::Empty("indicator table"));
    }
    if above.iter().any(|(_, a)| a.len() != iters) {
        return Err(BkrError::UnsharedStreams);
    }
    let mut stmts: Vec<(PairStatement, Vec<bool>)> = above
        .iter()
        .map(|&((i, j), a)| {
            let p = a.iter().filter(|&&x| x).count() as f64 / iters as f64;
            let (direction, holds, prob) = if p > 0.5 {
                (Direction::Dependent, a.to_vec(), p)
            } else {
                (Direction::Independent, a.iter().map(|&x| !x).collect(), 1.0 - p)
            };
            let (i, j) = if i < j { (i, j) } else { (j, i) };
            (
                PairStatement {
                    i,
                    j,
                    direction,
                    marginal_probability: prob,
                },
                holds,
            )
        })
        .collect();
    stmts.sort_by(|a, b| {
        b.0.marginal_probability
            .total_cmp(&a.0.marginal_probability)
            .then((a.0.i, a.0.j).cmp(&(b.0.i, b.0.j)))
    });

    let mut all_hold = vec![true; iters];
    let mut accepted = Vec::new();
    let mut joint = None;
    let mut next = None;
    for (s, holds) in &stmts {
        for (acc, &h) in all_hold.iter_mut().zip(holds) {
            *acc = *acc && h;
        }
        let p = all_hold.iter().filter(|&&x| x).count() as f64 / iters as f64;
        if p > gamma {
            accepted.push(*s);
            joint = Some(p);
        } else {
            next = Some(p);
            break;
        }
    }
    Ok(JointReport {
        gamma,
        accepted,
        joint_probability: joint,
        next_joint_probability: next,
        ranked: stmts.into_iter().map(|(s, _)| s).collect(),
    })
}

/// Joint acceptance over a shared-weight pairwise run.
pub fn joint_accept<T: Scalar>(matrix: &PairwiseMatrix<T>, gamma: f64) -> Result<JointReport> {
    if !matrix.shared_weights {
        return Err(BkrError::UnsharedStreams);
    }
    let table: Vec<((usize, usize), &[bool])> = matrix
        .pairs
        .iter()
        .map(|p| ((p.i, p.j), p.above_ropi()))
        .collect();
    joint_accept_indicators(&table, gamma)
}
