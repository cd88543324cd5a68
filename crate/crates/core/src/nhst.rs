//! Permutation test of independence on the plug-in HSIC statistic, used as
//! the frequentist baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp_posterior::{sample_permutation, RngStream};
use crate::error::{BkrError, Result};
use crate::hsic::{empirical_with, EmpiricalCache};
use crate::kernels::GramMatrix;
use crate::scalar::Scalar;

pub const DEFAULT_PERMUTATIONS: usize = 500;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NhstConfig {
    pub n_perm: usize,
    /// Per-test significance level (already corrected if needed).
    pub alpha: f64,
    pub seed: u64,
}

impl Default for NhstConfig {
    fn default() -> Self {
        NhstConfig {
            n_perm: DEFAULT_PERMUTATIONS,
            alpha: DEFAULT_ALPHA,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NhstResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_permutations: usize,
    pub alpha: f64,
    pub rejected: bool,
}

/// Permutation p-value `(1 + #{b : HSIC_b ≥ HSIC}) / (B + 1)`.
pub fn hsic_permutation_test<T: Scalar>(
    kx: &GramMatrix<T>,
    ky: &GramMatrix<T>,
    cfg: &NhstConfig,
) -> Result<NhstResult> {
    hsic_permutation_test_pair(kx, ky, cfg, 0)
}

/// As [`hsic_permutation_test`], drawing permutations from the stream of
/// pair `pair` so that tests within one family are independent.
pub fn hsic_permutation_test_pair<T: Scalar>(
    kx: &GramMatrix<T>,
    ky: &GramMatrix<T>,
    cfg: &NhstConfig,
    pair: usize,
) -> Result<NhstResult> {
    let n = kx.n();
    if ky.n() != n {
        return Err(BkrError::SizeMismatch {
            what: "Ky",
            expected: n,
            found: ky.n(),
        });
    }
    if n < 2 {
        return Err(BkrError::InvalidArgument("permutation test needs n >= 2".into()));
    }
    if cfg.n_perm == 0 {
        return Err(BkrError::InvalidArgument("need at least one permutation".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(BkrError::InvalidArgument(format!("alpha {} outside (0, 1)", cfg.alpha)));
    }
    let cache = EmpiricalCache::new(kx, ky);
    let stat = empirical_with(kx, ky, None, &cache);
    let exceed = (0..cfg.n_perm)
        .into_par_iter()
        .map(|b| -> Result<usize> {
            let p = sample_permutation(n, &mut RngStream::nhst(cfg.seed, pair, b).rng())?;
            Ok(usize::from(empirical_with(kx, ky, Some(p.as_slice()), &cache) >= stat))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    let p_value = (1 + exceed) as f64 / (cfg.n_perm + 1) as f64;
    Ok(NhstResult {
        statistic: stat.as_f64(),
        p_value,
        n_permutations: cfg.n_perm,
        alpha: cfg.alpha,
        rejected: p_value < cfg.alpha,
    })
}

/// Per-test level controlling the family-wise error of `k` tests at `alpha`.
///
/// # Panics
/// If `k == 0`.
pub fn bonferroni(alpha: f64, k: usize) -> f64 {
    assert!(k > 0, "Bonferroni correction over zero tests");
    alpha / k as f64
}
