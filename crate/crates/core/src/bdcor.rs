//! Posterior distribution of the bias-corrected Bayesian distance
//! correlation (BdCor) for a variable pair, and the ROPI decision rule.
//!
//! Per Monte Carlo iteration `t`, with a fresh posterior weight draw `W`:
//!
//! ```text
//! V_t = H(X,Y) / sqrt(H(X,X) H(Y,Y))
//! τ_t = H(X,Y_π) / sqrt(H(X,X) H(Y,Y))      π uniform, same W
//! BdCor_t = (V_t - mean(τ)) / (1 - mean(τ))
//! ```
//!
//! where `H` is a posterior HSIC draw. Iteration `t` reads its weights from
//! [`RngStream::weights`] and pair `p`'s permutation from
//! [`RngStream::permutation`], so parallel and serial runs agree bitwise and
//! a single pair analysed alone matches the same pair inside a matrix run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp_posterior::{sample_permutation, sample_weights, RngStream};
use crate::error::{BkrError, Result};
use crate::hsic::{self, ExactDraw, LowRankDraw};
use crate::kernels::GramMatrix;
use crate::nystrom::FeatureMatrix;
use crate::scalar::Scalar;

/// Self-HSIC draws below this are treated as a constant (degenerate) kernel.
pub const DEGENERACY_FLOOR: f64 = 1e-14;

/// Default number of posterior draws.
pub const DEFAULT_MC_SAMPLES: usize = 1000;

/// Number of histogram bins in posterior summaries.
pub const HISTOGRAM_BINS: usize = 50;

/// Monte Carlo settings for a BdCor posterior.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McConfig {
    pub n_mc: usize,
    pub seed: u64,
    /// When set, the exchangeability mean is estimated from this many
    /// independent `(W, π)` draws instead of the permutations coupled to the
    /// main draws.
    pub tau_draws: Option<usize>,
}

impl McConfig {
    pub fn new(n_mc: usize, seed: u64) -> Self {
        McConfig {
            n_mc,
            seed,
            tau_draws: None,
        }
    }
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig::new(DEFAULT_MC_SAMPLES, 0)
    }
}

/// Per-variable, per-draw HSIC machinery, implemented by the exact Gram path
/// and the Nyström feature path.
pub(crate) trait DrawEngine<T: Scalar>: Sync {
    type Draw: Send + Sync;
    fn n(&self) -> usize;
    fn draw(&self, var: usize, w: &[T]) -> Self::Draw;
    fn h_self(d: &Self::Draw) -> T;
    fn cross(&self, x: usize, y: usize, w: &[T], dx: &Self::Draw, dy: &Self::Draw) -> T;
    fn cross_permuted(&self, x: usize, y: usize, perm: &[usize], w: &[T], dx: &Self::Draw) -> T;
}

pub(crate) struct ExactEngine<'a, T> {
    pub grams: Vec<&'a GramMatrix<T>>,
}

impl<T: Scalar> DrawEngine<T> for ExactEngine<'_, T> {
    type Draw = ExactDraw<T>;
    fn n(&self) -> usize {
        self.grams[0].n()
    }
    fn draw(&self, var: usize, w: &[T]) -> ExactDraw<T> {
        hsic::exact_draw(self.grams[var], w)
    }
    fn h_self(d: &ExactDraw<T>) -> T {
        d.h_self
    }
    fn cross(&self, x: usize, y: usize, w: &[T], dx: &ExactDraw<T>, dy: &ExactDraw<T>) -> T {
        hsic::exact_cross(self.grams[x], self.grams[y], w, dx, dy)
    }
    fn cross_permuted(&self, x: usize, y: usize, perm: &[usize], w: &[T], dx: &ExactDraw<T>) -> T {
        hsic::exact_cross_permuted(self.grams[x], self.grams[y], perm, w, dx)
    }
}

pub(crate) struct LowRankEngine<'a, T> {
    pub features: Vec<&'a FeatureMatrix<T>>,
}

impl<T: Scalar> DrawEngine<T> for LowRankEngine<'_, T> {
    type Draw = LowRankDraw<T>;
    fn n(&self) -> usize {
        self.features[0].n()
    }
    fn draw(&self, var: usize, w: &[T]) -> LowRankDraw<T> {
        hsic::lowrank_draw(self.features[var], w)
    }
    fn h_self(d: &LowRankDraw<T>) -> T {
        d.h_self
    }
    fn cross(&self, x: usize, y: usize, w: &[T], dx: &LowRankDraw<T>, dy: &LowRankDraw<T>) -> T {
        hsic::lowrank_cross(self.features[x], self.features[y], w, dx, dy)
    }
    fn cross_permuted(&self, x: usize, y: usize, perm: &[usize], w: &[T], dx: &LowRankDraw<T>) -> T {
        hsic::lowrank_cross_permuted(self.features[x], self.features[y], perm, w, dx)
    }
}

/// Raw per-iteration output for one pair: normalised HSIC ratios `V_t` and
/// the normalised permuted ratios `τ_t`.
pub(crate) struct PairTrace<T> {
    pub ratios: Vec<T>,
    pub taus: Vec<T>,
}

fn clamp0<T: Scalar>(x: T) -> T {
    x.max(T::zero())
}

fn check_self<T: Scalar>(h: T, name: &str) -> Result<()> {
    if h < T::of(DEGENERACY_FLOOR) || h.is_nan() {
        return Err(BkrError::DegenerateKernel {
            variable: name.to_string(),
            value: h.as_f64(),
            floor: DEGENERACY_FLOOR,
        });
    }
    Ok(())
}

/// Runs `n_mc` iterations over all `pairs` with one shared weight draw per
/// iteration. `pair_ids[p]` selects the permutation stream of pair `p`.
pub(crate) fn run_pairs<T: Scalar, E: DrawEngine<T>>(
    engine: &E,
    n_vars: usize,
    pairs: &[(usize, usize)],
    pair_ids: &[usize],
    names: &[String],
    cfg: &McConfig,
) -> Result<Vec<PairTrace<T>>> {
    let n = engine.n();
    let mut used = vec![false; n_vars];
    for &(x, y) in pairs {
        used[x] = true;
        used[y] = true;
    }
    let per_iter: Vec<Result<Vec<(T, T)>>> = (0..cfg.n_mc)
        .into_par_iter()
        .map(|t| {
            let w: Vec<T> = sample_weights(n, &mut RngStream::weights(cfg.seed, t).rng())?
                .as_slice()
                .to_vec();
            let draws: Vec<Option<E::Draw>> = (0..n_vars)
                .map(|v| used[v].then(|| engine.draw(v, &w)))
                .collect();
            for (v, d) in draws.iter().enumerate() {
                if let Some(d) = d {
                    check_self(E::h_self(d), &names[v])?;
                }
            }
            let mut out = Vec::with_capacity(pairs.len());
            for (&(x, y), &pid) in pairs.iter().zip(pair_ids) {
                let dx = draws[x].as_ref().expect("drawn");
                let dy = draws[y].as_ref().expect("drawn");
                let denom = (E::h_self(dx) * E::h_self(dy)).sqrt();
                let hxy = engine.cross(x, y, &w, dx, dy);
                let perm = sample_permutation(n, &mut RngStream::permutation(cfg.seed, pid, t).rng())?;
                let hperm = engine.cross_permuted(x, y, perm.as_slice(), &w, dx);
                out.push((clamp0(hxy) / denom, clamp0(hperm) / denom));
            }
            Ok(out)
        })
        .collect();

    let mut traces: Vec<PairTrace<T>> = pairs
        .iter()
        .map(|_| PairTrace {
            ratios: Vec::with_capacity(cfg.n_mc),
            taus: Vec::with_capacity(cfg.n_mc),
        })
        .collect();
    for r in per_iter {
        for (trace, (v, tau)) in traces.iter_mut().zip(r?) {
            trace.ratios.push(v);
            trace.taus.push(tau);
        }
    }

    if let Some(budget) = cfg.tau_draws {
        for (trace, (&(x, y), &pid)) in traces.iter_mut().zip(pairs.iter().zip(pair_ids)) {
            trace.taus = independent_taus(engine, x, y, pid, names, cfg.seed, budget)?;
        }
    }
    Ok(traces)
}

fn independent_taus<T: Scalar, E: DrawEngine<T>>(
    engine: &E,
    x: usize,
    y: usize,
    pid: usize,
    names: &[String],
    seed: u64,
    budget: usize,
) -> Result<Vec<T>> {
    let n = engine.n();
    (0..budget)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngStream::tau(seed, pid, t).rng();
            let w: Vec<T> = sample_weights(n, &mut rng)?.as_slice().to_vec();
            let perm = sample_permutation(n, &mut rng)?;
            let dx = engine.draw(x, &w);
            let dy = engine.draw(y, &w);
            check_self(E::h_self(&dx), &names[x])?;
            check_self(E::h_self(&dy), &names[y])?;
            let denom = (E::h_self(&dx) * E::h_self(&dy)).sqrt();
            Ok(clamp0(engine.cross_permuted(x, y, perm.as_slice(), &w, &dx)) / denom)
        })
        .collect::<Vec<Result<T>>>()
        .into_iter()
        .collect()
}

/// Posterior BdCor draws for one pair together with the estimated
/// exchangeability mean `E(τ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSamples<T> {
    samples: Vec<T>,
    tau_mean: T,
}

impl<T: Scalar> PosteriorSamples<T> {
    pub(crate) fn from_trace(trace: &PairTrace<T>) -> Result<Self> {
        let tau_mean = trace.taus.iter().copied().fold(T::zero(), |a, b| a + b) / T::of_usize(trace.taus.len());
        if tau_mean.is_nan() || tau_mean >= T::one() {
            return Err(BkrError::DegenerateTau(tau_mean.as_f64()));
        }
        let scale = T::one() - tau_mean;
        let samples = trace.ratios.iter().map(|&v| (v - tau_mean) / scale).collect();
        Ok(PosteriorSamples { samples, tau_mean })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn n_mc(&self) -> usize {
        self.samples.len()
    }

    pub fn tau_mean(&self) -> T {
        self.tau_mean
    }

    pub fn mean(&self) -> T {
        self.samples.iter().copied().fold(T::zero(), |a, b| a + b) / T::of_usize(self.samples.len())
    }

    /// Fraction of draws strictly above `ropi`.
    pub fn prob_above(&self, ropi: T) -> T {
        let k = self.samples.iter().filter(|&&s| s > ropi).count();
        T::of_usize(k) / T::of_usize(self.samples.len())
    }

    /// Linear-interpolation quantile of the draws, `q ∈ [0, 1]`.
    pub fn quantile(&self, q: f64) -> T {
        let mut s: Vec<f64> = self.samples.iter().map(|x| x.as_f64()).collect();
        s.sort_by(f64::total_cmp);
        let h = (s.len() - 1) as f64 * q.clamp(0.0, 1.0);
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        T::of(s[lo] + (h - lo as f64) * (s[hi] - s[lo]))
    }

    /// Uniform histogram over `[min, max]` of the draws.
    pub fn histogram(&self, bins: usize) -> Histogram {
        let vals: Vec<f64> = self.samples.iter().map(|x| x.as_f64()).collect();
        Histogram::new(&vals, bins)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Bins are `[lo + k·w, lo + (k+1)·w)`, the last one closed. When all
    /// values coincide every count lands in the first bin.
    pub fn new(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0; bins];
        let width = (hi - lo) / bins as f64;
        for &v in values {
            let k = if width > 0.0 {
                (((v - lo) / width) as usize).min(bins - 1)
            } else {
                0
            };
            counts[k] += 1;
        }
        Histogram { lo, hi, counts }
    }
}

/// ROPI decision outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionLabel {
    Dependent,
    Independent,
    Undecided,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub label: DecisionLabel,
    pub p_dependent: f64,
    pub p_independent: f64,
    pub ropi: f64,
    pub threshold: f64,
}

/// Declares dependence when `P(BdCor > ropi) > threshold`, independence when
/// `P(BdCor ≤ ropi) > threshold`, and nothing otherwise.
pub fn decide<T: Scalar>(samples: &PosteriorSamples<T>, ropi: f64, threshold: f64) -> Result<Decision> {
    if !(0.0..=1.0).contains(&ropi) {
        return Err(BkrError::InvalidArgument(format!("ropi {ropi} outside [0, 1]")));
    }
    if !(threshold > 0.5 && threshold < 1.0) {
        return Err(BkrError::InvalidArgument(format!(
            "decision threshold {threshold} outside (0.5, 1)"
        )));
    }
    let p_dependent = samples.prob_above(T::of(ropi)).as_f64();
    let p_independent = 1.0 - p_dependent;
    let label = if p_dependent > threshold {
        DecisionLabel::Dependent
    } else if p_independent > threshold {
        DecisionLabel::Independent
    } else {
        DecisionLabel::Undecided
    };
    Ok(Decision {
        label,
        p_dependent,
        p_independent,
        ropi,
        threshold,
    })
}

fn check_mc(n: usize, cfg: &McConfig) -> Result<()> {
    if n < 3 {
        return Err(BkrError::InvalidArgument(format!("BdCor needs n >= 3, got {n}")));
    }
    if cfg.n_mc == 0 {
        return Err(BkrError::InvalidArgument("n_mc must be positive".into()));
    }
    if cfg.tau_draws == Some(0) {
        return Err(BkrError::InvalidArgument("tau budget must be positive".into()));
    }
    Ok(())
}

fn xy_names() -> [String; 2] {
    ["x".to_string(), "y".to_string()]
}

/// Exact-path BdCor posterior from two Gram matrices.
pub fn bdcor_posterior<T: Scalar>(
    kx: &GramMatrix<T>,
    ky: &GramMatrix<T>,
    cfg: &McConfig,
) -> Result<PosteriorSamples<T>> {
    if kx.n() != ky.n() {
        return Err(BkrError::SizeMismatch {
            what: "Ky",
            expected: kx.n(),
            found: ky.n(),
        });
    }
    check_mc(kx.n(), cfg)?;
    let engine = ExactEngine { grams: vec![kx, ky] };
    let traces = run_pairs(&engine, 2, &[(0, 1)], &[0], &xy_names(), cfg)?;
    PosteriorSamples::from_trace(&traces[0])
}

/// Nyström-path BdCor posterior from two feature matrices.
pub fn bdcor_posterior_lowrank<T: Scalar>(
    phi_x: &FeatureMatrix<T>,
    phi_y: &FeatureMatrix<T>,
    cfg: &McConfig,
) -> Result<PosteriorSamples<T>> {
    if phi_x.n() != phi_y.n() {
        return Err(BkrError::SizeMismatch {
            what: "phi_y rows",
            expected: phi_x.n(),
            found: phi_y.n(),
        });
    }
    check_mc(phi_x.n(), cfg)?;
    let engine = LowRankEngine {
        features: vec![phi_x, phi_y],
    };
    let traces = run_pairs(&engine, 2, &[(0, 1)], &[0], &xy_names(), cfg)?;
    PosteriorSamples::from_trace(&traces[0])
}
