//! Draws from the limiting (zero prior mass) Dirichlet-process posterior:
//! flat Dirichlet weights over the observed atoms, plus uniform
//! permutations for the exchangeability correction.
//!
//! Every Monte Carlo iteration reads from its own ChaCha stream, so results
//! do not depend on how iterations are scheduled across threads.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{BkrError, Result};
use crate::scalar::Scalar;

/// A reproducible random stream: `(seed, stream id)` always yields the
/// same sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

const TAG_WEIGHTS: u64 = 0;
const TAG_PERMUTATION: u64 = 1;
const TAG_LANDMARKS: u64 = 2;
const TAG_TAU: u64 = 3;
const TAG_NHST: u64 = 4;
const TAG_DATA: u64 = 5;
const TAG_SUBSEED: u64 = 6;

// stream id layout: [tag:8][a:24][b:32]
fn layout(tag: u64, a: u64, b: u64) -> u64 {
    debug_assert!(a < (1 << 24), "stream sub-index out of range");
    (tag << 56) | ((a & 0xFF_FFFF) << 32) | (b & 0xFFFF_FFFF)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Posterior weights of Monte Carlo iteration `t`; shared by every pair
    /// analysed under the same seed.
    pub fn weights(seed: u64, t: usize) -> Self {
        Self::new(seed, layout(TAG_WEIGHTS, 0, t as u64))
    }

    /// Exchangeability permutation of pair `pair` at iteration `t`.
    pub fn permutation(seed: u64, pair: usize, t: usize) -> Self {
        Self::new(seed, layout(TAG_PERMUTATION, pair as u64, t as u64))
    }

    /// Separate draws used when the correction has its own budget.
    pub fn tau(seed: u64, pair: usize, t: usize) -> Self {
        Self::new(seed, layout(TAG_TAU, pair as u64, t as u64))
    }

    /// Nyström landmark selection for column `column`.
    pub fn landmarks(seed: u64, column: usize) -> Self {
        Self::new(seed, layout(TAG_LANDMARKS, 0, column as u64))
    }

    /// Null permutation `b` of the frequentist test for pair `pair`.
    pub fn nhst(seed: u64, pair: usize, b: usize) -> Self {
        Self::new(seed, layout(TAG_NHST, pair as u64, b as u64))
    }

    /// Synthetic data generation for replicate `rep`.
    pub fn data(seed: u64, rep: usize) -> Self {
        Self::new(seed, layout(TAG_DATA, 0, rep as u64))
    }

    /// A derived master seed, e.g. for replicate `rep` of a benchmark.
    pub fn subseed(seed: u64, rep: usize) -> u64 {
        Self::new(seed, layout(TAG_SUBSEED, 0, rep as u64)).rng().random()
    }
}

/// One posterior draw `W`: nonnegative weights on the observed atoms
/// summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector<T>(Vec<T>);

impl<T: Scalar> WeightVector<T> {
    /// Validates an explicit weight vector (nonnegative, finite, sum 1 to
    /// within `1e-9`).
    pub fn new(w: Vec<T>) -> Result<Self> {
        if w.is_empty() {
            return Err(BkrError::Empty("weight vector"));
        }
        if w.iter().any(|&x| !x.is_finite() || x < T::zero()) {
            return Err(BkrError::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let s: f64 = w.iter().map(|x| x.as_f64()).sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(BkrError::InvalidArgument(format!("weights sum to {s}, not 1")));
        }
        Ok(WeightVector(w))
    }

    /// The simplex vertex putting all mass on atom `i`.
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut w = vec![T::zero(); n];
        w[i] = T::one();
        WeightVector(w)
    }

    /// Uniform weights `1/n`.
    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![T::one() / T::of_usize(n); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

/// A bijection of `{0, …, n-1}`; entry `i` is `π(i)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn new(p: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; p.len()];
        for &i in &p {
            if i >= p.len() || std::mem::replace(&mut seen[i], true) {
                return Err(BkrError::InvalidArgument("not a permutation".into()));
            }
        }
        Ok(Permutation(p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Flat Dirichlet draw over `n` atoms: `n` unit exponentials normalised by
/// their sum.
pub fn sample_weights<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<WeightVector<T>> {
    if n == 0 {
        return Err(BkrError::Empty("weight vector"));
    }
    let e: Vec<f64> = (0..n).map(|_| rng.sample(Exp1)).collect();
    let total: f64 = e.iter().sum();
    Ok(WeightVector(e.into_iter().map(|x| T::of(x / total)).collect()))
}

/// Uniform permutation of `{0, …, n-1}` (Fisher–Yates).
pub fn sample_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Permutation> {
    if n == 0 {
        return Err(BkrError::Empty("permutation"));
    }
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    Ok(Permutation(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_weight_is_one() {
        let w: WeightVector<f64> = sample_weights(1, &mut RngStream::new(1, 0).rng()).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);
    }

    #[test]
    fn weights_on_simplex() {
        let mut rng = RngStream::new(7, 0).rng();
        for n in [2, 5, 100, 1000] {
            let w: WeightVector<f64> = sample_weights(n, &mut rng).unwrap();
            assert!(w.as_slice().iter().all(|&x| x >= 0.0));
            let s: f64 = w.as_slice().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_length_rejected() {
        let mut rng = RngStream::new(0, 0).rng();
        assert!(sample_weights::<f64, _>(0, &mut rng).is_err());
        assert!(sample_permutation(0, &mut rng).is_err());
    }

    #[test]
    fn permutation_basics() {
        let mut rng = RngStream::new(3, 9).rng();
        assert_eq!(sample_permutation(1, &mut rng).unwrap(), Permutation::identity(1));
        for _ in 0..50 {
            let mut p = sample_permutation(17, &mut rng).unwrap().0;
            p.sort_unstable();
            assert_eq!(p, (0..17).collect::<Vec<_>>());
        }
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![1, 2]).is_err());
    }

    #[test]
    fn s3_permutations_uniform() {
        // All 6 elements of S3, enumerated by hand.
        let all = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let draws = 60_000;
        let mut counts = [0usize; 6];
        let mut rng = RngStream::new(11, 0).rng();
        for _ in 0..draws {
            let p = sample_permutation(3, &mut rng).unwrap();
            let k = all.iter().position(|a| a[..] == p.0[..]).unwrap();
            counts[k] += 1;
        }
        let p = 1.0 / 6.0;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: WeightVector<f64> = sample_weights(20, &mut RngStream::weights(5, 3).rng()).unwrap();
        let b: WeightVector<f64> = sample_weights(20, &mut RngStream::weights(5, 3).rng()).unwrap();
        let c: WeightVector<f64> = sample_weights(20, &mut RngStream::weights(5, 4).rng()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(RngStream::permutation(5, 0, 3), RngStream::weights(5, 3));
        let p1 = sample_permutation(30, &mut RngStream::permutation(5, 2, 1).rng()).unwrap();
        let p2 = sample_permutation(30, &mut RngStream::permutation(5, 2, 1).rng()).unwrap();
        assert_eq!(p1, p2);
    }

    fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn weights_exchangeable() {
        let n = 8;
        let draws = 10_000;
        let mut first = Vec::with_capacity(draws);
        let mut last = Vec::with_capacity(draws);
        for t in 0..draws {
            let w: WeightVector<f64> = sample_weights(n, &mut RngStream::weights(21, t).rng()).unwrap();
            first.push(w.as_slice()[0]);
            last.push(w.as_slice()[n - 1]);
        }
        let d = ks_two_sample(first, last);
        // two-sample KS critical value at 1%: 1.628 * sqrt(2/m)
        let crit = 1.628 * (2.0 / draws as f64).sqrt();
        assert!(d < crit, "KS {d} >= {crit}");
    }
}
