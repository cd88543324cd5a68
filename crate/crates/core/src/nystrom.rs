//! Nyström feature maps: `K ≈ K_nm K_mm⁻¹ K_mn = φφᵀ` from `m` landmark rows.

use nalgebra::DMatrix;
use rand::seq::index;

use crate::data::Column;
use crate::dp_posterior::RngStream;
use crate::error::{BkrError, Result};
use crate::kernels::{ColumnKernel, GramMatrix, KernelSpec};
use crate::scalar::Scalar;

/// Eigenvalues of `K_mm` at or below this fraction of the largest one are
/// treated as null directions.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Default number of landmarks when the caller does not choose one.
pub const DEFAULT_LANDMARKS: usize = 128;

/// Row-major `n × r` feature matrix with `φφᵀ ≈ K`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    n: usize,
    r: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn from_row_major(n: usize, r: usize, data: Vec<T>) -> Result<Self> {
        if r == 0 {
            return Err(BkrError::InvalidArgument("feature matrix needs at least one column".into()));
        }
        if data.len() != n * r {
            return Err(BkrError::SizeMismatch {
                what: "feature matrix data",
                expected: n * r,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(BkrError::NonFinite("feature matrix"));
        }
        Ok(FeatureMatrix { n, r, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.r..(i + 1) * self.r]
    }

    /// The implied kernel approximation `φφᵀ`.
    pub fn gram(&self) -> GramMatrix<T> {
        GramMatrix::from_fn(self.n, |i, j| {
            self.row(i)
                .iter()
                .zip(self.row(j))
                .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
        })
    }
}

/// Features from an explicit landmark set: eigendecompose `K_mm`, keep the
/// eigenpairs above the relative cutoff, and set `φ = K_nm U Λ^{-1/2}`.
pub fn nystrom_from_landmarks<T: Scalar>(
    n: usize,
    landmarks: &[usize],
    kernel: impl Fn(usize, usize) -> T,
) -> Result<FeatureMatrix<T>> {
    let m = landmarks.len();
    if m == 0 || m > n {
        return Err(BkrError::InvalidArgument(format!(
            "landmark count {m} must be in 1..={n}"
        )));
    }
    let kmm = DMatrix::<f64>::from_fn(m, m, |a, b| kernel(landmarks[a], landmarks[b]).as_f64());
    let eig = kmm.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if lmax.is_nan() || lmax <= 0.0 {
        return Err(BkrError::DegenerateKernel {
            variable: "landmark block".into(),
            value: lmax,
            floor: 0.0,
        });
    }
    let keep: Vec<usize> = (0..m)
        .filter(|&k| eig.eigenvalues[k] > RANK_CUTOFF * lmax)
        .collect();
    // projection[a][k] = U[a][k] / sqrt(λ_k)
    let r = keep.len();
    let mut proj = vec![0.0f64; m * r];
    for a in 0..m {
        for (c, &k) in keep.iter().enumerate() {
            proj[a * r + c] = eig.eigenvectors[(a, k)] / eig.eigenvalues[k].sqrt();
        }
    }
    let mut data = Vec::with_capacity(n * r);
    let mut knm = vec![0.0f64; m];
    for i in 0..n {
        for (a, &l) in landmarks.iter().enumerate() {
            knm[a] = kernel(i, l).as_f64();
        }
        for c in 0..r {
            let v: f64 = (0..m).map(|a| knm[a] * proj[a * r + c]).sum();
            data.push(T::of(v));
        }
    }
    FeatureMatrix::from_row_major(n, r, data)
}

/// Nyström features of a column: `m` landmarks drawn uniformly without
/// replacement from the rows using `rng`.
pub fn nystrom_features<T: Scalar>(
    column: &Column<T>,
    spec: KernelSpec,
    m: usize,
    rng: RngStream,
) -> Result<FeatureMatrix<T>> {
    let kernel = ColumnKernel::new(column, spec)?;
    nystrom_for_kernel(&kernel, m, rng)
}

pub(crate) fn nystrom_for_kernel<T: Scalar>(
    kernel: &ColumnKernel<'_, T>,
    m: usize,
    rng: RngStream,
) -> Result<FeatureMatrix<T>> {
    let n = kernel.n();
    if m == 0 || m > n {
        return Err(BkrError::InvalidArgument(format!(
            "landmark count {m} must be in 1..={n}"
        )));
    }
    let mut landmarks = index::sample(&mut rng.rng(), n, m).into_vec();
    landmarks.sort_unstable();
    nystrom_from_landmarks(n, &landmarks, |i, j| kernel.eval(i, j))
}
