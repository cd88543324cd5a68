//! Brute-force reference implementations of the fast HSIC paths.
//!
//! Compiled only for tests or with the `oracles` feature. Each routine is a
//! literal transcription of its defining formula with explicit index loops
//! and refuses inputs above a small size guard.

use crate::dp_posterior::WeightVector;
use crate::error::{BkrError, Result};
use crate::kernels::GramMatrix;
use crate::scalar::Scalar;

pub const TRACE_GUARD: usize = 64;
pub const LOOP_GUARD: usize = 20;

fn guard(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(BkrError::GuardExceeded { n, limit })
    } else {
        Ok(())
    }
}

fn check<T: Scalar>(kx: &GramMatrix<T>, ky: &GramMatrix<T>, w: Option<&WeightVector<T>>) -> Result<usize> {
    let n = kx.n();
    if ky.n() != n || w.is_some_and(|w| w.len() != n) {
        return Err(BkrError::SizeMismatch {
            what: "oracle input",
            expected: n,
            found: ky.n(),
        });
    }
    Ok(n)
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i * n + k] * b[k * n + j];
            }
            c[i * n + j] = s;
        }
    }
    c
}

/// `Tr(Kx R Ky R)` with `R = diag(W) - WᵀW` formed explicitly.
pub fn hsic_trace_naive<T: Scalar>(kx: &GramMatrix<T>, ky: &GramMatrix<T>, w: &WeightVector<T>) -> Result<f64> {
    let n = check(kx, ky, Some(w))?;
    guard(n, TRACE_GUARD)?;
    let w: Vec<f64> = w.as_slice().iter().map(|x| x.as_f64()).collect();
    let mut r = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            r[i * n + j] = if i == j { w[i] } else { 0.0 } - w[i] * w[j];
        }
    }
    let kxm: Vec<f64> = kx.as_slice().iter().map(|x| x.as_f64()).collect();
    let kym: Vec<f64> = ky.as_slice().iter().map(|x| x.as_f64()).collect();
    let p = matmul(&matmul(&matmul(&kxm, &r, n), &kym, n), &r, n);
    Ok((0..n).map(|i| p[i * n + i]).sum())
}

/// The plug-in HSIC as three literal sums over `i, j, q, r`.
pub fn hsic_empirical_naive<T: Scalar>(kx: &GramMatrix<T>, ky: &GramMatrix<T>) -> Result<f64> {
    let n = check(kx, ky, None)?;
    guard(n, LOOP_GUARD)?;
    let x = |i: usize, j: usize| kx.get(i, j).as_f64();
    let y = |i: usize, j: usize| ky.get(i, j).as_f64();
    let nf = n as f64;
    let mut first = 0.0;
    for i in 0..n {
        for j in 0..n {
            first += x(i, j) * y(i, j);
        }
    }
    let mut second = 0.0;
    for i in 0..n {
        for j in 0..n {
            for q in 0..n {
                for r in 0..n {
                    second += x(i, j) * y(q, r);
                }
            }
        }
    }
    let mut third = 0.0;
    for i in 0..n {
        for j in 0..n {
            for q in 0..n {
                third += x(i, j) * y(i, q);
            }
        }
    }
    Ok(first / nf.powi(2) + second / nf.powi(4) - 2.0 * third / nf.powi(3))
}

/// Posterior HSIC as the expectation expansion over the observed atoms:
/// `W(Kx∘Ky)Wᵀ + (WKxWᵀ)(WKyWᵀ) - 2W(KxWᵀ ∘ KyWᵀ)`, with the prior atom
/// dropped (zero prior mass).
pub fn hsic_expanded_loops<T: Scalar>(kx: &GramMatrix<T>, ky: &GramMatrix<T>, w: &WeightVector<T>) -> Result<f64> {
    let n = check(kx, ky, Some(w))?;
    guard(n, LOOP_GUARD)?;
    let w: Vec<f64> = w.as_slice().iter().map(|x| x.as_f64()).collect();
    let x = |i: usize, j: usize| kx.get(i, j).as_f64();
    let y = |i: usize, j: usize| ky.get(i, j).as_f64();
    let mut joint = 0.0;
    let mut wxw = 0.0;
    let mut wyw = 0.0;
    for i in 0..n {
        for j in 0..n {
            joint += w[i] * x(i, j) * y(i, j) * w[j];
            wxw += w[i] * x(i, j) * w[j];
            wyw += w[i] * y(i, j) * w[j];
        }
    }
    let mut cross = 0.0;
    for i in 0..n {
        let kxw: f64 = (0..n).map(|j| x(i, j) * w[j]).sum();
        let kyw: f64 = (0..n).map(|j| y(i, j) * w[j]).sum();
        cross += w[i] * kxw * kyw;
    }
    Ok(joint + wxw * wyw - 2.0 * cross)
}
