//! Posterior HSIC draws and the empirical (plug-in) HSIC.
//!
//! For a posterior weight vector `W` and `R = diag(W) - WᵀW`, a posterior
//! draw is `Tr(Kx R Ky R)`. It is evaluated through the Schur-product
//! expansion
//!
//! ```text
//! W(Kx ∘ Ky)Wᵀ - 2·W(KxWᵀ ∘ KyWᵀ) + (WKxWᵀ)(WKyWᵀ)
//! ```
//!
//! which costs `O(n²)` and never forms `R`. With Nyström features
//! `K ≈ φφᵀ` the same quantity is `‖φxᵀ R φy‖²_F`, costing `O(n·m·m')`.

use crate::dp_posterior::WeightVector;
use crate::error::{BkrError, Result};
use crate::kernels::GramMatrix;
use crate::nystrom::FeatureMatrix;
use crate::scalar::Scalar;

// Fixed-order four-lane reductions. Every exact-path quantity goes through
// these two helpers, so identical inputs give bitwise-identical outputs
// regardless of which public entry point computed them.
#[inline]
fn dot<T: Scalar>(a: &[T], w: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] = acc[0] + a[k] * w[k];
        acc[1] = acc[1] + a[k + 1] * w[k + 1];
        acc[2] = acc[2] + a[k + 2] * w[k + 2];
        acc[3] = acc[3] + a[k + 3] * w[k + 3];
    }
    let mut tail = T::zero();
    for k in 4 * chunks..a.len() {
        tail = tail + a[k] * w[k];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

#[inline]
fn dot3<T: Scalar>(a: &[T], b: &[T], w: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] = acc[0] + a[k] * b[k] * w[k];
        acc[1] = acc[1] + a[k + 1] * b[k + 1] * w[k + 1];
        acc[2] = acc[2] + a[k + 2] * b[k + 2] * w[k + 2];
        acc[3] = acc[3] + a[k + 3] * b[k + 3] * w[k + 3];
    }
    let mut tail = T::zero();
    for k in 4 * chunks..a.len() {
        tail = tail + a[k] * b[k] * w[k];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// Per-draw quantities of one variable on the exact path: `a = K Wᵀ`,
/// `W a`, and the self-HSIC.
#[derive(Clone, Debug)]
pub(crate) struct ExactDraw<T> {
    a: Vec<T>,
    wa: T,
    pub(crate) h_self: T,
}

fn combine<T: Scalar>(w: &[T], c: &[T], ax: &[T], ay: &[T], wax: T, way: T) -> T {
    let t1 = dot(c, w);
    let t2 = dot3(ax, ay, w);
    t1 - T::of(2.0) * t2 + wax * way
}

pub(crate) fn exact_draw<T: Scalar>(k: &GramMatrix<T>, w: &[T]) -> ExactDraw<T> {
    let n = k.n();
    let mut a = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for i in 0..n {
        let row = k.row(i);
        a.push(dot(row, w));
        s.push(dot3(row, row, w));
    }
    let wa = dot(&a, w);
    let h_self = combine(w, &s, &a, &a, wa, wa);
    ExactDraw { a, wa, h_self }
}

pub(crate) fn exact_cross<T: Scalar>(
    kx: &GramMatrix<T>,
    ky: &GramMatrix<T>,
    w: &[T],
    dx: &ExactDraw<T>,
    dy: &ExactDraw<T>,
) -> T {
    let c: Vec<T> = (0..kx.n()).map(|i| dot3(kx.row(i), ky.row(i), w)).collect();
    combine(w, &c, &dx.a, &dy.a, dx.wa, dy.wa)
}

/// HSIC draw between `Kx` and `Ky` re-indexed by `perm` in rows and columns.
pub(crate) fn exact_cross_permuted<T: Scalar>(
    kx: &GramMatrix<T>,
    ky: &GramMatrix<T>,
    perm: &[usize],
    w: &[T],
    dx: &ExactDraw<T>,
) -> T {
    let n = kx.n();
    let mut g = vec![T::zero(); n];
    let mut ay = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    for i in 0..n {
        let src = ky.row(perm[i]);
        for (gj, &pj) in g.iter_mut().zip(perm) {
            *gj = src[pj];
        }
        ay.push(dot(&g, w));
        c.push(dot3(kx.row(i), &g, w));
    }
    let way = dot(&ay, w);
    combine(w, &c, &dx.a, &ay, dx.wa, way)
}

fn check_sizes<T: Scalar>(kx: &GramMatrix<T>, ky: &GramMatrix<T>, w: &WeightVector<T>) -> Result<()> {
    if ky.n() != kx.n() {
        return Err(BkrError::SizeMismatch {
            what: "Ky",
            expected: kx.n(),
            found: ky.n(),
        });
    }
    if w.len() != kx.n() {
        return Err(BkrError::SizeMismatch {
            what: "weight vector",
            expected: kx.n(),
            found: w.len(),
        });
    }
    Ok(())
}

/// One posterior HSIC draw, `Tr(Kx R Ky R)` with `R = diag(W) - WᵀW`.
pub fn hsic_sample<T: Scalar>(kx: &GramMatrix<T>, ky: &GramMatrix<T>, w: &WeightVector<T>) -> Result<T> {
    check_sizes(kx, ky, w)?;
    let w = w.as_slice();
    let dx = exact_draw(kx, w);
    let dy = exact_draw(ky, w);
    Ok(exact_cross(kx, ky, w, &dx, &dy))
}

/// `hsic_sample(Kx, Ky_π, W)` where `(Ky_π)[i][j] = Ky[π(i)][π(j)]`, i.e.
/// the data re-paired as `(Xᵢ, Y_π(i))`. Does not materialise `Ky_π`.
pub fn hsic_sample_permuted<T: Scalar>(
    kx: &GramMatrix<T>,
    ky: &GramMatrix<T>,
    perm: &crate::dp_posterior::Permutation,
    w: &WeightVector<T>,
) -> Result<T> {
    check_sizes(kx, ky, w)?;
    if perm.len() != kx.n() {
        return Err(BkrError::SizeMismatch {
            what: "permutation",
            expected: kx.n(),
            found: perm.len(),
        });
    }
    let w = w.as_slice();
    let dx = exact_draw(kx, w);
    Ok(exact_cross_permuted(kx, ky, perm.as_slice(), w, &dx))
}

/// Row sums and totals reused across permutations of the plug-in statistic.
pub(crate) struct EmpiricalCache<T> {
    rx: Vec<T>,
    ry: Vec<T>,
    sx: T,
    sy: T,
}

impl<T: Scalar> EmpiricalCache<T> {
    pub(crate) fn new(kx: &GramMatrix<T>, ky: &GramMatrix<T>) -> Self {
        let rx: Vec<T> = (0..kx.n()).map(|i| kx.row(i).iter().copied().sum()).collect();
        let ry: Vec<T> = (0..ky.n()).map(|i| ky.row(i).iter().copied().sum()).collect();
        let sx = rx.iter().copied().sum();
        let sy = ry.iter().copied().sum();
        EmpiricalCache { rx, ry, sx, sy }
    }
}

/// Plug-in HSIC of `(Kx, Ky_π)`; `perm = None` means the identity. Both
/// branches perform the same arithmetic, so the identity permutation
/// reproduces the unpermuted statistic exactly.
pub(crate) fn empirical_with<T: Scalar>(
    kx: &GramMatrix<T>,
    ky: &GramMatrix<T>,
    perm: Option<&[usize]>,
    cache: &EmpiricalCache<T>,
) -> T {
    let n = kx.n();
    let nf = T::of_usize(n);
    let mut g = vec![T::zero(); n];
    let mut cross = T::zero();
    let mut rowdot = T::zero();
    for i in 0..n {
        let kxr = kx.row(i);
        let (row, ry_i) = match perm {
            None => (ky.row(i), cache.ry[i]),
            Some(p) => {
                let src = ky.row(p[i]);
                for (gj, &pj) in g.iter_mut().zip(p) {
                    *gj = src[pj];
                }
                (&g[..], cache.ry[p[i]])
            }
        };
        let mut acc = T::zero();
        for (&a, &b) in kxr.iter().zip(row) {
            acc = acc + a * b;
        }
        cross = cross + acc;
        rowdot = rowdot + cache.rx[i] * ry_i;
    }
    let n2 = nf * nf;
    cross / n2 + cache.sx * cache.sy / (n2 * n2) - T::of(2.0) * rowdot / (n2 * nf)
}

/// Plug-in (V-statistic) HSIC estimate:
///
/// ```text
/// (1/n²) Σᵢⱼ Kxᵢⱼ Kyᵢⱼ + (1/n⁴) (Σᵢⱼ Kxᵢⱼ)(Σ_qr Ky_qr) - (2/n³) Σᵢⱼq Kxᵢⱼ Kyᵢq
/// ```
pub fn hsic_empirical<T: Scalar>(kx: &GramMatrix<T>, ky: &GramMatrix<T>) -> Result<T> {
    if ky.n() != kx.n() {
        return Err(BkrError::SizeMismatch {
            what: "Ky",
            expected: kx.n(),
            found: ky.n(),
        });
    }
    if kx.n() < 2 {
        return Err(BkrError::InvalidArgument("empirical HSIC needs n >= 2".into()));
    }
    let cache = EmpiricalCache::new(kx, ky);
    Ok(empirical_with(kx, ky, None, &cache))
}

/// Per-draw quantities of one variable on the low-rank path: `a = φᵀWᵀ`
/// and the self-HSIC `‖φᵀRφ‖²_F`.
#[derive(Clone, Debug)]
pub(crate) struct LowRankDraw<T> {
    a: Vec<T>,
    pub(crate) h_self: T,
}

fn weighted_sum_rows<T: Scalar>(phi: &FeatureMatrix<T>, w: &[T], perm: Option<&[usize]>) -> Vec<T> {
    let r = phi.rank();
    let mut a = vec![T::zero(); r];
    for (i, &wi) in w.iter().enumerate() {
        let row = phi.row(perm.map_or(i, |p| p[i]));
        for (ap, &v) in a.iter_mut().zip(row) {
            *ap = *ap + wi * v;
        }
    }
    a
}

/// `‖φxᵀ diag(W) φy_π - (φxᵀWᵀ)(Wφy_π)‖²_F`.
fn lowrank_cross_impl<T: Scalar>(
    px: &FeatureMatrix<T>,
    py: &FeatureMatrix<T>,
    w: &[T],
    ax: &[T],
    ay: &[T],
    perm: Option<&[usize]>,
) -> T {
    let (rx, ry) = (px.rank(), py.rank());
    let mut m = vec![T::zero(); rx * ry];
    for (i, &wi) in w.iter().enumerate() {
        let xr = px.row(i);
        let yr = py.row(perm.map_or(i, |p| p[i]));
        for (p, &xv) in xr.iter().enumerate() {
            let s = wi * xv;
            let out = &mut m[p * ry..(p + 1) * ry];
            for (o, &yv) in out.iter_mut().zip(yr) {
                *o = *o + s * yv;
            }
        }
    }
    let mut total = T::zero();
    for p in 0..rx {
        for q in 0..ry {
            let d = m[p * ry + q] - ax[p] * ay[q];
            total = total + d * d;
        }
    }
    total
}

pub(crate) fn lowrank_draw<T: Scalar>(phi: &FeatureMatrix<T>, w: &[T]) -> LowRankDraw<T> {
    let a = weighted_sum_rows(phi, w, None);
    let h_self = lowrank_cross_impl(phi, phi, w, &a, &a, None);
    LowRankDraw { a, h_self }
}

pub(crate) fn lowrank_cross<T: Scalar>(
    px: &FeatureMatrix<T>,
    py: &FeatureMatrix<T>,
    w: &[T],
    dx: &LowRankDraw<T>,
    dy: &LowRankDraw<T>,
) -> T {
    lowrank_cross_impl(px, py, w, &dx.a, &dy.a, None)
}

pub(crate) fn lowrank_cross_permuted<T: Scalar>(
    px: &FeatureMatrix<T>,
    py: &FeatureMatrix<T>,
    perm: &[usize],
    w: &[T],
    dx: &LowRankDraw<T>,
) -> T {
    let ay = weighted_sum_rows(py, w, Some(perm));
    lowrank_cross_impl(px, py, w, &dx.a, &ay, Some(perm))
}

/// Low-rank posterior HSIC draw `‖φxᵀ R φy‖²_F`.
pub fn hsic_sample_lowrank<T: Scalar>(
    phi_x: &FeatureMatrix<T>,
    phi_y: &FeatureMatrix<T>,
    w: &WeightVector<T>,
) -> Result<T> {
    if phi_y.n() != phi_x.n() {
        return Err(BkrError::SizeMismatch {
            what: "phi_y rows",
            expected: phi_x.n(),
            found: phi_y.n(),
        });
    }
    if w.len() != phi_x.n() {
        return Err(BkrError::SizeMismatch {
            what: "weight vector",
            expected: phi_x.n(),
            found: w.len(),
        });
    }
    let w = w.as_slice();
    let dx = lowrank_draw(phi_x, w);
    let dy = lowrank_draw(phi_y, w);
    Ok(lowrank_cross(phi_x, phi_y, w, &dx, &dy))
}
