//! Gram matrices for numeric, categorical and string data, plus the
//! median-distance bandwidth heuristic.
//!
//! All built-in kernels are bounded in `[0, 1]` with a unit diagonal:
//!
//! ```text
//! rbf:       k(x, y) = exp(-‖x - y‖² / (2ℓ²))
//! indicator: k(a, b) = 1{a == b}
//! edit-rbf:  k(s, t) = exp(-lev(s, t)² / (2ℓ²))
//! ```

use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnData};
use crate::error::{BkrError, Result};
use crate::scalar::Scalar;

/// Symmetric `n × n` matrix of kernel evaluations, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> GramMatrix<T> {
    /// Builds a Gram matrix by evaluating `f(i, j)` on the upper triangle
    /// and mirroring it, so the result is symmetric bit for bit.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        GramMatrix { n, data }
    }

    /// Wraps an explicit row-major matrix. The matrix must be square,
    /// finite and exactly symmetric.
    pub fn from_row_major(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(BkrError::SizeMismatch {
                what: "gram matrix data",
                expected: n * n,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(BkrError::NonFinite("gram matrix"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if data[i * n + j] != data[j * n + i] {
                    return Err(BkrError::InvalidArgument(format!(
                        "gram matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(GramMatrix { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// `c · K`, entrywise.
    pub fn scaled(&self, c: T) -> Self {
        GramMatrix {
            n: self.n,
            data: self.data.iter().map(|&v| v * c).collect(),
        }
    }

    /// Re-indexes rows and columns: the result has entry `K[π(i)][π(j)]` at
    /// `(i, j)`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n, "permutation length must equal n");
        GramMatrix::from_fn(self.n, |i, j| self.get(perm[i], perm[j]))
    }

    /// Restriction to the given rows and columns, in the given order.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        GramMatrix::from_fn(idx.len(), |i, j| self.get(idx[i], idx[j]))
    }
}

/// RBF lengthscale `ℓ`; strictly positive and finite.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Lengthscale<T>(T);

impl<T: Scalar> Lengthscale<T> {
    pub fn new(value: T) -> Result<Self> {
        if value.is_finite() && value > T::zero() {
            Ok(Lengthscale(value))
        } else {
            Err(BkrError::InvalidLengthscale(value.as_f64()))
        }
    }

    pub fn value(self) -> T {
        self.0
    }

    /// `1 / (2ℓ²)`, the factor multiplying squared distances.
    fn inv_two_sq(self) -> T {
        T::one() / (T::of(2.0) * self.0 * self.0)
    }
}

fn check_points<T: Scalar, P: AsRef<[T]>>(points: &[P]) -> Result<usize> {
    let first = points.first().ok_or(BkrError::Empty("points"))?;
    let dim = first.as_ref().len();
    for p in points {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(BkrError::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(BkrError::NonFinite("points"));
        }
    }
    Ok(dim)
}

#[inline]
fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(T::zero(), |acc, v| acc + v)
}

/// Squared-exponential Gram matrix `exp(-‖xᵢ - xⱼ‖² / (2ℓ²))`.
pub fn gram_rbf<T: Scalar, P: AsRef<[T]>>(
    points: &[P],
    ell: Lengthscale<T>,
) -> Result<GramMatrix<T>> {
    check_points(points)?;
    let c = ell.inv_two_sq();
    Ok(GramMatrix::from_fn(points.len(), |i, j| {
        if i == j {
            T::one()
        } else {
            (-sq_dist(points[i].as_ref(), points[j].as_ref()) * c).exp()
        }
    }))
}

/// Median of a multiset of distances, with the lower-median convention for
/// even counts and a fallback to the smallest positive distance when the
/// median is zero.
pub fn median_distance(mut distances: Vec<f64>) -> Result<f64> {
    if distances.is_empty() {
        return Err(BkrError::Empty("distances"));
    }
    if distances.iter().any(|d| !d.is_finite()) {
        return Err(BkrError::NonFinite("distances"));
    }
    distances.sort_by(f64::total_cmp);
    let median = distances[(distances.len() - 1) / 2];
    if median > 0.0 {
        return Ok(median);
    }
    distances
        .into_iter()
        .find(|&d| d > 0.0)
        .ok_or(BkrError::NoPositiveDistance)
}

/// Median of all pairwise Euclidean distances (not squared).
pub fn median_heuristic<T: Scalar, P: AsRef<[T]>>(points: &[P]) -> Result<Lengthscale<T>> {
    check_points(points)?;
    let n = points.len();
    if n < 2 {
        return Err(BkrError::InvalidArgument(
            "median heuristic needs at least two points".into(),
        ));
    }
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d.push(sq_dist(points[i].as_ref(), points[j].as_ref()).as_f64().sqrt());
        }
    }
    Lengthscale::new(T::of(median_distance(d)?))
}

/// Indicator kernel: 1 where labels agree, 0 elsewhere.
pub fn gram_indicator<T: Scalar, L: PartialEq>(labels: &[L]) -> Result<GramMatrix<T>> {
    if labels.is_empty() {
        return Err(BkrError::Empty("labels"));
    }
    Ok(GramMatrix::from_fn(labels.len(), |i, j| {
        if labels[i] == labels[j] {
            T::one()
        } else {
            T::zero()
        }
    }))
}

/// Levenshtein distance over Unicode scalar values with unit costs.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Median heuristic over edit distances.
pub fn edit_median_heuristic<T: Scalar, S: AsRef<str>>(strings: &[S]) -> Result<Lengthscale<T>> {
    let chars: Vec<Vec<char>> = strings.iter().map(|s| s.as_ref().chars().collect()).collect();
    if chars.len() < 2 {
        return Err(BkrError::InvalidArgument(
            "median heuristic needs at least two strings".into(),
        ));
    }
    let mut d = Vec::with_capacity(chars.len() * (chars.len() - 1) / 2);
    for i in 0..chars.len() {
        for j in (i + 1)..chars.len() {
            d.push(levenshtein_chars(&chars[i], &chars[j]) as f64);
        }
    }
    Lengthscale::new(T::of(median_distance(d)?))
}

/// RBF over edit distance, `exp(-lev(sᵢ, sⱼ)² / (2ℓ²))`.
pub fn gram_edit_rbf<T: Scalar, S: AsRef<str>>(
    strings: &[S],
    ell: Lengthscale<T>,
) -> Result<GramMatrix<T>> {
    if strings.is_empty() {
        return Err(BkrError::Empty("strings"));
    }
    let chars: Vec<Vec<char>> = strings.iter().map(|s| s.as_ref().chars().collect()).collect();
    let c = ell.inv_two_sq();
    Ok(GramMatrix::from_fn(chars.len(), |i, j| {
        if i == j {
            T::one()
        } else {
            let d = T::of_usize(levenshtein_chars(&chars[i], &chars[j]));
            (-d * d * c).exp()
        }
    }))
}

/// Kernel family requested for a column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Rbf,
    Indicator,
    EditRbf,
    #[default]
    Auto,
}

/// Kernel family plus an optional fixed lengthscale (median heuristic when
/// absent).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(default)]
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengthscale: Option<f64>,
}

impl KernelSpec {
    pub fn auto() -> Self {
        KernelSpec::default()
    }

    pub fn with_kind(kind: KernelKind) -> Self {
        KernelSpec {
            kind,
            lengthscale: None,
        }
    }
}

enum Resolved<'a, T> {
    Rbf {
        dim: usize,
        values: &'a [T],
        inv_two_sq: T,
    },
    Indicator(IndicatorLabels<'a>),
    EditRbf {
        chars: Vec<Vec<char>>,
        inv_two_sq: T,
    },
}

enum IndicatorLabels<'a> {
    Codes(&'a [u32]),
    Strings(&'a [String]),
}

/// A kernel bound to one column, with its bandwidth resolved. Evaluates
/// `k(row i, row j)` for arbitrary row pairs, which is what both the full
/// Gram matrix and the Nyström blocks need.
pub struct ColumnKernel<'a, T> {
    n: usize,
    resolved: Resolved<'a, T>,
}

impl<'a, T: Scalar> ColumnKernel<'a, T> {
    pub fn new(column: &'a Column<T>, spec: KernelSpec) -> Result<Self> {
        let kind = match spec.kind {
            KernelKind::Auto => match column.data() {
                ColumnData::Numeric { .. } => KernelKind::Rbf,
                ColumnData::Categorical { .. } => KernelKind::Indicator,
                ColumnData::Text(_) => KernelKind::EditRbf,
            },
            k => k,
        };
        let fixed = spec.lengthscale.map(|l| Lengthscale::new(T::of(l))).transpose()?;
        let n = column.len();
        let resolved = match (kind, column.data()) {
            (KernelKind::Rbf, ColumnData::Numeric { dim, values }) => {
                let ell = match fixed {
                    Some(l) => l,
                    None => {
                        let rows: Vec<&[T]> = values.chunks(*dim).collect();
                        median_heuristic(&rows)?
                    }
                };
                Resolved::Rbf {
                    dim: *dim,
                    values,
                    inv_two_sq: ell.inv_two_sq(),
                }
            }
            (KernelKind::Indicator, ColumnData::Categorical { codes, .. }) => {
                Resolved::Indicator(IndicatorLabels::Codes(codes))
            }
            (KernelKind::Indicator, ColumnData::Text(s)) => {
                Resolved::Indicator(IndicatorLabels::Strings(s))
            }
            (KernelKind::EditRbf, data @ (ColumnData::Text(_) | ColumnData::Categorical { .. })) => {
                let strings: Vec<&str> = match data {
                    ColumnData::Text(s) => s.iter().map(String::as_str).collect(),
                    ColumnData::Categorical { codes, levels } => {
                        codes.iter().map(|&c| levels[c as usize].as_str()).collect()
                    }
                    ColumnData::Numeric { .. } => unreachable!(),
                };
                let ell = match fixed {
                    Some(l) => l,
                    None => edit_median_heuristic(&strings)?,
                };
                Resolved::EditRbf {
                    chars: strings.iter().map(|s| s.chars().collect()).collect(),
                    inv_two_sq: ell.inv_two_sq(),
                }
            }
            (kind, _) => {
                return Err(BkrError::InvalidArgument(format!(
                    "kernel {kind:?} does not apply to column `{}` of type {}",
                    column.name(),
                    column.type_name()
                )))
            }
        };
        Ok(ColumnKernel { n, resolved })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `k(row i, row j)`.
    #[inline]
    pub fn eval(&self, i: usize, j: usize) -> T {
        match &self.resolved {
            Resolved::Rbf {
                dim,
                values,
                inv_two_sq,
            } => {
                if i == j {
                    return T::one();
                }
                let a = &values[i * dim..(i + 1) * dim];
                let b = &values[j * dim..(j + 1) * dim];
                (-sq_dist(a, b) * *inv_two_sq).exp()
            }
            Resolved::Indicator(labels) => {
                let eq = match labels {
                    IndicatorLabels::Codes(c) => c[i] == c[j],
                    IndicatorLabels::Strings(s) => s[i] == s[j],
                };
                if eq {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Resolved::EditRbf { chars, inv_two_sq } => {
                if i == j {
                    return T::one();
                }
                let d = T::of_usize(levenshtein_chars(&chars[i], &chars[j]));
                (-d * d * *inv_two_sq).exp()
            }
        }
    }

    pub fn gram(&self) -> GramMatrix<T> {
        GramMatrix::from_fn(self.n, |i, j| self.eval(i, j))
    }
}

/// Gram matrix of a column under the given kernel spec.
pub fn gram_for_column<T: Scalar>(column: &Column<T>, spec: KernelSpec) -> Result<GramMatrix<T>> {
    Ok(ColumnKernel::new(column, spec)?.gram())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn rbf_identical_points_all_ones() {
        let k = gram_rbf(&pts(&[0.0, 0.0]), Lengthscale::new(1.0).unwrap()).unwrap();
        assert_eq!(k.as_slice(), &[1.0; 4]);
    }

    #[test]
    fn rbf_unit_distance() {
        let k = gram_rbf(&pts(&[0.0, 1.0]), Lengthscale::new(1.0).unwrap()).unwrap();
        assert!((k.get(0, 1) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((k.get(0, 1) - 0.60653).abs() < 1e-5);
        assert_eq!(k.get(0, 0), 1.0);
    }

    #[test]
    fn rbf_matches_elementwise_loop() {
        let p = pts(&[0.0, 1.0, 2.0]);
        let ell = median_heuristic(&p).unwrap();
        assert_eq!(ell.value(), 1.0);
        let k = gram_rbf(&p, ell).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = p[i][0] - p[j][0];
                let want = (-(d * d) / (2.0 * 1.0 * 1.0)).exp();
                assert!((k.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rbf_errors() {
        let ell = Lengthscale::new(1.0).unwrap();
        assert!(matches!(
            gram_rbf(&[vec![0.0], vec![1.0, 2.0]], ell),
            Err(BkrError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            gram_rbf(&[vec![f64::NAN]], ell),
            Err(BkrError::NonFinite(_))
        ));
        assert!(Lengthscale::new(0.0).is_err());
        assert!(Lengthscale::new(-1.0).is_err());
        assert!(Lengthscale::new(f64::INFINITY).is_err());
    }

    #[test]
    fn median_heuristic_cases() {
        assert_eq!(median_heuristic(&pts(&[0.0, 1.0, 2.0])).unwrap().value(), 1.0);
        assert_eq!(median_heuristic(&pts(&[0.0, 0.0, 5.0])).unwrap().value(), 5.0);
        assert_eq!(
            median_heuristic::<f64, _>(&pts(&[0.0, 0.0])),
            Err(BkrError::NoPositiveDistance)
        );
        // {0,0,0,1}: distances {0,0,0,1,1,1}, lower median 0, fallback 1.
        assert_eq!(median_heuristic(&pts(&[0.0, 0.0, 0.0, 1.0])).unwrap().value(), 1.0);
    }

    #[test]
    fn median_lower_convention() {
        assert_eq!(median_distance(vec![4.0, 1.0, 3.0, 2.0]).unwrap(), 2.0);
    }

    #[test]
    fn indicator_cases() {
        let k: GramMatrix<f64> = gram_indicator(&["a", "a", "b"]).unwrap();
        assert_eq!(k.as_slice(), &[1., 1., 0., 1., 1., 0., 0., 0., 1.]);
        let k: GramMatrix<f64> = gram_indicator(&[7, 7, 7]).unwrap();
        assert!(k.as_slice().iter().all(|&v| v == 1.0));
        let k: GramMatrix<f64> = gram_indicator(&[1, 2, 3]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        assert!(gram_indicator::<f64, u8>(&[]).is_err());
    }

    #[test]
    fn edit_distance_cases() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("flaw", "lawn"), 2);
        let ell = Lengthscale::new(2.0).unwrap();
        let k = gram_edit_rbf(&["kitten", "sitting", "kitten"], ell).unwrap();
        assert!((k.get(0, 1) - (-9.0f64 / 8.0).exp()).abs() < 1e-15);
        assert_eq!(k.get(0, 2), 1.0);
    }

    #[test]
    fn edit_median() {
        // distances: ab-abc 1, ab-xyz 3, abc-xyz 3 → median 3
        let ell: Lengthscale<f64> = edit_median_heuristic(&["ab", "abc", "xyz"]).unwrap();
        assert_eq!(ell.value(), 3.0);
    }

    /// Textbook full-table Wagner–Fischer, kept separate from the two-row
    /// implementation.
    fn lev_table(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in t.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in t[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let c = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                t[i][j] = (t[i - 1][j] + 1).min(t[i][j - 1] + 1).min(t[i - 1][j - 1] + c);
            }
        }
        t[a.len()][b.len()]
    }

    fn min_eigenvalue(k: &GramMatrix<f64>) -> f64 {
        let n = k.n();
        let m = nalgebra::DMatrix::from_row_slice(n, n, k.as_slice());
        m.symmetric_eigenvalues().min()
    }

    proptest! {
        #[test]
        fn edit_distance_is_metric(a in "[abc]{0,8}", b in "[abc]{0,8}", c in "[abc]{0,8}") {
            prop_assert_eq!(levenshtein(&a, &b), lev_table(&a, &b));
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
            prop_assert_eq!(levenshtein(&a, &a), 0);
        }

        #[test]
        fn rbf_translation_invariant(
            xs in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..20),
            shift in prop::collection::vec(-100.0f64..100.0, 3),
        ) {
            let ell = Lengthscale::new(1.3).unwrap();
            let moved: Vec<Vec<f64>> = xs.iter()
                .map(|p| p.iter().zip(&shift).map(|(a, s)| a + s).collect())
                .collect();
            let k1 = gram_rbf(&xs, ell).unwrap();
            let k2 = gram_rbf(&moved, ell).unwrap();
            for (a, b) in k1.as_slice().iter().zip(k2.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn builtin_grams_are_psd(
            xs in prop::collection::vec(-3.0f64..3.0, 2..50),
            labels in prop::collection::vec(0u8..4, 2..50),
            strings in prop::collection::vec("[ab]{0,6}", 2..30),
        ) {
            let p: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
            if let Ok(ell) = median_heuristic(&p) {
                let k = gram_rbf(&p, ell).unwrap();
                prop_assert!(min_eigenvalue(&k) >= -1e-8 * k.n() as f64);
            }
            let k: GramMatrix<f64> = gram_indicator(&labels).unwrap();
            prop_assert!(min_eigenvalue(&k) >= -1e-8 * k.n() as f64);
            // Edit-distance RBF is not PSD in general; only symmetry and bounds hold.
            let k = gram_edit_rbf(&strings, Lengthscale::new(1.0).unwrap()).unwrap();
            for i in 0..k.n() {
                prop_assert_eq!(k.get(i, i), 1.0);
                for j in 0..k.n() {
                    prop_assert_eq!(k.get(i, j), k.get(j, i));
                    prop_assert!((0.0..=1.0).contains(&k.get(i, j)));
                }
            }
        }

        #[test]
        fn indicator_invariant_under_renaming(labels in prop::collection::vec(0u8..5, 1..30)) {
            let renamed: Vec<u8> = labels.iter().map(|&l| (l * 3 + 1) % 5 + 10).collect();
            let a: GramMatrix<f64> = gram_indicator(&labels).unwrap();
            let b: GramMatrix<f64> = gram_indicator(&renamed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
