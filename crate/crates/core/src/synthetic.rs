//! Synthetic mixed-type benchmark data with known dependence structure.
//!
//! Six columns are produced, in this order:
//!
//! | column | type | built from |
//! |---|---|---|
//! | `X` | numeric | latent `X ~ N(0, 1)` |
//! | `Y` | binary (categorical `"0"`/`"1"`) | independent latent `T` |
//! | `C_X` | numeric | coupled to `X` |
//! | `D_X` | binary | coupled to `X` |
//! | `D_Y` | binary | coupled to `T` |
//! | `CC_X` | numeric vector, dim 1024 | each coordinate coupled to `X` |
//!
//! [`Generator::D1`] couples through a Gaussian copula with correlation
//! `rho`; [`Generator::D2`] through a Clayton copula with
//! `θ = 2ρ / (1 − ρ)`. A binary column is `1` exactly when its uniform
//! score is at least one half.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Column, Dataset};
use crate::error::{BkrError, Result};
use crate::scalar::Scalar;

pub const IMAGE_DIM: usize = 1024;

pub const COLUMN_NAMES: [&str; 6] = ["X", "Y", "C_X", "D_X", "D_Y", "CC_X"];

/// Columns coupled to the latent `X`.
const X_FAMILY: [usize; 4] = [0, 2, 3, 5];
const Y: usize = 1;
const D_Y: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    D1,
    D2,
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::D1 => "d1",
            Generator::D2 => "d2",
        })
    }
}

impl FromStr for Generator {
    type Err = BkrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d1" | "gaussian" => Ok(Generator::D1),
            "d2" | "clayton" => Ok(Generator::D2),
            other => Err(BkrError::InvalidArgument(format!("unknown generator {other:?}"))),
        }
    }
}

impl Generator {
    pub fn generate<T: Scalar, R: Rng + ?Sized>(self, n: usize, rho: f64, rng: &mut R) -> Result<SyntheticData<T>> {
        match self {
            Generator::D1 => generate_d1(n, rho, rng),
            Generator::D2 => generate_d2(n, rho, rng),
        }
    }
}

/// Ground truth over all 15 column pairs `(i, j)`, `i < j`, in
/// lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub pairs: Vec<((usize, usize), bool)>,
}

impl SyntheticTruth {
    /// Truth for coupling strength `rho`; `rho = 0` makes every pair
    /// independent.
    pub fn for_rho(rho: f64) -> Self {
        let k = COLUMN_NAMES.len();
        let mut pairs = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                let dep = rho != 0.0
                    && ((X_FAMILY.contains(&i) && X_FAMILY.contains(&j)) || (i, j) == (Y, D_Y));
                pairs.push(((i, j), dep));
            }
        }
        SyntheticTruth { pairs }
    }

    pub fn is_dependent(&self, i: usize, j: usize) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.pairs.iter().any(|&(p, d)| p == key && d)
    }

    pub fn dependent_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.1).count()
    }

    pub fn independent_count(&self) -> usize {
        self.pairs.len() - self.dependent_count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData<T> {
    pub dataset: Dataset<T>,
    pub truth: SyntheticTruth,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

fn binary(u: f64) -> &'static str {
    if u >= 0.5 {
        "1"
    } else {
        "0"
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(BkrError::InvalidArgument("n must be positive".into()));
    }
    Ok(())
}

fn normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn assemble<T: Scalar>(
    x: &[f64],
    y: Vec<&'static str>,
    c_x: &[f64],
    d_x: Vec<&'static str>,
    d_y: Vec<&'static str>,
    image: &[f64],
    rho: f64,
) -> Result<SyntheticData<T>> {
    let conv = |v: &[f64]| v.iter().map(|&a| T::of(a)).collect::<Vec<T>>();
    let dataset = Dataset::new(vec![
        Column::scalar(COLUMN_NAMES[0], conv(x))?,
        Column::categorical(COLUMN_NAMES[1], y),
        Column::scalar(COLUMN_NAMES[2], conv(c_x))?,
        Column::categorical(COLUMN_NAMES[3], d_x),
        Column::categorical(COLUMN_NAMES[4], d_y),
        Column::numeric(COLUMN_NAMES[5], IMAGE_DIM, conv(image))?,
    ])?;
    Ok(SyntheticData {
        dataset,
        truth: SyntheticTruth::for_rho(rho),
    })
}

/// Gaussian-copula data; `rho ∈ [0, 1)`.
pub fn generate_d1<T: Scalar, R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> Result<SyntheticData<T>> {
    check_n(n)?;
    if !(0.0..1.0).contains(&rho) {
        return Err(BkrError::InvalidArgument(format!("rho {rho} outside [0, 1)")));
    }
    let phi = std_normal();
    let s = (1.0 - rho * rho).sqrt();
    let x = normals(n, rng);
    let t = normals(n, rng);
    let w1 = normals(n, rng);
    let w2 = normals(n, rng);
    let w3 = normals(n, rng);

    let y = t.iter().map(|&v| binary(phi.cdf(v))).collect();
    let c_x: Vec<f64> = x.iter().zip(&w1).map(|(&a, &e)| rho * a + s * e).collect();
    let d_x = x.iter().zip(&w2).map(|(&a, &e)| binary(phi.cdf(rho * a + s * e))).collect();
    let d_y = t.iter().zip(&w3).map(|(&a, &e)| binary(phi.cdf(rho * a + s * e))).collect();
    let mut image = Vec::with_capacity(n * IMAGE_DIM);
    for &a in &x {
        for _ in 0..IMAGE_DIM {
            let e: f64 = rng.sample(StandardNormal);
            image.push(phi.cdf(rho * a + s * e));
        }
    }
    assemble(&x, y, &c_x, d_x, d_y, &image, rho)
}

/// Clayton parameter used for coupling strength `rho`.
pub fn clayton_theta(rho: f64) -> f64 {
    2.0 * rho / (1.0 - rho)
}

/// Conditional-inversion Clayton sample: the `v` with
/// `∂C(u, v)/∂u = w`.
pub fn clayton_conditional(u: f64, w: f64, theta: f64) -> f64 {
    ((w.powf(-theta / (1.0 + theta)) - 1.0) * u.powf(-theta) + 1.0).powf(-1.0 / theta)
}

/// Clayton-copula data; `rho ∈ (0, 1)` so that `θ > 0`.
pub fn generate_d2<T: Scalar, R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> Result<SyntheticData<T>> {
    check_n(n)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(BkrError::InvalidArgument(format!(
            "Clayton coupling needs rho in (0, 1), got {rho}"
        )));
    }
    let theta = clayton_theta(rho);
    let phi = std_normal();
    let x = normals(n, rng);
    let t = normals(n, rng);
    let ux: Vec<f64> = x.iter().map(|&v| phi.cdf(v)).collect();
    let ut: Vec<f64> = t.iter().map(|&v| phi.cdf(v)).collect();
    let mut couple = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .map(|&u| clayton_conditional(u, rng.sample(Open01), theta))
            .collect()
    };
    let v1 = couple(&ux);
    let v2 = couple(&ux);
    let v3 = couple(&ut);

    let y = ut.iter().map(|&u| binary(u)).collect();
    let c_x: Vec<f64> = v1.iter().map(|&v| phi.inverse_cdf(v)).collect();
    let d_x = v2.iter().map(|&v| binary(v)).collect();
    let d_y = v3.iter().map(|&v| binary(v)).collect();
    let mut image = Vec::with_capacity(n * IMAGE_DIM);
    for &u in &ux {
        for _ in 0..IMAGE_DIM {
            image.push(clayton_conditional(u, rng.sample(Open01), theta));
        }
    }
    if c_x.iter().any(|v| !v.is_finite()) {
        return Err(BkrError::NonFinite("Clayton inverse transform"));
    }
    assemble(&x, y, &c_x, d_x, d_y, &image, rho)
}
