//! Bayesian kernelised correlation (BdCor) for testing dependence and
//! independence between variables of mixed type.
//!
//! Each variable gets a kernel ([`kernels`]); posterior draws of HSIC are
//! obtained under a Dirichlet-process posterior with a flat Dirichlet on the
//! observed points ([`dp_posterior`], [`hsic`]), and normalised into a
//! posterior over BdCor ([`bdcor`]). Decisions compare BdCor against a
//! region of practical independence. [`multiple_comparisons`] runs all pairs
//! on shared draws so that sets of statements can be accepted jointly, and
//! [`nystrom`] supplies a low-rank path for large `n`.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, with `…32` variants for `f32`.

pub mod benchmark;
pub mod bdcor;
pub mod data;
pub mod dp_posterior;
pub mod error;
pub mod hsic;
pub mod kernels;
pub mod multiple_comparisons;
pub mod nhst;
pub mod nystrom;
#[cfg(any(test, feature = "oracles"))]
pub mod oracles;
pub mod scalar;
pub mod synthetic;

pub use bdcor::{
    bdcor_posterior, bdcor_posterior_lowrank, decide, Decision, DecisionLabel, Histogram, McConfig,
    DEFAULT_MC_SAMPLES, HISTOGRAM_BINS,
};
pub use data::{load_dataset, read_dataset, save_dataset, write_dataset, ColumnData, ColumnSchema, ColumnType, Schema};
pub use dp_posterior::{sample_permutation, sample_weights, Permutation, RngStream};
pub use error::{BkrError, Result};
pub use hsic::{hsic_empirical, hsic_sample, hsic_sample_lowrank, hsic_sample_permuted};
pub use kernels::{gram_for_column, KernelKind, KernelSpec, Lengthscale};
pub use multiple_comparisons::{
    joint_accept, joint_accept_indicators, pairwise_marginal, pairwise_matrix, Direction, JointReport, MatrixConfig,
    PairStatement,
};
pub use nhst::{bonferroni, hsic_permutation_test, NhstConfig, NhstResult};
pub use nystrom::{nystrom_features, DEFAULT_LANDMARKS};
pub use scalar::Scalar;
pub use synthetic::{Generator, SyntheticTruth};

pub type Gram = kernels::GramMatrix<f64>;
pub type Gram32 = kernels::GramMatrix<f32>;
pub type Features = nystrom::FeatureMatrix<f64>;
pub type Features32 = nystrom::FeatureMatrix<f32>;
pub type Weights = dp_posterior::WeightVector<f64>;
pub type Weights32 = dp_posterior::WeightVector<f32>;
pub type Posterior = bdcor::PosteriorSamples<f64>;
pub type Posterior32 = bdcor::PosteriorSamples<f32>;
pub type Column = data::Column<f64>;
pub type Column32 = data::Column<f32>;
pub type Dataset = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type PairwiseMatrix = multiple_comparisons::PairwiseMatrix<f64>;
pub type PairwiseMatrix32 = multiple_comparisons::PairwiseMatrix<f32>;
