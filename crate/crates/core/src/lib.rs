//! Kernel sparse representation classification of symmetric positive
//! definite matrices with neighborhood-preserving ℓ1 weights.
//!
//! Pipeline: [`spd`] geometry, the Log-Euclidean Gaussian [`kernel`] and its
//! whitened Gram factorization, the weighted-ℓ1 [`admm`] sparse coder, the
//! residual-rule [`classifier`], region covariance [`features`], and the
//! benchmarking [`harness`].

pub mod admm;
pub mod bundle;
pub mod classifier;
pub mod error;
pub mod features;
pub mod harness;
pub mod kernel;
pub mod pnm;
pub mod spd;
pub mod synth;

pub use admm::{shrink, solve, SolverConfig, SparseCode, WeightVector};
pub use bundle::SpdBundle;
pub use classifier::{
    classify, compute_weights, ClassificationResult, Label, LabeledGallery, Npksrc, WeightMode,
};
pub use error::{Error, Result};
pub use features::{FeatureSpec, FeatureVariant, RasterImage, RegionSpec};
pub use harness::{run_benchmark, sweep, BenchConfig, Report, SplitSpec};
pub use kernel::{factorize, kernel_eval, GramFactorization, KernelParams};
pub use spd::{
    dist_airm, dist_log_euclidean, matrix_exp, matrix_log, stein_divergence, SpdMatrix, SymMatrix,
};
pub use synth::{synth_gallery, SynthSpec};
