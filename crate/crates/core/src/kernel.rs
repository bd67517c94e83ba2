//! Log-Euclidean Gaussian kernel and Gram whitening.
//!
//! The RKHS least-squares term `‖φ(X) − Σ cᵢ φ(Yᵢ)‖²` equals, up to a constant
//! that does not depend on `c`, the Euclidean term `‖x̄ − D̄c‖²` with
//!
//! ```text
//! K = U Σ Uᵀ,   D̄ = Σ^{1/2} Uᵀ,   x̄ = Σ^{-1/2} Uᵀ k_X
//! ```
//!
//! so that `D̄ᵀD̄ = K` and `D̄ᵀx̄ = k_X` on the retained eigenspace.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spd::{log_distance, matrix_log, SpdMatrix, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelParams {
    gamma: f64,
}

impl KernelParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kernel gamma must be positive and finite, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `exp(−γ d²)` for a Log-Euclidean distance `d`.
    #[inline]
    pub fn from_distance(&self, dist: f64) -> f64 {
        (-self.gamma * dist * dist).exp()
    }
}

/// `κ(X, Y) = exp(−γ ‖log X − log Y‖²_F)`.
pub fn kernel_eval(x: &SpdMatrix, y: &SpdMatrix, params: KernelParams) -> Result<f64> {
    let d = crate::spd::dist_log_euclidean(x, y)?;
    Ok(params.from_distance(d))
}

/// Gram matrix of a dictionary together with its whitened square-root factor.
#[derive(Debug, Clone)]
pub struct GramFactorization {
    gram: DMatrix<f64>,
    eig_vectors: DMatrix<f64>,
    eig_values: DVector<f64>,
    whitened_dict: DMatrix<f64>,
    log_atoms: Vec<SymMatrix>,
    params: KernelParams,
    dim: usize,
}

/// Gram matrix from precomputed matrix logarithms.
pub fn gram_from_logs(logs: &[SymMatrix], params: KernelParams) -> Result<DMatrix<f64>> {
    let n = logs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Ok(1.0)
                    } else {
                        log_distance(&logs[i], &logs[j]).map(|d| params.from_distance(d))
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Builds the Gram matrix of `gallery`, its eigendecomposition and the
/// whitened dictionary. Eigenvalues at or below `N · ε_mach · λ_max` are
/// dropped.
pub fn factorize(gallery: &[SpdMatrix], params: KernelParams) -> Result<GramFactorization> {
    let first = gallery.first().ok_or(Error::EmptyGallery)?;
    let dim = first.dim();
    if let Some(bad) = gallery.iter().find(|a| a.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    let log_atoms = gallery
        .par_iter()
        .map(matrix_log)
        .collect::<Result<Vec<_>>>()?;
    let gram = gram_from_logs(&log_atoms, params)?;
    let n = gram.nrows();

    let eig = SymmetricEigen::new(gram.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let largest = eig.eigenvalues[order[0]];
    let rank_tol = n as f64 * f64::EPSILON * largest;
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&k| eig.eigenvalues[k] > rank_tol)
        .collect();
    let r = kept.len();

    let eig_values = DVector::from_iterator(r, kept.iter().map(|&k| eig.eigenvalues[k]));
    let eig_vectors = DMatrix::from_fn(n, r, |i, j| eig.eigenvectors[(i, kept[j])]);
    let mut whitened_dict = eig_vectors.transpose();
    for (row, s) in eig_values.iter().enumerate() {
        whitened_dict.row_mut(row).scale_mut(s.sqrt());
    }

    Ok(GramFactorization {
        gram,
        eig_vectors,
        eig_values,
        whitened_dict,
        log_atoms,
        params,
        dim,
    })
}

impl GramFactorization {
    pub fn n_atoms(&self) -> usize {
        self.gram.nrows()
    }

    /// Number of retained eigenpairs.
    pub fn rank(&self) -> usize {
        self.eig_values.len()
    }

    /// Matrix dimension of the dictionary atoms.
    pub fn atom_dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn eig_vectors(&self) -> &DMatrix<f64> {
        &self.eig_vectors
    }

    pub fn eig_values(&self) -> &DVector<f64> {
        &self.eig_values
    }

    /// `D̄ = Σ^{1/2} Uᵀ`, shape `r × N`.
    pub fn whitened_dict(&self) -> &DMatrix<f64> {
        &self.whitened_dict
    }

    pub fn log_atoms(&self) -> &[SymMatrix] {
        &self.log_atoms
    }

    /// `k_X[i] = κ(X, Yᵢ)` given `log X`.
    pub fn kernel_vector_from_log(&self, log_x: &SymMatrix) -> Result<DVector<f64>> {
        if log_x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: log_x.dim(),
            });
        }
        let mut k = DVector::zeros(self.n_atoms());
        for (i, atom) in self.log_atoms.iter().enumerate() {
            k[i] = self.params.from_distance(log_distance(log_x, atom)?);
        }
        Ok(k)
    }

    pub fn kernel_vector(&self, x: &SpdMatrix) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        self.kernel_vector_from_log(&matrix_log(x)?)
    }

    /// `x̄ = Σ^{-1/2} Uᵀ k`.
    pub fn whiten(&self, kernel_vector: &DVector<f64>) -> Result<DVector<f64>> {
        if kernel_vector.len() != self.n_atoms() {
            return Err(Error::DimensionMismatch {
                expected: self.n_atoms(),
                found: kernel_vector.len(),
            });
        }
        let mut xbar = self.eig_vectors.tr_mul(kernel_vector);
        for (v, s) in xbar.iter_mut().zip(self.eig_values.iter()) {
            *v /= s.sqrt();
        }
        Ok(xbar)
    }

    pub fn embed_log(&self, log_x: &SymMatrix) -> Result<DVector<f64>> {
        self.whiten(&self.kernel_vector_from_log(log_x)?)
    }

    /// Whitened query embedding `x̄` of `X`.
    pub fn embed_query(&self, x: &SpdMatrix) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        self.embed_log(&matrix_log(x)?)
    }

    fn check_dim(&self, x: &SpdMatrix) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        Ok(())
    }
}

/// Free-function form of [`GramFactorization::embed_query`].
pub fn embed_query(x: &SpdMatrix, fact: &GramFactorization) -> Result<DVector<f64>> {
    fact.embed_query(x)
}
