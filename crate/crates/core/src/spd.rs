//! Symmetric positive definite matrices and their dissimilarities.
//!
//! Every matrix function here (logarithm, exponential, inverse square root)
//! goes through one symmetric eigendecomposition `X = V diag(λ) Vᵀ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative symmetry tolerance used when validating inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Scale of the positive-definiteness floor relative to `trace(X) / d`.
pub const PD_FLOOR_SCALE: f64 = 1e-12;

/// A validated `d × d` symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    inner: DMatrix<f64>,
}

/// A validated symmetric matrix with unrestricted eigenvalues (tangent vectors,
/// matrix logarithms).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidParameter(
            "matrix dimension must be positive".into(),
        ));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entry"));
    }
    let scale = m.amax().max(1.0);
    let mut asym: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Eigenvalue floor below which a matrix is rejected as not positive definite.
pub fn pd_floor(m: &DMatrix<f64>) -> f64 {
    PD_FLOOR_SCALE * m.trace() / m.nrows() as f64
}

fn check_floor(eigenvalues: &DVector<f64>, floor: f64) -> Result<()> {
    let min = eigenvalues.min();
    if min <= floor || min <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
            floor,
        });
    }
    Ok(())
}

/// `V diag(f(λ)) Vᵀ`.
fn spectral_map(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let fl = f(*lambda);
        scaled.column_mut(j).scale_mut(fl);
    }
    symmetrized(scaled * v.transpose())
}

impl SpdMatrix {
    /// Validates symmetry and positive definiteness. The stored matrix is the
    /// exact symmetrization `(X + Xᵀ) / 2` of the input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m)?;
        let m = symmetrized(m);
        let floor = pd_floor(&m);
        let eig = SymmetricEigen::new(m.clone());
        check_floor(&eig.eigenvalues, floor)?;
        Ok(Self { inner: m })
    }

    pub fn from_row_slice(dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: values.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, values))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    /// Caller guarantees the matrix is exactly symmetric with positive spectrum.
    pub(crate) fn from_trusted(inner: DMatrix<f64>) -> Self {
        Self { inner }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        SymmetricEigen::new(self.inner.clone())
    }

    /// Congruence transform `A X Aᵀ`; `A` must be square and invertible.
    pub fn congruence(&self, a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != self.dim() || a.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: a.nrows(),
            });
        }
        Self::new(symmetrized(a * &self.inner * a.transpose()))
    }

    fn same_dim(&self, other: &SpdMatrix) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m)?;
        Ok(Self {
            inner: symmetrized(m),
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.inner
    }
}

/// Principal matrix logarithm.
pub fn matrix_log(x: &SpdMatrix) -> Result<SymMatrix> {
    let eig = x.eigen();
    check_floor(&eig.eigenvalues, pd_floor(x.as_matrix()))?;
    Ok(SymMatrix {
        inner: spectral_map(&eig, f64::ln),
    })
}

/// Matrix exponential of a symmetric matrix.
pub fn matrix_exp(s: &SymMatrix) -> SpdMatrix {
    let eig = SymmetricEigen::new(s.inner.clone());
    SpdMatrix::from_trusted(spectral_map(&eig, f64::exp))
}

/// `X^{-1/2}` from the eigendecomposition of `X`.
pub fn inv_sqrt(x: &SpdMatrix) -> Result<SymMatrix> {
    let eig = x.eigen();
    check_floor(&eig.eigenvalues, pd_floor(x.as_matrix()))?;
    Ok(SymMatrix {
        inner: spectral_map(&eig, |l| 1.0 / l.sqrt()),
    })
}

/// `‖L_X − L_Y‖_F` for precomputed logarithms.
pub fn log_distance(log_x: &SymMatrix, log_y: &SymMatrix) -> Result<f64> {
    if log_x.dim() != log_y.dim() {
        return Err(Error::DimensionMismatch {
            expected: log_x.dim(),
            found: log_y.dim(),
        });
    }
    Ok((&log_x.inner - &log_y.inner).norm())
}

/// Log-Euclidean distance `‖log X − log Y‖_F`.
pub fn dist_log_euclidean(x: &SpdMatrix, y: &SpdMatrix) -> Result<f64> {
    x.same_dim(y)?;
    log_distance(&matrix_log(x)?, &matrix_log(y)?)
}

/// Affine-invariant geodesic distance `‖log(X^{-1/2} Y X^{-1/2})‖_F`.
pub fn dist_airm(x: &SpdMatrix, y: &SpdMatrix) -> Result<f64> {
    x.same_dim(y)?;
    let p = inv_sqrt(x)?;
    let z = symmetrized(&p.inner * y.as_matrix() * &p.inner);
    let eig = SymmetricEigen::new(z);
    check_floor(&eig.eigenvalues, 0.0)?;
    Ok(eig
        .eigenvalues
        .iter()
        .map(|l| l.ln().powi(2))
        .sum::<f64>()
        .sqrt())
}

fn log_det(m: &DMatrix<f64>) -> Result<f64> {
    let chol = nalgebra::Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite {
        min_eigenvalue: f64::NAN,
        floor: 0.0,
    })?;
    Ok(2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>())
}

/// Symmetric Stein (Jensen–Bregman LogDet) divergence
/// `ln det((X + Y)/2) − ½ (ln det X + ln det Y)`, clamped at zero.
pub fn stein_divergence(x: &SpdMatrix, y: &SpdMatrix) -> Result<f64> {
    x.same_dim(y)?;
    let mid = (x.as_matrix() + y.as_matrix()) * 0.5;
    let j = log_det(&mid)? - 0.5 * (log_det(x.as_matrix())? + log_det(y.as_matrix())?);
    Ok(j.max(0.0))
}

/// `sqrt(J(X, Y))`, the metric form of the Stein divergence.
pub fn stein_distance(x: &SpdMatrix, y: &SpdMatrix) -> Result<f64> {
    stein_divergence(x, y).map(f64::sqrt)
}
