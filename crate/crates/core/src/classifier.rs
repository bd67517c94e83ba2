//! Neighborhood-preserved kernel sparse representation classifier.
//!
//! For a query `X`: build per-atom weights from geodesic distances, sparse
//! code the whitened query with [`crate::admm::solve`], then assign the class
//! whose masked code reconstructs the query with the smallest residual.

use std::ops::Range;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::admm::{self, SolverConfig, SparseCode, WeightVector};
use crate::error::{Error, Result};
use crate::kernel::{factorize, GramFactorization, KernelParams};
use crate::spd::{log_distance, matrix_log, stein_distance, SpdMatrix, SymMatrix};

/// Class id. Ids are positive.
pub type Label = u32;

/// Training dictionary sorted so that every class occupies one contiguous
/// index range.
#[derive(Debug, Clone)]
pub struct LabeledGallery {
    atoms: Vec<SpdMatrix>,
    labels: Vec<Label>,
    class_ranges: Vec<(Label, Range<usize>)>,
}

impl LabeledGallery {
    /// Stable-sorts `atoms` by label.
    pub fn new(atoms: Vec<SpdMatrix>, labels: Vec<Label>) -> Result<Self> {
        if atoms.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                found: labels.len(),
            });
        }
        if atoms.is_empty() {
            return Err(Error::EmptyGallery);
        }
        if labels.contains(&0) {
            return Err(Error::InvalidParameter(
                "class labels must be positive".into(),
            ));
        }
        let dim = atoms[0].dim();
        if let Some(bad) = atoms.iter().find(|a| a.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        let mut paired: Vec<(Label, SpdMatrix)> = labels.into_iter().zip(atoms).collect();
        paired.sort_by_key(|(l, _)| *l);
        let (labels, atoms): (Vec<_>, Vec<_>) = paired.into_iter().unzip();

        let mut class_ranges: Vec<(Label, Range<usize>)> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            match class_ranges.last_mut() {
                Some((last, range)) if *last == l => range.end = i + 1,
                _ => class_ranges.push((l, i..i + 1)),
            }
        }
        Ok(Self {
            atoms,
            labels,
            class_ranges,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn atoms(&self) -> &[SpdMatrix] {
        &self.atoms
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// `(label, index range)` in ascending label order.
    pub fn class_ranges(&self) -> &[(Label, Range<usize>)] {
        &self.class_ranges
    }

    pub fn n_classes(&self) -> usize {
        self.class_ranges.len()
    }
}

/// How the ℓ1 weights are derived from the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// `wᵢ = ‖log Yᵢ − log X‖_F`
    LogEuclidean,
    /// `wᵢ = sqrt(J(Yᵢ, X))`
    Stein,
    /// `wᵢ = 1`: plain kernel sparse coding with the affine constraint.
    None,
}

impl std::fmt::Display for WeightMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightMode::LogEuclidean => "logeuclidean",
            WeightMode::Stein => "stein",
            WeightMode::None => "none",
        })
    }
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logeuclidean" | "loge" | "log-euclidean" => Ok(Self::LogEuclidean),
            "stein" => Ok(Self::Stein),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidParameter(format!(
                "unknown weight metric '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationResult {
    pub label: Label,
    /// `(label, ½‖x̄ − D̄c*_j‖²)` in ascending label order.
    pub residuals: Vec<(Label, f64)>,
    pub code: SparseCode,
    pub weights: WeightVector,
}

fn weights_with_logs(
    x: &SpdMatrix,
    log_x: &SymMatrix,
    atoms: &[SpdMatrix],
    log_atoms: &[SymMatrix],
    mode: WeightMode,
) -> Result<WeightVector> {
    let w = match mode {
        WeightMode::None => vec![1.0; atoms.len()],
        WeightMode::LogEuclidean => log_atoms
            .iter()
            .map(|l| log_distance(l, log_x))
            .collect::<Result<_>>()?,
        WeightMode::Stein => atoms
            .iter()
            .map(|a| stein_distance(a, x))
            .collect::<Result<_>>()?,
    };
    WeightVector::new(w)
}

/// Per-atom weights of query `X` against the gallery.
pub fn compute_weights(
    x: &SpdMatrix,
    gallery: &LabeledGallery,
    mode: WeightMode,
) -> Result<WeightVector> {
    if x.dim() != gallery.dim() {
        return Err(Error::DimensionMismatch {
            expected: gallery.dim(),
            found: x.dim(),
        });
    }
    if mode == WeightMode::None {
        return Ok(WeightVector::ones(gallery.len()));
    }
    let log_x = matrix_log(x)?;
    let log_atoms = gallery
        .atoms()
        .iter()
        .map(matrix_log)
        .collect::<Result<Vec<_>>>()?;
    weights_with_logs(x, &log_x, gallery.atoms(), &log_atoms, mode)
}

/// `½‖x̄ − D̄c*‖²` where `c*` is `code.c` with entries outside `class_range` zeroed.
pub fn class_residual(
    code: &SparseCode,
    fact: &GramFactorization,
    xbar: &DVector<f64>,
    class_range: Range<usize>,
) -> f64 {
    let dbar = fact.whitened_dict();
    let mut recon = DVector::zeros(dbar.nrows());
    for i in class_range {
        recon.axpy(code.c[i], &dbar.column(i), 1.0);
    }
    0.5 * (xbar - recon).norm_squared()
}

/// Argmin over residuals; ties go to the first (smallest) label.
fn pick_label(residuals: &[(Label, f64)]) -> Label {
    let mut best = residuals[0];
    for &(l, r) in &residuals[1..] {
        if r < best.1 {
            best = (l, r);
        }
    }
    best.0
}

/// Fitted classifier: gallery, factorized Gram matrix and solver settings.
#[derive(Debug, Clone)]
pub struct Npksrc {
    gallery: LabeledGallery,
    fact: GramFactorization,
    config: SolverConfig,
    mode: WeightMode,
    normalize_weights: bool,
}

impl Npksrc {
    pub fn fit(
        gallery: LabeledGallery,
        params: KernelParams,
        config: SolverConfig,
        mode: WeightMode,
    ) -> Result<Self> {
        config.validate()?;
        let fact = factorize(gallery.atoms(), params)?;
        Ok(Self {
            gallery,
            fact,
            config,
            mode,
            normalize_weights: false,
        })
    }

    /// Rescale weights to mean one before solving. Off by default.
    pub fn with_normalized_weights(mut self, on: bool) -> Self {
        self.normalize_weights = on;
        self
    }

    pub fn gallery(&self) -> &LabeledGallery {
        &self.gallery
    }

    pub fn factorization(&self) -> &GramFactorization {
        &self.fact
    }

    pub fn classify(&self, x: &SpdMatrix) -> Result<ClassificationResult> {
        classify_inner(
            x,
            &self.gallery,
            &self.fact,
            &self.config,
            self.mode,
            self.normalize_weights,
        )
    }

    /// Fraction of probes whose predicted label matches their ground truth.
    pub fn evaluate(&self, probes: &LabeledGallery) -> Result<f64> {
        let hits = probes
            .atoms()
            .par_iter()
            .zip(probes.labels().par_iter())
            .map(|(x, &truth)| self.classify(x).map(|r| (r.label == truth) as usize))
            .collect::<Result<Vec<_>>>()?;
        Ok(hits.iter().sum::<usize>() as f64 / probes.len() as f64)
    }
}

fn classify_inner(
    x: &SpdMatrix,
    gallery: &LabeledGallery,
    fact: &GramFactorization,
    config: &SolverConfig,
    mode: WeightMode,
    normalize: bool,
) -> Result<ClassificationResult> {
    if x.dim() != gallery.dim() {
        return Err(Error::DimensionMismatch {
            expected: gallery.dim(),
            found: x.dim(),
        });
    }
    if fact.n_atoms() != gallery.len() {
        return Err(Error::DimensionMismatch {
            expected: gallery.len(),
            found: fact.n_atoms(),
        });
    }
    let log_x = matrix_log(x)?;
    let mut weights = weights_with_logs(x, &log_x, gallery.atoms(), fact.log_atoms(), mode)?;
    if normalize {
        weights = weights.normalized();
    }
    let xbar = fact.embed_log(&log_x)?;
    let code = admm::solve(&xbar, fact.whitened_dict(), &weights, config)?;
    let residuals: Vec<(Label, f64)> = gallery
        .class_ranges()
        .iter()
        .map(|(l, range)| (*l, class_residual(&code, fact, &xbar, range.clone())))
        .collect();
    Ok(ClassificationResult {
        label: pick_label(&residuals),
        residuals,
        code,
        weights,
    })
}

/// Classify one query against a prefactorized gallery. `fact` must have been
/// built from `gallery` with `params`.
pub fn classify(
    x: &SpdMatrix,
    gallery: &LabeledGallery,
    fact: &GramFactorization,
    params: KernelParams,
    config: &SolverConfig,
    mode: WeightMode,
) -> Result<ClassificationResult> {
    if fact.params() != params {
        return Err(Error::InvalidParameter(
            "factorization was built with different kernel parameters".into(),
        ));
    }
    config.validate()?;
    classify_inner(x, gallery, fact, config, mode, false)
}

/// Fit on `gallery` and return accuracy on `probes`.
pub fn evaluate(
    gallery: &LabeledGallery,
    probes: &LabeledGallery,
    params: KernelParams,
    config: SolverConfig,
    mode: WeightMode,
) -> Result<f64> {
    Npksrc::fit(gallery.clone(), params, config, mode)?.evaluate(probes)
}
