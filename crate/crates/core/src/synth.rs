//! Seeded synthetic SPD galleries: each class is a cloud of matrices
//! `exp(S_k + σE)` around a log-domain centroid `S_k`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bundle::SpdBundle;
use crate::classifier::Label;
use crate::error::{Error, Result};
use crate::spd::{matrix_exp, SpdMatrix, SymMatrix};

/// Symmetric matrix with independent `N(0, scale²)` entries on and above the
/// diagonal, mirrored below.
pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> SymMatrix {
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymMatrix::new(m).expect("mirrored matrix is symmetric")
}

/// `exp(S)` for a random symmetric `S` with entry scale `scale`.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> SpdMatrix {
    matrix_exp(&random_symmetric(rng, dim, scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub sigma: f64,
    pub centroid_sep: f64,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.per_class == 0 || self.dim == 0 {
            return Err(Error::InvalidParameter(
                "classes, per-class count and dimension must be positive".into(),
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be nonnegative, got {}",
                self.sigma
            )));
        }
        if !(self.centroid_sep > 0.0 && self.centroid_sep.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "centroid separation must be positive, got {}",
                self.centroid_sep
            )));
        }
        Ok(())
    }
}

/// Log-domain class centroids with pairwise Frobenius distance at least
/// `sep`. Candidates are drawn with entry scale `sep / dim` and rejected
/// until they clear every previously accepted centroid; the scale grows by
/// 10% every 100 rejections.
pub fn class_centroids<R: Rng + ?Sized>(
    rng: &mut R,
    n_classes: usize,
    dim: usize,
    sep: f64,
) -> Vec<SymMatrix> {
    let mut scale = sep / dim as f64;
    let mut centroids: Vec<SymMatrix> = Vec::with_capacity(n_classes);
    let mut rejections = 0usize;
    while centroids.len() < n_classes {
        let cand = random_symmetric(rng, dim, scale);
        let ok = centroids
            .iter()
            .all(|c| (c.as_matrix() - cand.as_matrix()).norm() >= sep);
        if ok {
            centroids.push(cand);
        } else {
            rejections += 1;
            if rejections.is_multiple_of(100) {
                scale *= 1.1;
            }
        }
    }
    centroids
}

/// Samples `per_class` matrices for each of `n_classes` classes; labels run
/// `1..=n_classes`, class-major.
pub fn synth_gallery(spec: &SynthSpec) -> Result<SpdBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centroids = class_centroids(&mut rng, spec.n_classes, spec.dim, spec.centroid_sep);
    let mut matrices = Vec::with_capacity(spec.n_classes * spec.per_class);
    let mut labels = Vec::with_capacity(matrices.capacity());
    for (k, centroid) in centroids.iter().enumerate() {
        for _ in 0..spec.per_class {
            let noise = random_symmetric(&mut rng, spec.dim, 1.0);
            let s = SymMatrix::new(centroid.as_matrix() + noise.as_matrix() * spec.sigma)?;
            matrices.push(matrix_exp(&s));
            labels.push(k as Label + 1);
        }
    }
    SpdBundle::new(spec.dim, labels, matrices)
}
