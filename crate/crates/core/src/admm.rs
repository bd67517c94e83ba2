//! ADMM for the weighted-ℓ1, affine-constrained sparse coding problem
//!
//! ```text
//! min_c ‖diag(w) c‖₁ + (λ/2) ‖x̄ − D̄c‖₂²   s.t.  cᵀ1 = 1
//! ```
//!
//! split as `a = Wc`. One sweep, with `M = λD̄ᵀD̄ + μWᵀW + μ11ᵀ` factored once:
//!
//! ```text
//! c ← M⁻¹ (λD̄ᵀx̄ + μWa + (μ − δ)1 + WᵀΔ)
//! a ← S_{1/μ}(Wc − Δ/μ)
//! Δ ← Δ + μ(a − Wc)
//! δ ← δ + μ(cᵀ1 − 1)
//! ```
//!
//! Iteration stops once `‖c_k − c_{k−1}‖_∞ ≤ ε` and `|c_kᵀ1 − 1| ≤ ε`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub lambda: f64,
    pub mu: f64,
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.09,
            mu: 1.0,
            eps: 1e-6,
            max_iter: 500,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("lambda", self.lambda)?;
        positive("mu", self.mu)?;
        positive("eps", self.eps)?;
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Nonnegative per-atom ℓ1 weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "weights must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(Self(w))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Rescaled to mean one. All-zero weights are returned unchanged.
    pub fn normalized(&self) -> Self {
        let mean = self.0.iter().sum::<f64>() / self.0.len().max(1) as f64;
        if mean > 0.0 {
            Self(self.0.iter().map(|v| v / mean).collect())
        } else {
            self.clone()
        }
    }

    fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

/// Solver output with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseCode {
    pub c: Vec<f64>,
    pub a: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `|cᵀ1 − 1|`
    pub affine_residual: f64,
    /// `‖a − Wc‖_∞`, diagnostic only
    pub coupling_residual: f64,
    pub objective: f64,
}

/// `sgn(v) · max(|v| − η, 0)`.
#[inline]
pub fn shrink(v: f64, eta: f64) -> f64 {
    debug_assert!(eta >= 0.0);
    if v > eta {
        v - eta
    } else if v < -eta {
        v + eta
    } else {
        0.0
    }
}

/// Cholesky factor of `M = λD̄ᵀD̄ + μWᵀW + μ11ᵀ`.
#[derive(Debug, Clone)]
pub struct SystemFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SystemFactor {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// Lower-triangular factor `L` with `M = LLᵀ`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

pub fn system_matrix(dbar: &DMatrix<f64>, w: &WeightVector, config: &SolverConfig) -> DMatrix<f64> {
    let n = dbar.ncols();
    let mut m = dbar.tr_mul(dbar) * config.lambda;
    m.add_scalar_mut(config.mu);
    for (i, wi) in w.as_slice().iter().enumerate() {
        m[(i, i)] += config.mu * wi * wi;
    }
    debug_assert_eq!(m.nrows(), n);
    m
}

fn check_dims(xbar: Option<&DVector<f64>>, dbar: &DMatrix<f64>, w: &WeightVector) -> Result<()> {
    if w.len() != dbar.ncols() {
        return Err(Error::DimensionMismatch {
            expected: dbar.ncols(),
            found: w.len(),
        });
    }
    if let Some(x) = xbar {
        if x.len() != dbar.nrows() {
            return Err(Error::DimensionMismatch {
                expected: dbar.nrows(),
                found: x.len(),
            });
        }
    }
    if dbar.ncols() == 0 {
        return Err(Error::EmptyGallery);
    }
    Ok(())
}

pub fn prefactor(
    dbar: &DMatrix<f64>,
    w: &WeightVector,
    config: &SolverConfig,
) -> Result<SystemFactor> {
    config.validate()?;
    check_dims(None, dbar, w)?;
    let m = system_matrix(dbar, w, config);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("system matrix"));
    }
    let chol = Cholesky::new(m).ok_or(Error::NotPositiveDefinite {
        min_eigenvalue: f64::NAN,
        floor: 0.0,
    })?;
    Ok(SystemFactor { chol })
}

/// `‖diag(w)c‖₁ + (λ/2)‖x̄ − D̄c‖²`.
pub fn objective(
    c: &[f64],
    xbar: &DVector<f64>,
    dbar: &DMatrix<f64>,
    w: &WeightVector,
    lambda: f64,
) -> f64 {
    let cv = DVector::from_column_slice(c);
    let l1: f64 = c
        .iter()
        .zip(w.as_slice())
        .map(|(ci, wi)| (wi * ci).abs())
        .sum();
    l1 + 0.5 * lambda * (xbar - dbar * cv).norm_squared()
}

/// Iterate-level access to the ADMM sweeps. [`solve`] drives this to
/// termination; the stepper is exposed for diagnostics.
#[derive(Debug, Clone)]
pub struct AdmmState {
    w: DVector<f64>,
    config: SolverConfig,
    factor: SystemFactor,
    /// `λD̄ᵀx̄`, constant across sweeps
    data_term: DVector<f64>,
    pub c: DVector<f64>,
    pub a: DVector<f64>,
    pub big_delta: DVector<f64>,
    pub small_delta: f64,
    pub iterations: usize,
}

impl AdmmState {
    /// `c₀ = 1/N`, `a₀ = Wc₀`, zero multipliers.
    pub fn new(
        xbar: &DVector<f64>,
        dbar: &DMatrix<f64>,
        w: &WeightVector,
        config: SolverConfig,
    ) -> Result<Self> {
        check_dims(Some(xbar), dbar, w)?;
        let factor = prefactor(dbar, w, &config)?;
        let n = dbar.ncols();
        let wv = w.to_dvector();
        let c = DVector::from_element(n, 1.0 / n as f64);
        let a = wv.component_mul(&c);
        let data_term = dbar.tr_mul(xbar) * config.lambda;
        Ok(Self {
            w: wv,
            config,
            factor,
            data_term,
            c,
            a,
            big_delta: DVector::zeros(n),
            small_delta: 0.0,
            iterations: 0,
        })
    }

    /// One full sweep. Returns `‖c_k − c_{k−1}‖_∞`.
    pub fn step(&mut self) -> Result<f64> {
        let mu = self.config.mu;
        let mut rhs = self.data_term.clone();
        rhs += self.w.component_mul(&self.a) * mu;
        rhs.add_scalar_mut(mu - self.small_delta);
        rhs += self.w.component_mul(&self.big_delta);
        let c_new = self.factor.solve(&rhs);

        let wc = self.w.component_mul(&c_new);
        let thresh = 1.0 / mu;
        let a_new = DVector::from_iterator(
            wc.len(),
            wc.iter()
                .zip(self.big_delta.iter())
                .map(|(v, d)| shrink(v - d / mu, thresh)),
        );
        self.big_delta += (&a_new - &wc) * mu;
        self.small_delta += mu * (c_new.sum() - 1.0);

        let change = (&c_new - &self.c).amax();
        self.c = c_new;
        self.a = a_new;
        self.iterations += 1;

        if !(change.is_finite()
            && self.small_delta.is_finite()
            && self.big_delta.iter().all(|v| v.is_finite()))
        {
            return Err(Error::NonFinite("ADMM iterate"));
        }
        Ok(change)
    }

    pub fn affine_residual(&self) -> f64 {
        (self.c.sum() - 1.0).abs()
    }

    pub fn coupling_residual(&self) -> f64 {
        (&self.a - self.w.component_mul(&self.c)).amax()
    }
}

/// Runs ADMM to termination. Hitting `max_iter` is not an error; it is
/// reported through `converged = false`.
pub fn solve(
    xbar: &DVector<f64>,
    dbar: &DMatrix<f64>,
    w: &WeightVector,
    config: &SolverConfig,
) -> Result<SparseCode> {
    let mut state = AdmmState::new(xbar, dbar, w, *config)?;
    let mut converged = false;
    while state.iterations < config.max_iter {
        let change = state.step()?;
        if change <= config.eps && state.affine_residual() <= config.eps {
            converged = true;
            break;
        }
    }
    let c: Vec<f64> = state.c.iter().copied().collect();
    Ok(SparseCode {
        objective: objective(&c, xbar, dbar, w, config.lambda),
        affine_residual: state.affine_residual(),
        coupling_residual: state.coupling_residual(),
        a: state.a.iter().copied().collect(),
        iterations: state.iterations,
        converged,
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{factorize, KernelParams};
    use crate::synth::random_spd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(lambda: f64, eps: f64) -> SolverConfig {
        SolverConfig {
            lambda,
            mu: 1.0,
            eps,
            max_iter: 500,
        }
    }

    /// Exhaustive search over c₁ with c₂ = 1 − c₁.
    fn grid_min_2(
        xbar: &DVector<f64>,
        dbar: &DMatrix<f64>,
        w: &WeightVector,
        lambda: f64,
        lo: f64,
        hi: f64,
        step: f64,
    ) -> (f64, f64) {
        let steps = ((hi - lo) / step).round() as i64;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=steps {
            let c1 = lo + k as f64 * step;
            let f = objective(&[c1, 1.0 - c1], xbar, dbar, w, lambda);
            if f < best.0 {
                best = (f, c1);
            }
        }
        best
    }

    fn grid_min_3(
        xbar: &DVector<f64>,
        dbar: &DMatrix<f64>,
        w: &WeightVector,
        lambda: f64,
        lo: f64,
        hi: f64,
        step: f64,
    ) -> f64 {
        let steps = ((hi - lo) / step).round() as i64;
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            let c1 = lo + i as f64 * step;
            for j in 0..=steps {
                let c2 = lo + j as f64 * step;
                best = best.min(objective(&[c1, c2, 1.0 - c1 - c2], xbar, dbar, w, lambda));
            }
        }
        best
    }

    #[test]
    fn shrink_examples() {
        assert!((shrink(1.2, 0.5) - 0.7).abs() < 1e-15);
        assert_eq!(shrink(-0.3, 0.5), 0.0);
        assert!((shrink(-2.0, 0.5) + 1.5).abs() < 1e-15);
        assert_eq!(shrink(0.5, 0.5), 0.0);
        assert_eq!(shrink(3.0, 0.0), 3.0);
    }

    #[test]
    fn shrink_matches_ternary_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let v: f64 = rng.random_range(-5.0..5.0);
            let mu: f64 = rng.random_range(0.2..5.0);
            // argmin_a |a| + (μ/2)(a − v)², comparing f(m1) − f(m2) in
            // factored form to avoid cancellation near the minimum
            let diff =
                |m1: f64, m2: f64| m1.abs() - m2.abs() + 0.5 * mu * (m1 - m2) * (m1 + m2 - 2.0 * v);
            let (mut lo, mut hi) = (-10.0f64, 10.0f64);
            for _ in 0..300 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if diff(m1, m2) < 0.0 {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            assert!((0.5 * (lo + hi) - shrink(v, 1.0 / mu)).abs() <= 1e-8);
        }
    }

    #[test]
    fn prefactor_scalar_case() {
        let dbar = DMatrix::from_element(1, 1, 1.0);
        let f = prefactor(&dbar, &WeightVector::ones(1), &cfg(1.0, 1e-6)).unwrap();
        assert!((f.lower()[(0, 0)] - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn prefactor_solve_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dbar = DMatrix::from_fn(4, 6, |_, _| rng.random_range(-1.0..1.0));
        let w = WeightVector::new((0..6).map(|_| rng.random_range(0.0..3.0)).collect()).unwrap();
        let config = cfg(0.7, 1e-6);
        let f = prefactor(&dbar, &w, &config).unwrap();
        let b = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        let oracle = system_matrix(&dbar, &w, &config).lu().solve(&b).unwrap();
        assert!((f.solve(&b) - oracle).amax() <= 1e-10);
    }

    #[test]
    fn zero_weight_keeps_system_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g: Vec<_> = (0..5).map(|_| random_spd(&mut rng, 3, 1.0)).collect();
        let fact = factorize(&g, KernelParams::new(0.5).unwrap()).unwrap();
        let mut w: Vec<f64> = (0..5).map(|_| rng.random_range(0.5..2.0)).collect();
        w[0] = 0.0;
        let w = WeightVector::new(w).unwrap();
        let m = system_matrix(fact.whitened_dict(), &w, &cfg(0.1, 1e-6));
        assert!(m.symmetric_eigenvalues().min() > 0.0);
        assert!(prefactor(fact.whitened_dict(), &w, &cfg(0.1, 1e-6)).is_ok());
    }

    #[test]
    fn invalid_config_and_weights_rejected() {
        let dbar = DMatrix::identity(2, 2);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let bad = SolverConfig {
            mu: 0.0,
            ..cfg(1.0, 1e-6)
        };
        assert!(solve(&x, &dbar, &WeightVector::ones(2), &bad).is_err());
        assert!(WeightVector::new(vec![1.0, -0.1]).is_err());
        assert!(matches!(
            solve(&x, &dbar, &WeightVector::ones(3), &cfg(1.0, 1e-6)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn two_atom_instance_matches_grid() {
        let dbar = DMatrix::identity(2, 2);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let w = WeightVector::new(vec![0.1, 10.0]).unwrap();
        let code = solve(&x, &dbar, &w, &cfg(1.0, 1e-8)).unwrap();
        let (grid, _) = grid_min_2(&x, &dbar, &w, 1.0, -2.0, 3.0, 1e-5);
        assert!(code.converged);
        assert!(
            (code.objective - grid).abs() <= 1e-4,
            "{} vs {}",
            code.objective,
            grid
        );
    }

    #[test]
    fn query_on_zero_weight_atom_recovers_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g: Vec<_> = (0..6).map(|_| random_spd(&mut rng, 3, 1.0)).collect();
        let fact = factorize(&g, KernelParams::new(0.5).unwrap()).unwrap();
        let j = 2;
        let xbar = fact.embed_query(&g[j]).unwrap();
        let w: Vec<f64> = g
            .iter()
            .map(|a| crate::spd::dist_log_euclidean(a, &g[j]).unwrap())
            .collect();
        assert_eq!(w[j], 0.0);
        let w = WeightVector::new(w).unwrap();
        let config = SolverConfig {
            lambda: 1.0,
            mu: 1.0,
            eps: 1e-9,
            max_iter: 5000,
        };
        let code = solve(&xbar, fact.whitened_dict(), &w, &config).unwrap();
        assert!(code.c[j] >= 0.99, "{:?}", code.c);
        assert!(code.objective <= 1e-6, "{}", code.objective);
    }

    #[test]
    fn unit_weights_match_unweighted_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dbar = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let x = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let w = WeightVector::ones(3);
        let code = solve(&x, &dbar, &w, &cfg(1.0, 1e-8)).unwrap();
        assert!(code.converged);
        assert!(code.c.iter().all(|v| v.abs() < 3.0));
        let grid = grid_min_3(&x, &dbar, &w, 1.0, -3.0, 3.0, 2e-3);
        assert!(
            (code.objective - grid).abs() <= 1e-4 * 5.0,
            "{} vs {}",
            code.objective,
            grid
        );
        assert!(code.objective <= grid + 1e-6);
    }

    #[test]
    fn converged_code_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g: Vec<_> = (0..8).map(|_| random_spd(&mut rng, 3, 1.0)).collect();
        let fact = factorize(&g, KernelParams::new(0.5).unwrap()).unwrap();
        let q = random_spd(&mut rng, 3, 1.0);
        let xbar = fact.embed_query(&q).unwrap();
        let w = WeightVector::new(
            g.iter()
                .map(|a| crate::spd::dist_log_euclidean(a, &q).unwrap())
                .collect(),
        )
        .unwrap();
        let config = cfg(1.0, 1e-6);
        let mut state = AdmmState::new(&xbar, fact.whitened_dict(), &w, config).unwrap();
        let mut converged = false;
        for _ in 0..config.max_iter {
            let change = state.step().unwrap();
            if change <= config.eps && state.affine_residual() <= config.eps {
                converged = true;
                break;
            }
        }
        assert!(converged);
        let c_before = state.c.clone();
        state.step().unwrap();
        assert!((&state.c - c_before).amax() <= 10.0 * config.eps);

        let code = solve(&xbar, fact.whitened_dict(), &w, &config).unwrap();
        assert!(code.converged && code.affine_residual <= config.eps);
        assert_eq!(code.iterations, state.iterations - 1);
    }

    #[test]
    fn joint_scaling_of_lambda_and_weights_keeps_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let dbar = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
            let x = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let w = vec![rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)];
            let t = rng.random_range(0.5..3.0);
            let lambda = rng.random_range(0.5..2.0);
            let w1 = WeightVector::new(w.clone()).unwrap();
            let wt = WeightVector::new(w.iter().map(|v| v * t).collect()).unwrap();
            let (f1, c1) = grid_min_2(&x, &dbar, &w1, lambda, -4.0, 4.0, 1e-4);
            let (ft, ct) = grid_min_2(&x, &dbar, &wt, t * lambda, -4.0, 4.0, 1e-4);
            assert!((c1 - ct).abs() <= 2e-4);
            assert!((ft - t * f1).abs() <= 1e-6 * ft.max(1.0));
        }
    }

    #[test]
    fn hitting_max_iter_is_reported_not_raised() {
        let dbar = DMatrix::identity(2, 2);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let w = WeightVector::new(vec![0.1, 10.0]).unwrap();
        let config = SolverConfig {
            max_iter: 2,
            eps: 1e-14,
            ..cfg(1.0, 1e-14)
        };
        let code = solve(&x, &dbar, &w, &config).unwrap();
        assert!(!code.converged);
        assert_eq!(code.iterations, 2);
    }

    #[test]
    fn bad_scaling_is_non_finite() {
        let dbar = DMatrix::from_element(1, 2, 1e300);
        let x = DVector::from_vec(vec![1e300]);
        let r = solve(&x, &dbar, &WeightVector::ones(2), &cfg(1.0, 1e-6));
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }
}
