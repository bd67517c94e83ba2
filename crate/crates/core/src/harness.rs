//! Repeated stratified random-split benchmarks and parameter sweeps.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::admm::SolverConfig;
use crate::bundle::SpdBundle;
use crate::classifier::{Npksrc, WeightMode};
use crate::error::{Error, Result};
use crate::kernel::KernelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplitSpec {
    pub train_per_class: usize,
    pub trials: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self, bundle: &SpdBundle) -> Result<()> {
        if self.train_per_class == 0 || self.trials == 0 {
            return Err(Error::InvalidParameter(
                "train-per-class and trials must be positive".into(),
            ));
        }
        let smallest = bundle
            .class_indices()
            .iter()
            .map(Vec::len)
            .min()
            .ok_or(Error::EmptyGallery)?;
        if self.train_per_class >= smallest {
            return Err(Error::InvalidParameter(format!(
                "train-per-class {} must be below the smallest class size {smallest}",
                self.train_per_class
            )));
        }
        Ok(())
    }

    /// `seed XOR trial`.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed ^ trial as u64
    }

    /// Stratified draw for one trial: `(train, test)` record indices, each
    /// sorted ascending.
    pub fn draw(&self, bundle: &SpdBundle, trial: usize) -> (Vec<usize>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.trial_seed(trial));
        let mut train = Vec::new();
        let mut test = Vec::new();
        for members in bundle.class_indices() {
            let picked = sample(&mut rng, members.len(), self.train_per_class);
            let mut is_train = vec![false; members.len()];
            for k in picked.iter() {
                is_train[k] = true;
            }
            for (k, &idx) in members.iter().enumerate() {
                if is_train[k] {
                    train.push(idx);
                } else {
                    test.push(idx);
                }
            }
        }
        train.sort_unstable();
        test.sort_unstable();
        (train, test)
    }
}

/// Everything needed to rerun a benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchConfig {
    pub split: SplitSpec,
    pub gamma: f64,
    pub solver: SolverConfig,
    pub weight_metric: WeightMode,
    pub normalize_weights: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: BenchConfig,
    /// Fractions in `[0, 1]`.
    pub trial_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
}

impl Report {
    pub fn from_trials(config: BenchConfig, trial_accuracies: Vec<f64>) -> Self {
        let n = trial_accuracies.len() as f64;
        let mean = trial_accuracies.iter().sum::<f64>() / n;
        let var = trial_accuracies
            .iter()
            .map(|a| (a - mean).powi(2))
            .sum::<f64>()
            / n;
        let min = trial_accuracies
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let max = trial_accuracies
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        Self {
            config,
            mean_accuracy: mean,
            std_accuracy: var.sqrt(),
            min_accuracy: min,
            max_accuracy: max,
            trial_accuracies,
        }
    }

    /// `trial,accuracy` rows followed by a `#` summary line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,accuracy\n");
        for (t, a) in self.trial_accuracies.iter().enumerate() {
            writeln!(out, "{t},{a}").unwrap();
        }
        writeln!(out, "{}", self.summary_line()).unwrap();
        out
    }

    pub fn summary_line(&self) -> String {
        let c = &self.config;
        format!(
            "# mean accuracy {:.2}% (std {:.2}%) over {} trials; lambda={} gamma={} mu={} eps={} max_iter={} weights={} seed={}",
            100.0 * self.mean_accuracy,
            100.0 * self.std_accuracy,
            self.trial_accuracies.len(),
            c.solver.lambda,
            c.gamma,
            c.solver.mu,
            c.solver.eps,
            c.solver.max_iter,
            c.weight_metric,
            c.split.seed,
        )
    }
}

/// Runs every trial of `config` on `bundle`. Trials run in parallel; each
/// trial's draw depends only on its index, so the report is schedule-independent.
pub fn run_benchmark(bundle: &SpdBundle, config: &BenchConfig) -> Result<Report> {
    config.split.validate(bundle)?;
    config.solver.validate()?;
    let params = KernelParams::new(config.gamma)?;
    let accuracies = (0..config.split.trials)
        .into_par_iter()
        .map(|t| {
            run_trial(bundle, config, params, t).map_err(|e| Error::Trial {
                trial: t,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Report::from_trials(*config, accuracies))
}

fn run_trial(
    bundle: &SpdBundle,
    config: &BenchConfig,
    params: KernelParams,
    trial: usize,
) -> Result<f64> {
    let (train, test) = config.split.draw(bundle, trial);
    let gallery = bundle.subset(&train)?;
    let probes = bundle.subset(&test)?;
    Npksrc::fit(gallery, params, config.solver, config.weight_metric)?
        .with_normalized_weights(config.normalize_weights)
        .evaluate(&probes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub gamma: f64,
    pub report: Report,
}

/// One benchmark per `(λ, γ)` grid point, λ-major.
pub fn sweep(
    bundle: &SpdBundle,
    base: &BenchConfig,
    lambda_grid: &[f64],
    gamma_grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    if lambda_grid.is_empty() || gamma_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep grids must be nonempty".into(),
        ));
    }
    let mut out = Vec::with_capacity(lambda_grid.len() * gamma_grid.len());
    for &lambda in lambda_grid {
        for &gamma in gamma_grid {
            let config = BenchConfig {
                gamma,
                solver: SolverConfig {
                    lambda,
                    ..base.solver
                },
                ..*base
            };
            out.push(SweepPoint {
                lambda,
                gamma,
                report: run_benchmark(bundle, &config)?,
            });
        }
    }
    Ok(out)
}

/// `lambda,gamma,mean_accuracy,std_accuracy` rows for plotting.
pub fn sweep_table(points: &[SweepPoint]) -> String {
    let mut out = String::from("lambda,gamma,mean_accuracy,std_accuracy\n");
    for p in points {
        writeln!(
            out,
            "{},{},{},{}",
            p.lambda, p.gamma, p.report.mean_accuracy, p.report.std_accuracy
        )
        .unwrap();
    }
    out
}
