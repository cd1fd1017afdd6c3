//! Synthetic checks of the finite-sample calibration bound.
//!
//! A synthetic task knows the true conditional distribution of the label given
//! the object, so it can act as a Bayes-optimal forecaster. For such a
//! forecaster the error fraction of the converted regions at confidence
//! `1 - delta` satisfies `P(Err >= delta + eps) <= exp(-2 eps^2 n)`. Running
//! many independent batches estimates the left-hand side.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crc::{compute_crc_curve, CrcCurve};
use crate::error::{Error, Result};
use crate::forecast::{build_regions_batch, ConfidenceLevel, ForecastVector, LabelId};
use crate::metrics::score_regions;
use crate::util::mix_seed;

/// Object dimension of the default softmax task.
pub const DEFAULT_DIM: usize = 2;
/// Logit scale of the default softmax task.
pub const DEFAULT_SCALE: f64 = 4.0;

/// How an object maps to its true label distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConditionalModel {
    /// Objects uniform on `[0, 1]^dim`. Label `j` has logit
    /// `scale * (cos(t_j) * (x_0 - 0.5) + sin(t_j) * (x_1 - 0.5))` with
    /// `t_j = 2 pi j / L`; further coordinates add
    /// `scale * cos(t_j * (i + 1)) * (x_i - 0.5)`.
    SoftmaxLinear { dim: usize, scale: f64 },
    /// The same distribution for every object.
    Constant(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    num_labels: usize,
    model: ConditionalModel,
    seed: u64,
    /// Forecasts are the true conditionals raised to `1 / temperature` and
    /// renormalized. 1 is the Bayes-optimal forecaster.
    temperature: f64,
}

impl SyntheticTask {
    pub fn new(num_labels: usize, model: ConditionalModel, seed: u64) -> Result<Self> {
        if num_labels < 2 {
            return Err(Error::InvalidParameter(format!(
                "synthetic task needs at least 2 labels, got {num_labels}"
            )));
        }
        match &model {
            ConditionalModel::SoftmaxLinear { dim, scale } => {
                if *dim < 2 || !scale.is_finite() {
                    return Err(Error::InvalidParameter(
                        "softmax task needs dim >= 2 and a finite scale".into(),
                    ));
                }
            }
            ConditionalModel::Constant(p) => {
                // validates range and sum
                ForecastVector::new("constant", p.clone(), None)?;
                if p.len() != num_labels {
                    return Err(Error::InvalidParameter(format!(
                        "constant conditional has {} entries for {num_labels} labels",
                        p.len()
                    )));
                }
            }
        }
        Ok(Self {
            num_labels,
            model,
            seed,
            temperature: 1.0,
        })
    }

    /// Softmax-of-linear task with the documented default coefficients.
    pub fn default_task(num_labels: usize, seed: u64) -> Result<Self> {
        Self::new(
            num_labels,
            ConditionalModel::SoftmaxLinear {
                dim: DEFAULT_DIM,
                scale: DEFAULT_SCALE,
            },
            seed,
        )
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    fn object_dim(&self) -> usize {
        match &self.model {
            ConditionalModel::SoftmaxLinear { dim, .. } => *dim,
            ConditionalModel::Constant(_) => 0,
        }
    }

    /// True label distribution of object `x`.
    pub fn conditional(&self, x: &[f64]) -> Vec<f64> {
        match &self.model {
            ConditionalModel::Constant(p) => p.clone(),
            ConditionalModel::SoftmaxLinear { scale, .. } => {
                let l = self.num_labels as f64;
                let logits: Vec<f64> = (0..self.num_labels)
                    .map(|j| {
                        let t = 2.0 * std::f64::consts::PI * j as f64 / l;
                        let mut z = t.cos() * (x[0] - 0.5) + t.sin() * (x[1] - 0.5);
                        for (i, xi) in x.iter().enumerate().skip(2) {
                            z += (t * (i + 1) as f64).cos() * (xi - 0.5);
                        }
                        scale * z
                    })
                    .collect();
                softmax(&logits)
            }
        }
    }

    /// What the forecaster reports for a true conditional.
    pub fn forecast_for(&self, conditional: &[f64]) -> Vec<f64> {
        if self.temperature == 1.0 {
            return conditional.to_vec();
        }
        let logs: Vec<f64> = conditional.iter().map(|p| p.ln() / self.temperature).collect();
        softmax(&logs)
    }

    fn sample_with(&self, n: usize, rng: &mut ChaCha8Rng, id_prefix: &str) -> Result<Vec<ForecastVector>> {
        let dim = self.object_dim();
        (0..n)
            .map(|i| {
                let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                let conditional = self.conditional(&x);
                let label = sample_label(&conditional, rng.random::<f64>());
                ForecastVector::new(
                    format!("{id_prefix}{i}"),
                    self.forecast_for(&conditional),
                    Some(label),
                )
            })
            .collect()
    }

    fn trial_rng(&self, trial: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(mix_seed(self.seed, trial as u64))
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Inverse-CDF draw; `u` in `[0, 1)`.
fn sample_label(conditional: &[f64], u: f64) -> LabelId {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &p) in conditional.iter().enumerate() {
        if p > 0.0 {
            last_positive = j;
        }
        acc += p;
        if u < acc {
            return LabelId(j);
        }
    }
    LabelId(last_positive)
}

/// `n` labeled forecasts drawn with the task's own seed.
pub fn sample_batch(task: &SyntheticTask, n: usize) -> Result<Vec<ForecastVector>> {
    if n == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    task.sample_with(n, &mut rng, "")
}

/// The same task with forecasts sharpened (`temperature < 1`) or flattened
/// (`temperature > 1`). True labels still follow the unperturbed conditionals.
pub fn perturb_forecaster(task: &SyntheticTask, temperature: f64) -> Result<SyntheticTask> {
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "temperature {temperature} must be positive"
        )));
    }
    Ok(SyntheticTask {
        temperature,
        ..task.clone()
    })
}

/// `exp(-2 eps^2 n)`.
pub fn hoeffding_bound(n: usize, epsilon: f64) -> f64 {
    (-2.0 * epsilon * epsilon * n as f64).exp()
}

/// Bound plus three binomial standard deviations at `p = bound`.
pub fn failure_threshold(bound: f64, trials: usize) -> f64 {
    bound + 3.0 * (bound * (1.0 - bound) / trials as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub n: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub observed_failure_freq: f64,
    pub bound: f64,
    pub pass: bool,
    pub mean_err: f64,
    pub temperature: f64,
    pub seed: u64,
}

fn check_ranges(n: usize, trials: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    Ok(())
}

/// Runs `trials` independent batches of size `n` and counts how often the
/// region error fraction at `delta` reaches `delta + epsilon`.
///
/// `pass` compares the observed frequency with [`failure_threshold`].
pub fn check_theorem1(
    task: &SyntheticTask,
    n: usize,
    delta: f64,
    epsilon: f64,
    trials: usize,
) -> Result<BoundCheck> {
    check_ranges(n, trials)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} outside (0, 1)")));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} outside [0, 1)")));
    }
    let level = ConfidenceLevel::new(delta)?;
    let errs = (0..trials)
        .into_par_iter()
        .map(|t| {
            let forecasts = task.sample_with(n, &mut task.trial_rng(t), "")?;
            let labels: Vec<LabelId> = forecasts.iter().filter_map(ForecastVector::true_label).collect();
            let regions = build_regions_batch(&forecasts, level)?;
            Ok(score_regions(&regions, &labels)?.err_fraction)
        })
        .collect::<Result<Vec<f64>>>()?;

    let failures = errs.iter().filter(|&&e| e >= delta + epsilon).count();
    let observed_failure_freq = failures as f64 / trials as f64;
    let bound = hoeffding_bound(n, epsilon);
    Ok(BoundCheck {
        n,
        delta,
        epsilon,
        trials,
        observed_failure_freq,
        bound,
        pass: observed_failure_freq <= failure_threshold(bound, trials),
        mean_err: errs.iter().sum::<f64>() / trials as f64,
        temperature: task.temperature,
        seed: task.seed,
    })
}

/// CRC curve over the forecasts of all `trials` batches pooled together.
pub fn pooled_crc_curve(
    task: &SyntheticTask,
    n: usize,
    trials: usize,
    grid_intervals: usize,
) -> Result<CrcCurve> {
    check_ranges(n, trials)?;
    let batches = (0..trials)
        .into_par_iter()
        .map(|t| task.sample_with(n, &mut task.trial_rng(t), &format!("t{t}-")))
        .collect::<Result<Vec<_>>>()?;
    let pooled: Vec<ForecastVector> = batches.into_iter().flatten().collect();
    compute_crc_curve(&pooled, grid_intervals)
}
