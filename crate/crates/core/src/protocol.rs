//! Repeated train/test evaluation: split, preprocess, train, forecast, then
//! score the forecasts and their CRC curve, once per seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crc::{
    compute_crc_curve, verdict, CalibrationVerdict, CrcCurve, DEFAULT_GRID_INTERVALS,
    DEFAULT_LOOSE_TOLERANCE,
};
use crate::dataset::{preprocess_with_scope, split, Dataset, PreprocessScope, SplitPlan, SPLIT_GENERATOR};
use crate::error::{Error, Result};
use crate::learners::{train, LearnerConfig};
use crate::metrics::{score_forecasts, ForecastScore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOptions {
    pub grid_intervals: usize,
    pub loose_tolerance: f64,
    pub scope: PreprocessScope,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            grid_intervals: DEFAULT_GRID_INTERVALS,
            loose_tolerance: DEFAULT_LOOSE_TOLERANCE,
            scope: PreprocessScope::Train,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub forecast: ForecastScore,
    pub curve: CrcCurve,
    pub verdict: CalibrationVerdict,
}

/// Scores reported per seed and as means over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBlock {
    pub error_rate_percent: f64,
    pub square_loss: f64,
    pub crc_err_above_area: f64,
    pub crc_avg_width_area: f64,
    pub strict_calibrated: bool,
    pub loose_calibrated: bool,
}

impl ScoreBlock {
    fn from_run(run: &SeedRun) -> Self {
        Self {
            error_rate_percent: run.forecast.error_rate_percent,
            square_loss: run.forecast.square_loss,
            crc_err_above_area: run.verdict.err_above_area,
            crc_avg_width_area: run.verdict.avg_width_area,
            strict_calibrated: run.verdict.strict_calibrated,
            loose_calibrated: run.verdict.loose_calibrated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedBlock {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(flatten)]
    pub scores: ScoreBlock,
}

/// JSON report of a protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub dataset: String,
    pub n: usize,
    pub learner: LearnerConfig,
    pub train_fraction: f64,
    pub preprocess_scope: PreprocessScope,
    pub split_generator: String,
    pub grid_intervals: usize,
    pub loose_tolerance: f64,
    pub seeds: Vec<SeedBlock>,
    pub mean: ScoreBlock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub runs: Vec<SeedRun>,
    pub report: ProtocolReport,
}

fn run_seed(
    data: &Dataset,
    config: &LearnerConfig,
    plan: &SplitPlan,
    options: &ProtocolOptions,
    seed: u64,
) -> Result<SeedRun> {
    let (train_raw, test_raw) = split(data, plan, seed)?;
    let (train_set, test_set) = preprocess_with_scope(&train_raw, &test_raw, options.scope)?;
    let model = train(&train_set, config)?;
    let forecasts = model.forecast_dataset(&test_set)?;
    let forecast = score_forecasts(&forecasts)?;
    let curve = compute_crc_curve(&forecasts, options.grid_intervals)?;
    let verdict = verdict(&curve, options.loose_tolerance)?;
    Ok(SeedRun {
        seed,
        n_train: train_set.len(),
        n_test: test_set.len(),
        forecast,
        curve,
        verdict,
    })
}

/// Runs every seed of `plan` and averages the results. Seeds run in
/// parallel; results keep the plan's seed order.
pub fn run_protocol(
    data: &Dataset,
    config: &LearnerConfig,
    plan: &SplitPlan,
    options: &ProtocolOptions,
) -> Result<ProtocolRun> {
    config.validate()?;
    if options.grid_intervals < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least 2 intervals, got {}",
            options.grid_intervals
        )));
    }
    if options.loose_tolerance.is_nan() || options.loose_tolerance < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "loose tolerance {} must be >= 0",
            options.loose_tolerance
        )));
    }
    if (0..data.len()).any(|i| data.class_of(i).is_none()) {
        return Err(Error::Schema(format!("dataset `{}` has rows without a class", data.name())));
    }
    let runs = plan
        .seeds()
        .par_iter()
        .map(|&seed| {
            run_seed(data, config, plan, options, seed).map_err(|e| Error::Seed {
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let count = runs.len() as f64;
    let mean_of = |f: fn(&SeedRun) -> f64| runs.iter().map(f).sum::<f64>() / count;
    let err_area = mean_of(|r| r.verdict.err_above_area);
    let mean = ScoreBlock {
        error_rate_percent: mean_of(|r| r.forecast.error_rate_percent),
        square_loss: mean_of(|r| r.forecast.square_loss),
        crc_err_above_area: err_area,
        crc_avg_width_area: mean_of(|r| r.verdict.avg_width_area),
        strict_calibrated: err_area == 0.0,
        loose_calibrated: err_area <= options.loose_tolerance,
    };
    let report = ProtocolReport {
        dataset: data.name().to_string(),
        n: data.len(),
        learner: config.clone(),
        train_fraction: plan.train_fraction(),
        preprocess_scope: options.scope,
        split_generator: SPLIT_GENERATOR.to_string(),
        grid_intervals: options.grid_intervals,
        loose_tolerance: options.loose_tolerance,
        seeds: runs
            .iter()
            .map(|r| SeedBlock {
                seed: r.seed,
                n_train: r.n_train,
                n_test: r.n_test,
                scores: ScoreBlock::from_run(r),
            })
            .collect(),
        mean,
    };
    Ok(ProtocolRun { runs, report })
}
