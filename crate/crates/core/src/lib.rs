//! Confidence region prediction from probability forecasts.
//!
//! Probability forecasts are converted into label sets that should contain
//! the true label at a requested confidence level. The crate scores those
//! regions (error fraction, width), builds Confidence Region Calibration
//! (CRC) curves and their deviation areas, ships two built-in forecasters
//! (distance-weighted K-NN, Naive Bayes) with a train/test protocol, and a
//! synthetic lab for checking the finite-sample calibration bound of
//! Bayes-optimal forecasters.

pub mod arff;
pub mod crc;
pub mod dataset;
pub mod error;
pub mod forecast;
pub mod formats;
pub mod lab;
pub mod learners;
pub mod metrics;
pub mod protocol;
pub mod svg;
pub mod util;

pub use crc::{
    avg_width_area, compute_crc_curve, err_above_area, verdict, CalibrationVerdict, CrcCurve,
    CrcSummary,
};
pub use dataset::{Dataset, PreprocessScope, Schema, SplitPlan, Value};
pub use error::{Error, Result};
pub use forecast::{
    build_region, build_regions_batch, sort_forecasts, ConfidenceLevel, ForecastVector, LabelId,
    LabelSpace, RegionPrediction,
};
pub use lab::{check_theorem1, perturb_forecaster, sample_batch, BoundCheck, SyntheticTask};
pub use learners::{LearnerConfig, LearnerKind, TrainedModel};
pub use metrics::{error_rate, score_regions, square_loss, ForecastScore, RegionScore};
pub use protocol::{run_protocol, ProtocolOptions, ProtocolReport};
