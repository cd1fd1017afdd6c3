//! Built-in probability forecasters: distance-weighted K-nearest neighbours
//! and Naive Bayes.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeKind, Dataset, Schema, Value};
use crate::error::{Error, Result};
use crate::forecast::{ForecastVector, LabelId, LabelSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Dwknn,
    NaiveBayes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    /// Neighbour count, K-NN only.
    pub k: usize,
    /// Lower bound on Gaussian variances, Naive Bayes only.
    pub variance_floor: f64,
    /// Additive smoothing of nominal frequencies, Naive Bayes only.
    pub laplace_alpha: f64,
    /// Give classes without training rows a zero prior instead of failing.
    pub allow_empty_classes: bool,
}

impl LearnerConfig {
    pub fn dwknn(k: usize) -> Self {
        Self {
            kind: LearnerKind::Dwknn,
            k,
            ..Self::naive_bayes()
        }
    }

    pub fn naive_bayes() -> Self {
        Self {
            kind: LearnerKind::NaiveBayes,
            k: 1,
            variance_floor: 1e-9,
            laplace_alpha: 1.0,
            allow_empty_classes: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !self.variance_floor.is_finite() || self.variance_floor <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "variance floor {} must be positive",
                self.variance_floor
            )));
        }
        if !self.laplace_alpha.is_finite() || self.laplace_alpha < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "laplace alpha {} must be >= 0",
                self.laplace_alpha
            )));
        }
        Ok(())
    }
}

fn training_labels(data: &Dataset) -> Result<Vec<LabelId>> {
    if data.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    (0..data.len())
        .map(|i| {
            data.class_of(i)
                .ok_or_else(|| Error::Training(format!("training row {i} has no class")))
        })
        .collect()
}

/// Maps a dataset row to a point: numerics as-is, nominals one-hot.
#[derive(Debug, Clone, PartialEq)]
struct Encoder {
    /// (attribute index, nominal value count or `None` for numeric)
    layout: Vec<(usize, Option<usize>)>,
    row_len: usize,
    dim: usize,
}

impl Encoder {
    fn new(schema: &Schema) -> Self {
        let layout: Vec<(usize, Option<usize>)> = schema
            .feature_indices()
            .map(|j| match &schema.attributes()[j].kind {
                AttributeKind::Numeric => (j, None),
                AttributeKind::Nominal(v) => (j, Some(v.len())),
            })
            .collect();
        let dim = layout.iter().map(|(_, n)| n.unwrap_or(1)).sum();
        Self {
            layout,
            row_len: schema.attributes().len(),
            dim,
        }
    }

    fn encode(&self, row: &[Value]) -> Result<Vec<f64>> {
        if row.len() != self.row_len {
            return Err(Error::DimensionMismatch {
                expected: self.row_len,
                actual: row.len(),
            });
        }
        let mut point = Vec::with_capacity(self.dim);
        for &(j, nominal) in &self.layout {
            match (row[j], nominal) {
                (Value::Numeric(x), None) => point.push(x),
                (Value::Nominal(v), Some(n)) => {
                    point.extend((0..n).map(|i| if i == v { 1.0 } else { 0.0 }));
                }
                (Value::Missing, _) => {
                    return Err(Error::InvalidParameter(format!(
                        "attribute {j} is missing; impute before K-NN"
                    )))
                }
                (v, _) => {
                    return Err(Error::InvalidParameter(format!(
                        "attribute {j} has the wrong value kind {v:?}"
                    )))
                }
            }
        }
        Ok(point)
    }
}

/// Stored training points for distance-weighted K-NN.
#[derive(Debug, Clone, PartialEq)]
pub struct DwknnModel {
    k: usize,
    points: Vec<Vec<f64>>,
    labels: Vec<LabelId>,
    num_labels: usize,
    encoder: Encoder,
}

pub fn train_dwknn(train: &Dataset, config: &LearnerConfig) -> Result<DwknnModel> {
    config.validate()?;
    let labels = training_labels(train)?;
    if config.k > train.len() {
        return Err(Error::Training(format!(
            "k = {} exceeds the {} training rows",
            config.k,
            train.len()
        )));
    }
    let encoder = Encoder::new(train.schema());
    let points = train
        .rows()
        .iter()
        .map(|r| encoder.encode(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(DwknnModel {
        k: config.k,
        points,
        labels,
        num_labels: train.schema().num_classes(),
        encoder,
    })
}

impl DwknnModel {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.encoder.dim
    }

    /// Class probabilities for an encoded point.
    ///
    /// The `k` nearest training points (Euclidean, ties by row order) vote
    /// with weight `1 / d`. If any of them sits at distance zero, the mass is
    /// shared equally among the zero-distance neighbours only.
    pub fn forecast_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.encoder.dim {
            return Err(Error::DimensionMismatch {
                expected: self.encoder.dim,
                actual: x.len(),
            });
        }
        let mut neighbours: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), i)
            })
            .collect();
        // stable: equal distances keep row order
        neighbours.sort_by(|a, b| a.0.total_cmp(&b.0));
        neighbours.truncate(self.k);

        let mut scores = vec![0.0; self.num_labels];
        let exact: Vec<usize> = neighbours
            .iter()
            .filter(|(d, _)| *d == 0.0)
            .map(|&(_, i)| i)
            .collect();
        if exact.is_empty() {
            for &(d, i) in &neighbours {
                scores[self.labels[i].index()] += 1.0 / d;
            }
        } else {
            for &i in &exact {
                scores[self.labels[i].index()] += 1.0;
            }
        }
        let total: f64 = scores.iter().sum();
        Ok(scores.into_iter().map(|s| s / total).collect())
    }

    pub fn forecast_row(&self, row: &[Value]) -> Result<Vec<f64>> {
        self.forecast_point(&self.encoder.encode(row)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum NbAttribute {
    Gaussian {
        index: usize,
        /// per class
        means: Vec<f64>,
        variances: Vec<f64>,
    },
    Nominal {
        index: usize,
        /// `probs[class][value]`
        probs: Vec<Vec<f64>>,
    },
}

/// Class priors plus per-class Gaussian or smoothed frequency likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayesModel {
    priors: Vec<f64>,
    attributes: Vec<NbAttribute>,
    row_len: usize,
}

pub fn train_naive_bayes(train: &Dataset, config: &LearnerConfig) -> Result<NaiveBayesModel> {
    config.validate()?;
    let labels = training_labels(train)?;
    let schema = train.schema();
    let space = schema.label_space();
    let num_classes = space.len();
    let mut class_counts = vec![0usize; num_classes];
    for l in &labels {
        class_counts[l.index()] += 1;
    }
    if !config.allow_empty_classes {
        if let Some(c) = class_counts.iter().position(|&c| c == 0) {
            return Err(Error::Training(format!(
                "class `{}` has no training examples",
                space.name(LabelId(c))
            )));
        }
    }
    let n = labels.len() as f64;
    let priors = class_counts.iter().map(|&c| c as f64 / n).collect();

    let mut attributes = Vec::new();
    for j in schema.feature_indices() {
        let attr = &schema.attributes()[j];
        match &attr.kind {
            AttributeKind::Numeric => {
                let mut by_class: Vec<Vec<f64>> = vec![Vec::new(); num_classes];
                for (row, l) in train.rows().iter().zip(&labels) {
                    if let Value::Numeric(x) = row[j] {
                        by_class[l.index()].push(x);
                    }
                }
                let mut means = Vec::with_capacity(num_classes);
                let mut variances = Vec::with_capacity(num_classes);
                for (c, xs) in by_class.iter().enumerate() {
                    if xs.is_empty() {
                        if class_counts[c] > 0 {
                            return Err(Error::Training(format!(
                                "attribute `{}` has no values for class `{}`",
                                attr.name,
                                space.name(LabelId(c))
                            )));
                        }
                        means.push(0.0);
                        variances.push(config.variance_floor);
                        continue;
                    }
                    let m = xs.len() as f64;
                    let mean = xs.iter().sum::<f64>() / m;
                    let var = if xs.len() > 1 {
                        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0)
                    } else {
                        0.0
                    };
                    means.push(mean);
                    variances.push(var.max(config.variance_floor));
                }
                attributes.push(NbAttribute::Gaussian {
                    index: j,
                    means,
                    variances,
                });
            }
            AttributeKind::Nominal(values) => {
                let v = values.len();
                let mut counts = vec![vec![0usize; v]; num_classes];
                for (row, l) in train.rows().iter().zip(&labels) {
                    if let Value::Nominal(x) = row[j] {
                        counts[l.index()][x] += 1;
                    }
                }
                let alpha = config.laplace_alpha;
                let probs = counts
                    .iter()
                    .map(|cs| {
                        let observed: usize = cs.iter().sum();
                        let denom = observed as f64 + alpha * v as f64;
                        if denom == 0.0 {
                            vec![1.0 / v as f64; v]
                        } else {
                            cs.iter().map(|&c| (c as f64 + alpha) / denom).collect()
                        }
                    })
                    .collect();
                attributes.push(NbAttribute::Nominal { index: j, probs });
            }
        }
    }
    Ok(NaiveBayesModel {
        priors,
        attributes,
        row_len: schema.attributes().len(),
    })
}

fn gaussian_log_density(x: f64, mean: f64, variance: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * variance).ln() - (x - mean) * (x - mean) / (2.0 * variance)
}

impl NaiveBayesModel {
    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Per-class log joint `ln P(c) + sum ln P(x_j | c)`; missing values are
    /// skipped.
    fn log_joint(&self, row: &[Value]) -> Result<Vec<f64>> {
        if row.len() != self.row_len {
            return Err(Error::DimensionMismatch {
                expected: self.row_len,
                actual: row.len(),
            });
        }
        let mut scores: Vec<f64> = self.priors.iter().map(|p| p.ln()).collect();
        for attr in &self.attributes {
            match attr {
                NbAttribute::Gaussian {
                    index,
                    means,
                    variances,
                } => match row[*index] {
                    Value::Numeric(x) => {
                        for (c, s) in scores.iter_mut().enumerate() {
                            *s += gaussian_log_density(x, means[c], variances[c]);
                        }
                    }
                    Value::Missing => {}
                    v => {
                        return Err(Error::InvalidParameter(format!(
                            "attribute {index} expects a number, got {v:?}"
                        )))
                    }
                },
                NbAttribute::Nominal { index, probs } => match row[*index] {
                    Value::Nominal(x) if x < probs[0].len() => {
                        for (c, s) in scores.iter_mut().enumerate() {
                            *s += probs[c][x].ln();
                        }
                    }
                    Value::Missing => {}
                    v => {
                        return Err(Error::InvalidParameter(format!(
                            "attribute {index} expects a declared nominal value, got {v:?}"
                        )))
                    }
                },
            }
        }
        Ok(scores)
    }

    /// Posterior class probabilities, normalized after shifting the log
    /// joints by their maximum. Classes with zero likelihood everywhere fall
    /// back to a uniform forecast.
    pub fn forecast_row(&self, row: &[Value]) -> Result<Vec<f64>> {
        let logs = self.log_joint(row)?;
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Ok(vec![1.0 / logs.len() as f64; logs.len()]);
        }
        let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / total).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Dwknn(DwknnModel),
    NaiveBayes(NaiveBayesModel),
}

pub fn train(data: &Dataset, config: &LearnerConfig) -> Result<TrainedModel> {
    match config.kind {
        LearnerKind::Dwknn => train_dwknn(data, config).map(TrainedModel::Dwknn),
        LearnerKind::NaiveBayes => train_naive_bayes(data, config).map(TrainedModel::NaiveBayes),
    }
}

impl TrainedModel {
    pub fn forecast_probs(&self, row: &[Value]) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Dwknn(m) => m.forecast_row(row),
            TrainedModel::NaiveBayes(m) => m.forecast_row(row),
        }
    }

    /// Forecast for one dataset row; the row's class, when present, becomes
    /// the true label.
    pub fn forecast(&self, example_id: impl Into<String>, row: &[Value], schema: &Schema) -> Result<ForecastVector> {
        let probs = self.forecast_probs(row)?;
        let true_label = match row.get(schema.class_index()) {
            Some(Value::Nominal(v)) => Some(LabelId(*v)),
            _ => None,
        };
        ForecastVector::new(example_id, probs, true_label)
    }

    /// Forecasts for every row, identified by position (`row-0`, `row-1`, ...).
    pub fn forecast_dataset(&self, data: &Dataset) -> Result<Vec<ForecastVector>> {
        data.rows()
            .iter()
            .enumerate()
            .map(|(i, row)| self.forecast(format!("row-{i}"), row, data.schema()))
            .collect()
    }
}

/// Reads forecasts produced elsewhere from the forecast CSV format.
pub fn import_forecasts<R: Read>(source: R) -> Result<(LabelSpace, Vec<ForecastVector>)> {
    crate::formats::read_forecast_csv(source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Attribute;

    fn numeric_data(points: &[(f64, usize)], classes: &[&str]) -> Dataset {
        let schema = Schema::with_last_class(vec![
            Attribute::numeric("x"),
            Attribute::nominal("class", classes.iter().copied()),
        ])
        .unwrap();
        let rows = points
            .iter()
            .map(|&(x, c)| vec![Value::Numeric(x), Value::Nominal(c)])
            .collect();
        Dataset::new(schema, rows, "t").unwrap()
    }

    fn q(x: f64) -> Vec<Value> {
        vec![Value::Numeric(x), Value::Missing]
    }

    #[test]
    fn knn_stores_training_rows() {
        let d = numeric_data(&[(0.0, 0), (1.0, 1), (2.0, 0)], &["A", "B"]);
        let m = train_dwknn(&d, &LearnerConfig::dwknn(2)).unwrap();
        assert_eq!(m.len(), 3);
        assert!(train_dwknn(&d, &LearnerConfig::dwknn(4)).is_err());
        let empty = numeric_data(&[], &["A", "B"]);
        assert!(train_dwknn(&empty, &LearnerConfig::dwknn(1)).is_err());
    }

    #[test]
    fn inverse_distance_weights() {
        // neighbours at distance 1 (A) and 3 (B)
        let d = numeric_data(&[(1.0, 0), (3.0, 1)], &["A", "B"]);
        let m = train_dwknn(&d, &LearnerConfig::dwknn(2)).unwrap();
        let p = m.forecast_row(&q(0.0)).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-15);
        assert!((p[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_distance_takes_all_mass() {
        let d = numeric_data(&[(1.0, 0), (1.5, 1), (2.0, 1)], &["A", "B"]);
        let m = train_dwknn(&d, &LearnerConfig::dwknn(3)).unwrap();
        assert_eq!(m.forecast_row(&q(1.0)).unwrap(), vec![1.0, 0.0]);
        let d = numeric_data(&[(1.0, 0), (1.0, 1), (2.0, 1)], &["A", "B"]);
        let m = train_dwknn(&d, &LearnerConfig::dwknn(3)).unwrap();
        assert_eq!(m.forecast_row(&q(1.0)).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn unanimous_neighbours() {
        let d = numeric_data(&[(0.1, 1), (0.2, 1), (0.9, 0)], &["A", "B"]);
        let m = train_dwknn(&d, &LearnerConfig::dwknn(2)).unwrap();
        assert_eq!(m.forecast_row(&q(0.0)).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn k_equal_n_uses_everyone() {
        let d = numeric_data(&[(1.0, 0), (2.0, 1), (4.0, 0)], &["A", "B"]);
        let m = train_dwknn(&d, &LearnerConfig::dwknn(3)).unwrap();
        let p = m.forecast_row(&q(0.0)).unwrap();
        let (a, b) = (1.0 + 0.25, 0.5);
        assert!((p[0] - a / (a + b)).abs() < 1e-15);
    }

    #[test]
    fn duplicated_training_set_with_doubled_k() {
        let base = [(0.0, 0), (1.0, 1)];
        let dup = [(0.0, 0), (1.0, 1), (0.0, 0), (1.0, 1)];
        let m1 = train_dwknn(&numeric_data(&base, &["A", "B"]), &LearnerConfig::dwknn(2)).unwrap();
        let m2 = train_dwknn(&numeric_data(&dup, &["A", "B"]), &LearnerConfig::dwknn(4)).unwrap();
        let a = m1.forecast_row(&q(0.3)).unwrap();
        let b = m2.forecast_row(&q(0.3)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        // 1/0.3 vs 1/0.7
        assert!((a[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn knn_dimension_and_missing_errors() {
        let d = numeric_data(&[(0.0, 0), (1.0, 1)], &["A", "B"]);
        let m = train_dwknn(&d, &LearnerConfig::dwknn(1)).unwrap();
        assert!(matches!(
            m.forecast_point(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 1, actual: 2 })
        ));
        assert!(m.forecast_row(&[Value::Missing, Value::Missing]).is_err());
    }

    #[test]
    fn nominal_attributes_are_one_hot_for_knn() {
        let schema = Schema::with_last_class(vec![
            Attribute::nominal("c", ["r", "g", "b"]),
            Attribute::numeric("x"),
            Attribute::nominal("class", ["A", "B"]),
        ])
        .unwrap();
        let rows = vec![
            vec![Value::Nominal(0), Value::Numeric(0.0), Value::Nominal(0)],
            vec![Value::Nominal(2), Value::Numeric(0.0), Value::Nominal(1)],
        ];
        let d = Dataset::new(schema, rows, "t").unwrap();
        let m = train_dwknn(&d, &LearnerConfig::dwknn(2)).unwrap();
        assert_eq!(m.dimension(), 4);
        let p = m
            .forecast_row(&[Value::Nominal(1), Value::Numeric(0.0), Value::Missing])
            .unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    fn nominal_data() -> Dataset {
        // attribute perfectly tracks the class
        let schema = Schema::with_last_class(vec![
            Attribute::nominal("f", ["u", "v"]),
            Attribute::nominal("class", ["A", "B"]),
        ])
        .unwrap();
        let rows = [(0, 0), (0, 0), (1, 1), (1, 1)]
            .iter()
            .map(|&(f, c)| vec![Value::Nominal(f), Value::Nominal(c)])
            .collect();
        Dataset::new(schema, rows, "t").unwrap()
    }

    #[test]
    fn laplace_smoothing_by_hand() {
        let m = train_naive_bayes(&nominal_data(), &LearnerConfig::naive_bayes()).unwrap();
        assert_eq!(m.priors(), &[0.5, 0.5]);
        match &m.attributes[0] {
            NbAttribute::Nominal { probs, .. } => {
                // (2 + 1) / (2 + 2) and (0 + 1) / (2 + 2)
                assert_eq!(probs[0], vec![0.75, 0.25]);
                assert_eq!(probs[1], vec![0.25, 0.75]);
            }
            other => panic!("unexpected {other:?}"),
        }
        // posterior for f = u: 0.5 * 0.75 / (0.5 * 0.75 + 0.5 * 0.25)
        let p = m.forecast_row(&[Value::Nominal(0), Value::Missing]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-15);
        assert!((p[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unseen_nominal_value_stays_valid() {
        let schema = Schema::with_last_class(vec![
            Attribute::nominal("f", ["u", "v", "w"]),
            Attribute::nominal("class", ["A", "B"]),
        ])
        .unwrap();
        let rows = vec![
            vec![Value::Nominal(0), Value::Nominal(0)],
            vec![Value::Nominal(1), Value::Nominal(1)],
        ];
        let d = Dataset::new(schema, rows, "t").unwrap();
        let m = train_naive_bayes(&d, &LearnerConfig::naive_bayes()).unwrap();
        let p = m.forecast_row(&[Value::Nominal(2), Value::Missing]).unwrap();
        assert!(p.iter().all(|x| x.is_finite() && *x > 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_classes_give_uniform_forecast() {
        let d = numeric_data(&[(0.0, 0), (1.0, 0), (0.0, 1), (1.0, 1)], &["A", "B"]);
        let m = train_naive_bayes(&d, &LearnerConfig::naive_bayes()).unwrap();
        let p = m.forecast_row(&q(0.3)).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_attribute_clamps_variance() {
        let d = numeric_data(&[(0.5, 0), (0.5, 0), (0.2, 1), (0.4, 1)], &["A", "B"]);
        let cfg = LearnerConfig::naive_bayes();
        let m = train_naive_bayes(&d, &cfg).unwrap();
        match &m.attributes[0] {
            NbAttribute::Gaussian { variances, .. } => {
                assert_eq!(variances[0], cfg.variance_floor);
                assert!(variances[1] > cfg.variance_floor);
            }
            other => panic!("unexpected {other:?}"),
        }
        let p = m.forecast_row(&q(0.9)).unwrap();
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_class_rejected_unless_allowed() {
        let d = numeric_data(&[(0.1, 0), (0.2, 0), (0.3, 0)], &["A", "B"]);
        let err = train_naive_bayes(&d, &LearnerConfig::naive_bayes()).unwrap_err();
        assert!(err.to_string().contains("`B`"));
        let cfg = LearnerConfig {
            allow_empty_classes: true,
            ..LearnerConfig::naive_bayes()
        };
        let m = train_naive_bayes(&d, &cfg).unwrap();
        assert_eq!(m.priors(), &[1.0, 0.0]);
        assert_eq!(m.forecast_row(&q(5.0)).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn log_space_matches_direct_product() {
        let d = numeric_data(
            &[(0.1, 0), (0.3, 0), (0.2, 0), (0.6, 1), (0.8, 1), (0.5, 2), (0.55, 2), (0.45, 2)],
            &["A", "B", "C"],
        );
        let m = train_naive_bayes(&d, &LearnerConfig::naive_bayes()).unwrap();
        let NbAttribute::Gaussian { means, variances, .. } = &m.attributes[0] else {
            panic!("expected gaussian");
        };
        for x in [0.0, 0.25, 0.5, 0.7, 1.0] {
            let direct: Vec<f64> = (0..3)
                .map(|c| {
                    let v = variances[c];
                    m.priors()[c] * (-(x - means[c]).powi(2) / (2.0 * v)).exp()
                        / (2.0 * std::f64::consts::PI * v).sqrt()
                })
                .collect();
            let total: f64 = direct.iter().sum();
            let p = m.forecast_row(&q(x)).unwrap();
            for c in 0..3 {
                assert!((p[c] - direct[c] / total).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(LearnerConfig::dwknn(0).validate().is_err());
        let bad = LearnerConfig {
            variance_floor: 0.0,
            ..LearnerConfig::naive_bayes()
        };
        assert!(bad.validate().is_err());
        let bad = LearnerConfig {
            laplace_alpha: -1.0,
            ..LearnerConfig::naive_bayes()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn forecasts_carry_true_labels() {
        let d = numeric_data(&[(0.0, 0), (1.0, 1), (0.2, 0)], &["A", "B"]);
        let m = train(&d, &LearnerConfig::dwknn(2)).unwrap();
        let f = m.forecast_dataset(&d).unwrap();
        assert_eq!(f[1].true_label(), Some(LabelId(1)));
        assert_eq!(f[1].example_id(), "row-1");
    }
}
