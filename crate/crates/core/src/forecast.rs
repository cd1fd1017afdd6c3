//! Probability forecasts and their conversion into confidence region
//! predictions.
//!
//! A forecast assigns a probability to every label. Sorting the labels by
//! increasing probability and dropping the longest prefix whose total mass
//! stays strictly below `delta` leaves a region that should contain the true
//! label with frequency at least `1 - delta`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted deviation of a forecast's sum from one. Vectors inside the
/// tolerance are renormalized, vectors outside it are rejected.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-2;

/// Sums closer to one than this are kept verbatim. Dividing by a sum that
/// differs from one only by rounding noise can move a probability across a
/// region boundary (e.g. 0.01 against delta = 0.01).
const RENORMALIZE_THRESHOLD: f64 = 1e-9;

/// Index of a label inside its [`LabelSpace`].
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct LabelId(pub usize);

impl LabelId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ordered, named set of the possible labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    names: Vec<String>,
}

impl LabelSpace {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::InvalidLabelSpace(format!(
                "need at least 2 labels, got {}",
                names.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(Error::InvalidLabelSpace("empty label name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidLabelSpace(format!(
                    "duplicate label name `{name}`"
                )));
            }
        }
        Ok(Self { names })
    }

    /// Labels named `0`, `1`, ... `n - 1`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, label: LabelId) -> &str {
        &self.names[label.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id_of(&self, name: &str) -> Option<LabelId> {
        self.names.iter().position(|n| n == name).map(LabelId)
    }

    pub fn ids(&self) -> impl Iterator<Item = LabelId> {
        (0..self.names.len()).map(LabelId)
    }
}

/// One example's estimated conditional probability for every label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastVector {
    example_id: String,
    probs: Vec<f64>,
    true_label: Option<LabelId>,
}

impl ForecastVector {
    /// Validates `probs` and applies the normalization policy.
    ///
    /// Entries must be finite and within `[0, 1]`; the sum must lie within
    /// [`NORMALIZATION_TOLERANCE`] of one.
    pub fn new(
        example_id: impl Into<String>,
        probs: Vec<f64>,
        true_label: Option<LabelId>,
    ) -> Result<Self> {
        let example_id = example_id.into();
        let invalid = |reason: String| Error::InvalidForecast {
            example_id: example_id.clone(),
            reason,
        };
        if probs.len() < 2 {
            return Err(invalid(format!("need at least 2 labels, got {}", probs.len())));
        }
        for (j, &p) in probs.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("probability {p} for label {j} outside [0, 1]")));
            }
        }
        if let Some(label) = true_label {
            if label.0 >= probs.len() {
                return Err(invalid(format!(
                    "true label {label} outside {} labels",
                    probs.len()
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        let deviation = (sum - 1.0).abs();
        if deviation > NORMALIZATION_TOLERANCE {
            return Err(invalid(format!(
                "probabilities sum to {sum}, more than {NORMALIZATION_TOLERANCE} from 1"
            )));
        }
        let probs = if deviation > RENORMALIZE_THRESHOLD {
            probs.into_iter().map(|p| p / sum).collect()
        } else {
            probs
        };
        Ok(Self {
            example_id,
            probs,
            true_label,
        })
    }

    pub fn example_id(&self) -> &str {
        &self.example_id
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, label: LabelId) -> f64 {
        self.probs[label.0]
    }

    pub fn true_label(&self) -> Option<LabelId> {
        self.true_label
    }

    pub fn num_labels(&self) -> usize {
        self.probs.len()
    }

    /// Most probable label; ties go to the lowest index.
    pub fn argmax(&self) -> LabelId {
        let mut best = 0;
        for (j, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = j;
            }
        }
        LabelId(best)
    }
}

/// A confidence level `1 - delta`, stored as `delta`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfidenceLevel(f64);

impl ConfidenceLevel {
    pub fn new(delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!(
                "delta {delta} outside [0, 1]"
            )));
        }
        Ok(Self(delta))
    }

    pub fn from_confidence(confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidParameter(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self(1.0 - confidence))
    }

    pub fn delta(self) -> f64 {
        self.0
    }

    pub fn confidence(self) -> f64 {
        1.0 - self.0
    }
}

/// Labels predicted for one example at one confidence level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPrediction {
    example_id: String,
    delta: f64,
    /// Ordered by descending forecast probability.
    members: Vec<LabelId>,
    excluded_mass: f64,
    num_labels: usize,
}

impl RegionPrediction {
    pub fn example_id(&self) -> &str {
        &self.example_id
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Members, most probable first.
    pub fn members(&self) -> &[LabelId] {
        &self.members
    }

    pub fn member_set(&self) -> BTreeSet<LabelId> {
        self.members.iter().copied().collect()
    }

    pub fn contains(&self, label: LabelId) -> bool {
        self.members.contains(&label)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Total forecast probability of the labels left out.
    pub fn excluded_mass(&self) -> f64 {
        self.excluded_mass
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }
}

/// Labels paired with their probabilities in non-decreasing probability order.
/// Equal probabilities keep ascending label order.
pub fn sort_forecasts(forecast: &ForecastVector) -> Vec<(LabelId, f64)> {
    let mut pairs: Vec<(LabelId, f64)> = forecast
        .probs
        .iter()
        .enumerate()
        .map(|(j, &p)| (LabelId(j), p))
        .collect();
    // Stable sort keeps index order among ties.
    pairs.sort_by(|a, b| a.1.total_cmp(&b.1));
    pairs
}

/// A forecast with its ascending order and prefix masses precomputed, so the
/// region at any `delta` is found by binary search.
#[derive(Debug, Clone)]
pub struct OrderedForecast {
    ascending: Vec<(LabelId, f64)>,
    /// `prefix[k]` is the mass of the `k` least probable labels.
    prefix: Vec<f64>,
    /// Position of the true label in `ascending`, when known.
    true_rank: Option<usize>,
}

impl OrderedForecast {
    pub fn new(forecast: &ForecastVector) -> Self {
        let ascending = sort_forecasts(forecast);
        let mut prefix = Vec::with_capacity(ascending.len() + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for &(_, p) in &ascending {
            acc += p;
            prefix.push(acc);
        }
        let true_rank = forecast
            .true_label
            .and_then(|t| ascending.iter().position(|&(l, _)| l == t));
        Self {
            ascending,
            prefix,
            true_rank,
        }
    }

    pub fn num_labels(&self) -> usize {
        self.ascending.len()
    }

    /// Index into the ascending order of the first region member.
    ///
    /// The region keeps labels `j..` (1-based `j`) where `j` is the largest
    /// `k` whose strict prefix mass is below `delta`. Prefix masses never
    /// decrease, so that count is a partition point. At `delta = 0` no `k`
    /// qualifies and the whole label set is kept.
    pub fn region_start(&self, delta: f64) -> usize {
        let n = self.ascending.len();
        let qualifying = self.prefix[..n].partition_point(|&mass| mass < delta);
        qualifying.saturating_sub(1)
    }

    pub fn region_size(&self, delta: f64) -> usize {
        self.ascending.len() - self.region_start(delta)
    }

    /// `None` when the forecast carries no true label.
    pub fn errs(&self, delta: f64) -> Option<bool> {
        self.true_rank.map(|rank| rank < self.region_start(delta))
    }

    fn region(&self, example_id: &str, delta: f64) -> RegionPrediction {
        let start = self.region_start(delta);
        RegionPrediction {
            example_id: example_id.to_string(),
            delta,
            members: self.ascending[start..].iter().rev().map(|&(l, _)| l).collect(),
            excluded_mass: self.prefix[start],
            num_labels: self.ascending.len(),
        }
    }
}

/// Region prediction for one forecast at confidence `1 - delta`.
pub fn build_region(forecast: &ForecastVector, delta: ConfidenceLevel) -> RegionPrediction {
    OrderedForecast::new(forecast).region(&forecast.example_id, delta.delta())
}

/// [`build_region`] over a batch that must share one label count.
pub fn build_regions_batch(
    forecasts: &[ForecastVector],
    delta: ConfidenceLevel,
) -> Result<Vec<RegionPrediction>> {
    let Some(first) = forecasts.first() else {
        return Ok(Vec::new());
    };
    let num_labels = first.num_labels();
    forecasts
        .iter()
        .map(|f| {
            if f.num_labels() != num_labels {
                return Err(Error::InvalidForecast {
                    example_id: f.example_id.clone(),
                    reason: format!(
                        "has {} labels, batch expects {num_labels}",
                        f.num_labels()
                    ),
                });
            }
            Ok(build_region(f, delta))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abdominal() -> LabelSpace {
        LabelSpace::new([
            "Appx", "Div", "Perf", "Non-spec", "Cholis", "Intest", "Pancr", "Renal", "Dyspep",
        ])
        .unwrap()
    }

    fn names(space: &LabelSpace, region: &RegionPrediction) -> BTreeSet<String> {
        region
            .members()
            .iter()
            .map(|&l| space.name(l).to_string())
            .collect()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn delta(d: f64) -> ConfidenceLevel {
        ConfidenceLevel::new(d).unwrap()
    }

    const DW1653: [f64; 9] = [0.0, 0.0, 0.0, 0.03, 0.85, 0.0, 0.01, 0.0, 0.11];
    const NB1653: [f64; 9] = [
        3.08e-9, 4.5e-6, 3.27e-6, 4.37e-5, 0.99, 4.2e-3, 3.38e-3, 4.1e-10, 1.33e-4,
    ];

    #[test]
    fn sort_ends_with_largest_labels() {
        let space = abdominal();
        let f = ForecastVector::new("1653", DW1653.to_vec(), None).unwrap();
        let sorted = sort_forecasts(&f);
        let tail: Vec<(&str, f64)> = sorted[5..]
            .iter()
            .map(|&(l, p)| (space.name(l), p))
            .collect();
        assert_eq!(
            tail,
            vec![("Pancr", 0.01), ("Non-spec", 0.03), ("Dyspep", 0.11), ("Cholis", 0.85)]
        );
    }

    #[test]
    fn uniform_ties_sort_by_index() {
        let third = 1.0 / 3.0;
        let f = ForecastVector::new("u", vec![third; 3], None).unwrap();
        let order: Vec<usize> = sort_forecasts(&f).iter().map(|(l, _)| l.0).collect();
        assert_eq!(order, vec![0, 1, 2]);
    }

    #[test]
    fn dw13nn_regions() {
        let space = abdominal();
        let f = ForecastVector::new("1653", DW1653.to_vec(), None).unwrap();
        assert_eq!(
            names(&space, &build_region(&f, delta(0.05))),
            set(&["Cholis", "Dyspep"])
        );
        assert_eq!(
            names(&space, &build_region(&f, delta(0.01))),
            set(&["Cholis", "Dyspep", "Non-spec", "Pancr"])
        );
    }

    #[test]
    fn naive_bayes_region_is_single_label() {
        let space = abdominal();
        let f = ForecastVector::new("1653", NB1653.to_vec(), None).unwrap();
        let r = build_region(&f, delta(0.05));
        assert_eq!(names(&space, &r), set(&["Cholis"]));
    }

    #[test]
    fn one_hot_region() {
        let f = ForecastVector::new("a", vec![0.0, 1.0, 0.0], None).unwrap();
        let r = build_region(&f, delta(0.05));
        assert_eq!(r.members(), &[LabelId(1)]);
        assert_eq!(r.excluded_mass(), 0.0);
    }

    #[test]
    fn zero_delta_keeps_everything() {
        let f = ForecastVector::new("a", vec![0.0, 1.0, 0.0], None).unwrap();
        let r = build_region(&f, delta(0.0));
        assert_eq!(r.len(), 3);
        assert_eq!(r.excluded_mass(), 0.0);
    }

    #[test]
    fn members_listed_most_probable_first() {
        let f = ForecastVector::new("a", vec![0.2, 0.5, 0.3], None).unwrap();
        let r = build_region(&f, delta(0.0));
        assert_eq!(r.members(), &[LabelId(1), LabelId(2), LabelId(0)]);
    }

    #[test]
    fn delta_one_follows_formula() {
        let f = ForecastVector::new("a", vec![0.2, 0.5, 0.3], None).unwrap();
        assert_eq!(build_region(&f, delta(1.0)).members(), &[LabelId(1)]);
        // exact ties at the top: the later index sorts last and survives
        let f = ForecastVector::new("b", vec![0.5, 0.5], None).unwrap();
        assert_eq!(build_region(&f, delta(1.0)).members(), &[LabelId(1)]);
    }

    #[test]
    fn normalization_policy() {
        let ok = ForecastVector::new("a", vec![0.4995, 0.5], None).unwrap();
        let sum: f64 = ok.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(ForecastVector::new("b", vec![0.4, 0.5], None).is_err());
        assert!(ForecastVector::new("c", vec![-0.1, 1.1], None).is_err());
        assert!(ForecastVector::new("d", vec![f64::NAN, 1.0], None).is_err());
        assert!(ForecastVector::new("e", vec![1.0], None).is_err());
        assert!(ForecastVector::new("f", vec![0.5, 0.5], Some(LabelId(2))).is_err());
    }

    #[test]
    fn near_unit_sums_are_kept_verbatim() {
        let f = ForecastVector::new("a", DW1653.to_vec(), None).unwrap();
        assert_eq!(f.probs(), &DW1653);
    }

    #[test]
    fn batch_rejects_mixed_label_counts() {
        let a = ForecastVector::new("a", vec![0.5, 0.5], None).unwrap();
        let b = ForecastVector::new("b", vec![0.2, 0.3, 0.5], None).unwrap();
        let err = build_regions_batch(&[a, b], delta(0.1)).unwrap_err();
        assert!(err.to_string().contains("`b`"));
        assert!(build_regions_batch(&[], delta(0.1)).unwrap().is_empty());
    }

    #[test]
    fn label_space_validation() {
        assert!(LabelSpace::new(["a"]).is_err());
        assert!(LabelSpace::new(["a", "a"]).is_err());
        assert!(LabelSpace::new(["a", ""]).is_err());
        let space = LabelSpace::new(["x", "y"]).unwrap();
        assert_eq!(space.id_of("y"), Some(LabelId(1)));
        assert_eq!(space.id_of("z"), None);
    }

    #[test]
    fn confidence_level_range() {
        assert!(ConfidenceLevel::new(-0.1).is_err());
        assert!(ConfidenceLevel::new(1.1).is_err());
        let c = ConfidenceLevel::from_confidence(0.95).unwrap();
        assert!((c.delta() - 0.05).abs() < 1e-15);
    }
}
