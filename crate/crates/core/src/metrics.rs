//! Region quality (error indicator, width) and forecast quality (error rate,
//! square loss).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{ForecastVector, LabelId, RegionPrediction};

/// Error fraction and average width of a batch of regions at one `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub err_fraction: f64,
    pub avg_width: f64,
    pub delta: f64,
    pub n: usize,
}

/// Classification error rate (percent) and square loss of a forecast batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastScore {
    pub error_rate_percent: f64,
    pub square_loss: f64,
    pub n: usize,
}

/// 1 when the true label is missing from the region.
pub fn err_indicator(region: &RegionPrediction, true_label: LabelId) -> u8 {
    u8::from(!region.contains(true_label))
}

/// Fraction of all labels the region predicts.
pub fn unc_fraction(region: &RegionPrediction) -> f64 {
    region.len() as f64 / region.num_labels() as f64
}

pub fn score_regions(regions: &[RegionPrediction], true_labels: &[LabelId]) -> Result<RegionScore> {
    if regions.len() != true_labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} regions but {} true labels",
            regions.len(),
            true_labels.len()
        )));
    }
    let Some(first) = regions.first() else {
        return Err(Error::LengthMismatch("no regions to score".into()));
    };
    let mut errors = 0usize;
    let mut width = 0.0;
    for (region, &label) in regions.iter().zip(true_labels) {
        if region.delta() != first.delta() {
            return Err(Error::MixedDeltas {
                first: first.delta(),
                other: region.delta(),
            });
        }
        if region.num_labels() != first.num_labels() {
            return Err(Error::LengthMismatch(format!(
                "region `{}` has {} labels, expected {}",
                region.example_id(),
                region.num_labels(),
                first.num_labels()
            )));
        }
        if label.index() >= region.num_labels() {
            return Err(Error::InvalidParameter(format!(
                "true label {label} outside {} labels",
                region.num_labels()
            )));
        }
        errors += err_indicator(region, label) as usize;
        width += unc_fraction(region);
    }
    let n = regions.len();
    Ok(RegionScore {
        err_fraction: errors as f64 / n as f64,
        avg_width: width / n as f64,
        delta: first.delta(),
        n,
    })
}

pub(crate) fn true_labels(forecasts: &[ForecastVector]) -> Result<Vec<LabelId>> {
    forecasts
        .iter()
        .map(|f| {
            f.true_label()
                .ok_or_else(|| Error::MissingTrueLabel(f.example_id().to_string()))
        })
        .collect()
}

/// Percentage of forecasts whose most probable label is wrong.
pub fn error_rate(forecasts: &[ForecastVector]) -> Result<f64> {
    let labels = true_labels(forecasts)?;
    if labels.is_empty() {
        return Err(Error::LengthMismatch("no forecasts to score".into()));
    }
    let wrong = forecasts
        .iter()
        .zip(&labels)
        .filter(|(f, &t)| f.argmax() != t)
        .count();
    Ok(100.0 * wrong as f64 / labels.len() as f64)
}

/// Mean over examples of the squared distance to the one-hot true label
/// (summed over labels, not averaged).
pub fn square_loss(forecasts: &[ForecastVector]) -> Result<f64> {
    let labels = true_labels(forecasts)?;
    if labels.is_empty() {
        return Err(Error::LengthMismatch("no forecasts to score".into()));
    }
    let total: f64 = forecasts
        .iter()
        .zip(&labels)
        .map(|(f, &t)| {
            f.probs()
                .iter()
                .enumerate()
                .map(|(j, &p)| {
                    let target = if j == t.index() { 1.0 } else { 0.0 };
                    (p - target) * (p - target)
                })
                .sum::<f64>()
        })
        .sum();
    Ok(total / labels.len() as f64)
}

pub fn score_forecasts(forecasts: &[ForecastVector]) -> Result<ForecastScore> {
    Ok(ForecastScore {
        error_rate_percent: error_rate(forecasts)?,
        square_loss: square_loss(forecasts)?,
        n: forecasts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{build_region, build_regions_batch, ConfidenceLevel, LabelSpace};

    fn fv(id: &str, probs: &[f64], label: usize) -> ForecastVector {
        ForecastVector::new(id, probs.to_vec(), Some(LabelId(label))).unwrap()
    }

    fn abdominal() -> LabelSpace {
        LabelSpace::new([
            "Appx", "Div", "Perf", "Non-spec", "Cholis", "Intest", "Pancr", "Renal", "Dyspep",
        ])
        .unwrap()
    }

    fn dw13nn() -> Vec<ForecastVector> {
        vec![
            fv("1653", &[0.0, 0.0, 0.0, 0.03, 0.85, 0.0, 0.01, 0.0, 0.11], 4),
            fv("2490", &[0.0, 0.0, 0.22, 0.0, 0.0, 0.25, 0.04, 0.09, 0.4], 8),
            fv("5831", &[0.53, 0.0, 0.0, 0.425, 0.001, 0.005, 0.0, 0.0, 0.039], 3),
        ]
    }

    #[test]
    fn naive_bayes_2490_misses_dyspepsia() {
        let space = abdominal();
        let f = fv(
            "2490",
            &[9.36e-5, 0.01, 0.17, 2.26e-5, 0.16, 0.46, 0.2, 2.17e-7, 2.2e-4],
            8,
        );
        let r = build_region(&f, ConfidenceLevel::new(0.05).unwrap());
        let names: Vec<&str> = r.members().iter().map(|&l| space.name(l)).collect();
        assert_eq!(names, vec!["Intest", "Pancr", "Perf", "Cholis"]);
        assert_eq!(err_indicator(&r, space.id_of("Dyspep").unwrap()), 1);
    }

    #[test]
    fn full_region_never_errs() {
        let f = fv("a", &[0.1, 0.2, 0.7], 0);
        let r = build_region(&f, ConfidenceLevel::new(0.0).unwrap());
        for j in 0..3 {
            assert_eq!(err_indicator(&r, LabelId(j)), 0);
        }
        assert_eq!(unc_fraction(&r), 1.0);
    }

    #[test]
    fn widths() {
        let f = &dw13nn()[0];
        let r = build_region(f, ConfidenceLevel::new(0.05).unwrap());
        assert!((unc_fraction(&r) - 2.0 / 9.0).abs() < 1e-15);
        let one_hot = fv("b", &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], 4);
        let r = build_region(&one_hot, ConfidenceLevel::new(0.5).unwrap());
        assert!((unc_fraction(&r) - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn dw13nn_batch_score() {
        let forecasts = dw13nn();
        let regions = build_regions_batch(&forecasts, ConfidenceLevel::new(0.05).unwrap()).unwrap();
        let labels = true_labels(&forecasts).unwrap();
        let score = score_regions(&regions, &labels).unwrap();
        assert_eq!(score.err_fraction, 0.0);
        assert!((score.avg_width - 8.0 / 27.0).abs() < 1e-12);
        assert_eq!(score.n, 3);
    }

    #[test]
    fn all_wrong_batch() {
        let forecasts = vec![fv("a", &[1.0, 0.0], 1), fv("b", &[0.0, 1.0], 0)];
        let regions = build_regions_batch(&forecasts, ConfidenceLevel::new(0.5).unwrap()).unwrap();
        let score = score_regions(&regions, &true_labels(&forecasts).unwrap()).unwrap();
        assert_eq!(score.err_fraction, 1.0);
    }

    #[test]
    fn single_example_score_matches_indicators() {
        let f = fv("a", &[0.1, 0.3, 0.6], 0);
        let r = build_region(&f, ConfidenceLevel::new(0.2).unwrap());
        let score = score_regions(std::slice::from_ref(&r), &[LabelId(0)]).unwrap();
        assert_eq!(score.err_fraction, err_indicator(&r, LabelId(0)) as f64);
        assert_eq!(score.avg_width, unc_fraction(&r));
    }

    #[test]
    fn score_errors() {
        let f = fv("a", &[0.1, 0.3, 0.6], 0);
        let r1 = build_region(&f, ConfidenceLevel::new(0.2).unwrap());
        let r2 = build_region(&f, ConfidenceLevel::new(0.3).unwrap());
        assert!(matches!(
            score_regions(std::slice::from_ref(&r1), &[]),
            Err(Error::LengthMismatch(_))
        ));
        assert!(matches!(
            score_regions(&[r1, r2], &[LabelId(0), LabelId(0)]),
            Err(Error::MixedDeltas { .. })
        ));
    }

    #[test]
    fn error_rate_cases() {
        let perfect = vec![fv("a", &[1.0, 0.0], 0), fv("b", &[0.0, 1.0], 1)];
        assert_eq!(error_rate(&perfect).unwrap(), 0.0);
        let one_wrong = vec![
            fv("a", &[0.9, 0.1], 0),
            fv("b", &[0.2, 0.8], 1),
            fv("c", &[0.6, 0.4], 0),
            fv("d", &[0.7, 0.3], 1),
        ];
        assert_eq!(error_rate(&one_wrong).unwrap(), 25.0);
        // ties go to the lowest index
        assert_eq!(error_rate(&[fv("t", &[0.5, 0.5], 0)]).unwrap(), 0.0);
        let unlabeled = ForecastVector::new("u", vec![0.5, 0.5], None).unwrap();
        assert!(matches!(
            error_rate(&[unlabeled]),
            Err(Error::MissingTrueLabel(_))
        ));
    }

    #[test]
    fn square_loss_cases() {
        let third = 1.0 / 3.0;
        let uniform: Vec<_> = (0..3).map(|i| fv("u", &[third; 3], i)).collect();
        assert!((square_loss(&uniform).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let perfect = vec![fv("a", &[0.0, 1.0, 0.0], 1)];
        assert_eq!(square_loss(&perfect).unwrap(), 0.0);
        let worst = vec![fv("a", &[1.0, 0.0], 1)];
        assert_eq!(square_loss(&worst).unwrap(), 2.0);
    }
}
