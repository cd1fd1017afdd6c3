use std::collections::BTreeSet;

use crcal::forecast::OrderedForecast;
use crcal::{
    build_region, compute_crc_curve, sort_forecasts, ConfidenceLevel, ForecastVector, LabelId,
};
use proptest::prelude::*;

fn forecast_strategy(max_labels: usize) -> impl Strategy<Value = ForecastVector> {
    (2..=max_labels)
        .prop_flat_map(|k| (prop::collection::vec(0u32..20, k), 0..k))
        .prop_filter("needs positive mass", |(w, _)| w.iter().any(|&x| x > 0))
        .prop_map(|(w, t)| {
            let total: u32 = w.iter().sum();
            let probs = w.iter().map(|&x| x as f64 / total as f64).collect();
            ForecastVector::new("p", probs, Some(LabelId(t))).unwrap()
        })
}

/// Largest excluded prefix of the ascending order with mass below `delta`,
/// found by trying every cut.
fn brute_force_region(f: &ForecastVector, delta: f64) -> BTreeSet<LabelId> {
    let sorted = sort_forecasts(f);
    let k = sorted.len();
    for start in (0..k).rev() {
        let excluded: f64 = sorted[..start].iter().map(|(_, p)| p).sum();
        if excluded < delta {
            return sorted[start..].iter().map(|&(l, _)| l).collect();
        }
    }
    sorted.iter().map(|&(l, _)| l).collect()
}

proptest! {
    #[test]
    fn region_matches_brute_force(f in forecast_strategy(8), delta in 0.0f64..=1.0) {
        let region = build_region(&f, ConfidenceLevel::new(delta).unwrap());
        prop_assert_eq!(region.member_set(), brute_force_region(&f, delta));
    }

    #[test]
    fn excluded_mass_below_delta(f in forecast_strategy(8), delta in 0.0f64..=1.0) {
        let region = build_region(&f, ConfidenceLevel::new(delta).unwrap());
        prop_assert!(!region.is_empty());
        if delta > 0.0 {
            prop_assert!(region.excluded_mass() < delta);
        } else {
            prop_assert_eq!(region.len(), f.num_labels());
        }
    }

    #[test]
    fn regions_nest(f in forecast_strategy(8), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let wide = build_region(&f, ConfidenceLevel::new(lo).unwrap()).member_set();
        let narrow = build_region(&f, ConfidenceLevel::new(hi).unwrap()).member_set();
        prop_assert!(narrow.is_subset(&wide));
    }

    #[test]
    fn members_outrank_non_members(f in forecast_strategy(8), delta in 0.0f64..=1.0) {
        let region = build_region(&f, ConfidenceLevel::new(delta).unwrap());
        let min_in = region.members().iter().map(|&l| f.prob(l)).fold(f64::INFINITY, f64::min);
        for l in (0..f.num_labels()).map(LabelId) {
            if !region.contains(l) {
                prop_assert!(f.prob(l) <= min_in);
            }
        }
    }

    #[test]
    fn minimal_region(f in forecast_strategy(8), delta in 0.0f64..=1.0) {
        // dropping the least probable member would push excluded mass to delta or above
        let region = build_region(&f, ConfidenceLevel::new(delta).unwrap());
        let last = *region.members().last().unwrap();
        if region.len() > 1 {
            prop_assert!(region.excluded_mass() + f.prob(last) >= delta);
        }
    }

    #[test]
    fn permutation_equivariant(f in forecast_strategy(6), delta in 0.0f64..=1.0, rot in 0usize..6) {
        let k = f.num_labels();
        let rot = rot % k;
        // distinct probabilities keep the region independent of tie-breaking
        let distinct: BTreeSet<u64> = f.probs().iter().map(|p| p.to_bits()).collect();
        prop_assume!(distinct.len() == k);
        let permuted: Vec<f64> = (0..k).map(|i| f.probs()[(i + rot) % k]).collect();
        let g = ForecastVector::new("q", permuted, None).unwrap();
        let level = ConfidenceLevel::new(delta).unwrap();
        let original = build_region(&f, level).member_set();
        let mapped: BTreeSet<LabelId> = build_region(&g, level)
            .members()
            .iter()
            .map(|l| LabelId((l.index() + rot) % k))
            .collect();
        prop_assert_eq!(original, mapped);
    }

    #[test]
    fn ordered_sweep_agrees(f in forecast_strategy(8), delta in 0.0f64..=1.0) {
        let ordered = OrderedForecast::new(&f);
        let region = build_region(&f, ConfidenceLevel::new(delta).unwrap());
        prop_assert_eq!(ordered.region_size(delta), region.len());
        prop_assert_eq!(ordered.errs(delta), Some(!region.contains(f.true_label().unwrap())));
    }

    #[test]
    fn crc_lines_monotone(batch in prop::collection::vec(forecast_strategy(5), 1..40)) {
        let k = batch[0].num_labels();
        let batch: Vec<_> = batch.into_iter().filter(|f| f.num_labels() == k).collect();
        let curve = compute_crc_curve(&batch, 20).unwrap();
        for w in curve.err_at().windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for w in curve.unc_at().windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        prop_assert_eq!(curve.err_at()[0], 0.0);
        prop_assert_eq!(curve.unc_at()[0], 1.0);
    }
}

#[test]
fn sort_is_ascending_and_stable() {
    let f = ForecastVector::new("t", vec![0.3, 0.2, 0.3, 0.2], None).unwrap();
    let order: Vec<usize> = sort_forecasts(&f).iter().map(|(l, _)| l.index()).collect();
    assert_eq!(order, vec![1, 3, 0, 2]);
}
