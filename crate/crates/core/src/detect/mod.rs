//! Cough detection: acoustic features, tree-ensemble scoring, and
//! probability-threshold filtering.

mod features;
mod model;

pub use features::{
    extract_detection_features, feature_index, AcousticFeatureVector, FeatureError,
    FEATURE_NAMES, N_FEATURES,
};
pub use model::{
    parse_model, predict_cough_probability, DetectionResult, ModelError, Tree, TreeEnsembleModel,
    TreeNode,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("invalid threshold {0}: must lie in [0, 1]")]
    InvalidThreshold(f64),
}

/// Keep exactly the results with `probability >= tau`, preserving order.
pub fn filter_by_threshold(
    results: &[DetectionResult],
    tau: f64,
) -> Result<Vec<DetectionResult>, DetectError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(DetectError::InvalidThreshold(tau));
    }
    Ok(results
        .iter()
        .filter(|r| r.probability >= tau)
        .cloned()
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn results(probs: &[f64]) -> Vec<DetectionResult> {
        probs
            .iter()
            .enumerate()
            .map(|(i, &p)| DetectionResult {
                probability: p,
                source_id: format!("r{i}"),
            })
            .collect()
    }

    #[test]
    fn threshold_keeps_only_high_probabilities() {
        let kept = filter_by_threshold(&results(&[0.95, 0.85, 0.50]), 0.9).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].source_id, "r0");
    }

    #[test]
    fn zero_threshold_keeps_everything() {
        let rs = results(&[0.95, 0.85, 0.50, 0.0]);
        assert_eq!(filter_by_threshold(&rs, 0.0).unwrap().len(), rs.len());
    }

    #[test]
    fn out_of_range_threshold_is_rejected() {
        let rs = results(&[0.5]);
        assert!(filter_by_threshold(&rs, -0.1).is_err());
        assert!(filter_by_threshold(&rs, 1.1).is_err());
    }

    proptest! {
        #[test]
        fn kept_sets_shrink_as_tau_grows(
            probs in proptest::collection::vec(0.0f64..=1.0, 0..32),
            tau1 in 0.0f64..=1.0,
            tau2 in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if tau1 <= tau2 { (tau1, tau2) } else { (tau2, tau1) };
            let rs = results(&probs);
            let kept_lo = filter_by_threshold(&rs, lo).unwrap();
            let kept_hi = filter_by_threshold(&rs, hi).unwrap();
            prop_assert!(kept_hi.len() <= kept_lo.len());
            // subset, order preserved
            let ids_lo: Vec<_> = kept_lo.iter().map(|r| &r.source_id).collect();
            for r in &kept_hi {
                prop_assert!(ids_lo.contains(&&r.source_id));
            }
        }
    }
}
