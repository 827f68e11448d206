//! Transfer head training and evaluation.
//!
//! A frozen embedding (the built-in pooled extractor or an externally
//! computed vector) feeds a two-node linear layer with sigmoid activations,
//! trained by AdamW on per-node binary cross-entropy against soft labels.
//! Evaluation reports the confusion matrix, per-class recalls, unweighted
//! accuracy (mean of the two recalls), and plain accuracy alongside.

mod adamw;
mod embed;
mod fit;
mod head;
mod split;

pub use adamw::{adamw_step, AdamWState};
pub use embed::{embed_pooled, EmbeddingIoError, EmbeddingSet, EmbeddingVector};
pub use fit::{train, LabeledLogMel, MixupMode, TrainConfig, TrainOutcome, TrainingData};
pub use head::{accumulate_loss_grad, bce_loss, predict, LinearHead};
pub use split::{split_train_dev, SplitKey, SplitResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrainError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("labels contain no {0} examples")]
    MissingClass(&'static str),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

/// Binary class: negative is the control ("0"), positive the patient ("1").
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn name(&self) -> &'static str {
        match self {
            Label::Negative => "negative",
            Label::Positive => "positive",
        }
    }

    pub fn to_soft(self) -> crate::augment::SoftLabel {
        match self {
            Label::Negative => crate::augment::SoftLabel::negative(),
            Label::Positive => crate::augment::SoftLabel::positive(),
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "negative" | "0" => Ok(Label::Negative),
            "positive" | "1" => Ok(Label::Positive),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Confusion counts and the derived recall metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
    pub recall_positive: f64,
    pub recall_negative: f64,
    /// Mean of the two per-class recalls (balanced accuracy / UAR).
    pub unweighted_accuracy: f64,
    /// Plain accuracy, reported alongside.
    pub accuracy: f64,
}

/// Score predictions against reference labels.
///
/// Both classes must occur among the labels, otherwise one recall is
/// undefined.
pub fn unweighted_accuracy(
    preds: &[Label],
    labels: &[Label],
) -> Result<MetricsReport, TrainError> {
    if preds.len() != labels.len() {
        return Err(TrainError::ShapeMismatch {
            expected: labels.len(),
            got: preds.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &l) in preds.iter().zip(labels.iter()) {
        match (p, l) {
            (Label::Positive, Label::Positive) => tp += 1,
            (Label::Positive, Label::Negative) => fp += 1,
            (Label::Negative, Label::Negative) => tn += 1,
            (Label::Negative, Label::Positive) => fn_ += 1,
        }
    }
    if tp + fn_ == 0 {
        return Err(TrainError::MissingClass("positive"));
    }
    if tn + fp == 0 {
        return Err(TrainError::MissingClass("negative"));
    }
    let recall_positive = tp as f64 / (tp + fn_) as f64;
    let recall_negative = tn as f64 / (tn + fp) as f64;
    Ok(MetricsReport {
        true_positive: tp,
        false_positive: fp,
        true_negative: tn,
        false_negative: fn_,
        recall_positive,
        recall_negative,
        unweighted_accuracy: (recall_positive + recall_negative) / 2.0,
        accuracy: (tp + tn) as f64 / preds.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    use Label::{Negative as N, Positive as P};

    #[test]
    fn perfect_predictions_score_one() {
        let labels = [P, N, P, N, N];
        let m = unweighted_accuracy(&labels, &labels).unwrap();
        assert_eq!(m.unweighted_accuracy, 1.0);
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn all_negative_predictions_score_one_half() {
        let labels = [P, N, P, N];
        let preds = [N, N, N, N];
        let m = unweighted_accuracy(&preds, &labels).unwrap();
        assert_eq!(m.recall_negative, 1.0);
        assert_eq!(m.recall_positive, 0.0);
        assert_eq!(m.unweighted_accuracy, 0.5);
    }

    #[test]
    fn hand_confusion_matrix() {
        // TP=3, FN=1, TN=2, FP=2 -> recalls 0.75 and 0.5 -> UA 0.625
        let labels = [P, P, P, P, N, N, N, N];
        let preds = [P, P, P, N, N, N, P, P];
        let m = unweighted_accuracy(&preds, &labels).unwrap();
        assert_eq!(
            (m.true_positive, m.false_negative, m.true_negative, m.false_positive),
            (3, 1, 2, 2)
        );
        assert_eq!(m.unweighted_accuracy, 0.625);
        assert_eq!(m.accuracy, 0.625);
    }

    #[test]
    fn single_class_labels_are_rejected() {
        assert_eq!(
            unweighted_accuracy(&[P, P], &[P, P]),
            Err(TrainError::MissingClass("negative"))
        );
        assert_eq!(
            unweighted_accuracy(&[N, N], &[N, N]),
            Err(TrainError::MissingClass("positive"))
        );
    }

    #[test]
    fn ua_is_invariant_under_consistent_relabeling() {
        let labels = [P, P, P, N, N, P, N, N, N];
        let preds = [P, N, P, N, P, P, N, N, P];
        let flip = |l: Label| match l {
            P => N,
            N => P,
        };
        let m1 = unweighted_accuracy(&preds, &labels).unwrap();
        let flipped_preds: Vec<Label> = preds.iter().map(|&l| flip(l)).collect();
        let flipped_labels: Vec<Label> = labels.iter().map(|&l| flip(l)).collect();
        let m2 = unweighted_accuracy(&flipped_preds, &flipped_labels).unwrap();
        assert_eq!(m1.unweighted_accuracy, m2.unweighted_accuracy);
        assert_eq!(m1.accuracy, m2.accuracy);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(unweighted_accuracy(&[P], &[P, N]).is_err());
    }
}
