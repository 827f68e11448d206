//! The training loop: seeded shuffling, batching, optional mixup, analytic
//! gradients, AdamW updates. No early stopping and no model selection; the
//! head after the last epoch is the result.

use super::adamw::{adamw_step, AdamWState};
use super::embed::embed_pooled;
use super::head::{accumulate_loss_grad, LinearHead};
use super::{Label, TrainError};
use crate::augment::{self, sample_mixup_lambda, SoftLabel};
use crate::dsp::LogMelSpectrogram;
use crate::rng::run_rng;
use crate::train::EmbeddingVector;
use ndarray::s;
use rand::seq::SliceRandom;
use rand::Rng;

/// Where mixup is applied.
///
/// Log-mel mixing happens before the pooled embedder and requires log-mel
/// inputs; embedding-level mixing works with any embedding source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixupMode {
    Disabled,
    Embedding,
    LogMel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub mixup_alpha: f64,
    pub mixup: MixupMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            weight_decay: 0.01,
            batch_size: 16,
            epochs: 100,
            mixup_alpha: 0.5,
            mixup: MixupMode::LogMel,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabeledLogMel {
    pub log_mel: LogMelSpectrogram,
    pub label: Label,
    pub id: String,
}

/// Training inputs: precomputed embeddings, or log-mel matrices that the
/// built-in pooled embedder consumes (enabling log-mel-level mixup).
#[derive(Debug, Clone)]
pub enum TrainingData {
    Embeddings(Vec<(EmbeddingVector, Label)>),
    LogMels(Vec<LabeledLogMel>),
}

impl TrainingData {
    fn len(&self) -> usize {
        match self {
            TrainingData::Embeddings(v) => v.len(),
            TrainingData::LogMels(v) => v.len(),
        }
    }

    fn label(&self, i: usize) -> Label {
        match self {
            TrainingData::Embeddings(v) => v[i].1,
            TrainingData::LogMels(v) => v[i].label,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub head: LinearHead,
    /// Mean training loss per epoch.
    pub loss_history: Vec<f64>,
}

/// Fit the linear head. Identical config and seed give a bit-identical
/// loss history and head.
pub fn train(data: &TrainingData, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    validate(data, cfg)?;

    let n = data.len();
    // Pooled embeddings of the unmixed inputs; log-mel mixup recomputes
    // embeddings per batch instead.
    let base: Vec<Vec<f64>> = match data {
        TrainingData::Embeddings(v) => v.iter().map(|(e, _)| e.values.clone()).collect(),
        TrainingData::LogMels(v) => v
            .iter()
            .map(|item| embed_pooled(&item.log_mel, &item.id).map(|e| e.values))
            .collect::<Result<_, _>>()?,
    };
    let dim = base[0].len();

    let mut rng = run_rng(cfg.seed);
    let mut params = LinearHead::seeded(dim, &mut rng).to_flat();
    let mut state = AdamWState::new(params.len());
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n).collect();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let samples = assemble_batch(data, &base, batch, cfg, &mut rng)?;
            let head = LinearHead::from_flat(dim, &params)?;
            let mut grad = vec![0.0; params.len()];
            let weight = 1.0 / samples.len() as f64;
            let mut batch_loss = 0.0;
            for (e, y) in &samples {
                batch_loss += accumulate_loss_grad(&head, e, *y, weight, &mut grad)?;
            }
            adamw_step(&mut params, &grad, &mut state, cfg.lr, cfg.weight_decay)?;
            epoch_loss += batch_loss;
        }
        history.push(epoch_loss / n as f64);
    }

    Ok(TrainOutcome {
        head: LinearHead::from_flat(dim, &params)?,
        loss_history: history,
    })
}

fn validate(data: &TrainingData, cfg: &TrainConfig) -> Result<(), TrainError> {
    if cfg.lr <= 0.0 || cfg.weight_decay < 0.0 || cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(TrainError::InvalidConfig(
            "need lr > 0, weight_decay >= 0, batch_size >= 1, epochs >= 1".into(),
        ));
    }
    if cfg.mixup != MixupMode::Disabled && (cfg.mixup_alpha.is_nan() || cfg.mixup_alpha <= 0.0) {
        return Err(TrainError::InvalidConfig(format!(
            "mixup alpha {} must be > 0",
            cfg.mixup_alpha
        )));
    }
    if cfg.mixup == MixupMode::LogMel && matches!(data, TrainingData::Embeddings(_)) {
        return Err(TrainError::InvalidConfig(
            "log-mel mixup needs log-mel training data".into(),
        ));
    }
    let n = data.len();
    if n < 2 {
        return Err(TrainError::DegenerateDataset(
            "fewer than two samples".into(),
        ));
    }
    let positives = (0..n).filter(|&i| data.label(i) == Label::Positive).count();
    if positives == 0 || positives == n {
        return Err(TrainError::DegenerateDataset(
            "all samples share one class".into(),
        ));
    }
    match data {
        TrainingData::Embeddings(v) => {
            let dim = v[0].0.values.len();
            if dim == 0 {
                return Err(TrainError::EmptyInput);
            }
            for (e, _) in v {
                if e.values.len() != dim {
                    return Err(TrainError::ShapeMismatch {
                        expected: dim,
                        got: e.values.len(),
                    });
                }
            }
        }
        TrainingData::LogMels(v) => {
            let bands = v[0].log_mel.n_bands();
            for item in v {
                if item.log_mel.n_frames() == 0 {
                    return Err(TrainError::EmptyInput);
                }
                if item.log_mel.n_bands() != bands {
                    return Err(TrainError::ShapeMismatch {
                        expected: bands,
                        got: item.log_mel.n_bands(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Materialize one batch of (embedding, soft label) pairs, applying the
/// configured mixup with one lambda per batch and a random derangement
/// pairing. Singleton batches skip mixup.
fn assemble_batch<R: Rng>(
    data: &TrainingData,
    base: &[Vec<f64>],
    batch: &[usize],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<(Vec<f64>, SoftLabel)>, TrainError> {
    let plain = |batch: &[usize]| {
        batch
            .iter()
            .map(|&i| (base[i].clone(), data.label(i).to_soft()))
            .collect::<Vec<_>>()
    };
    if cfg.mixup == MixupMode::Disabled || batch.len() < 2 {
        return Ok(plain(batch));
    }

    let lambda = sample_mixup_lambda(cfg.mixup_alpha, rng)
        .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
    let partner = derangement(batch.len(), rng);

    match cfg.mixup {
        MixupMode::Embedding => Ok(batch
            .iter()
            .enumerate()
            .map(|(pos, &i)| {
                let j = batch[partner[pos]];
                let mixed: Vec<f64> = base[i]
                    .iter()
                    .zip(base[j].iter())
                    .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                    .collect();
                let ya = data.label(i).to_soft();
                let yb = data.label(j).to_soft();
                let y = SoftLabel::new(
                    lambda * ya.neg() + (1.0 - lambda) * yb.neg(),
                    lambda * ya.pos() + (1.0 - lambda) * yb.pos(),
                )
                .expect("convex combination of labels");
                (mixed, y)
            })
            .collect()),
        MixupMode::LogMel => {
            let items = match data {
                TrainingData::LogMels(v) => v,
                TrainingData::Embeddings(_) => unreachable!("rejected in validate"),
            };
            batch
                .iter()
                .enumerate()
                .map(|(pos, &i)| {
                    let j = batch[partner[pos]];
                    let (la, lb) = (&items[i].log_mel, &items[j].log_mel);
                    // crop both to the shorter frame count before mixing
                    let frames = la.n_frames().min(lb.n_frames());
                    let a = la.values.slice(s![..frames, ..]).to_owned();
                    let b = lb.values.slice(s![..frames, ..]).to_owned();
                    let (mixed, y) = augment::mixup(
                        &a,
                        &b,
                        items[i].label.to_soft(),
                        items[j].label.to_soft(),
                        lambda,
                    )
                    .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
                    let e = embed_pooled(
                        &LogMelSpectrogram {
                            values: mixed,
                            ref_value: la.ref_value,
                        },
                        "mixed",
                    )?;
                    Ok((e.values, y))
                })
                .collect()
        }
        MixupMode::Disabled => unreachable!(),
    }
}

/// Fixed-point-free permutation of `0..m`, `m >= 2`; rejection sampling with
/// a rotation fallback keeps it total and deterministic.
fn derangement<R: Rng>(m: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(m >= 2);
    let mut perm: Vec<usize> = (0..m).collect();
    for _ in 0..64 {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return perm;
        }
    }
    (0..m).map(|i| (i + 1) % m).collect()
}
