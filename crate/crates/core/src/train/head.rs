//! Two-class linear head with sigmoid outputs and its loss.

use super::{Label, TrainError};
use crate::augment::SoftLabel;
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Clamp applied inside the loss logarithms.
const LOG_CLAMP: f64 = 1e-12;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `2 x D` weight matrix plus two biases; node 0 scores the negative class,
/// node 1 the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    weights: Array2<f64>,
    bias: [f64; 2],
}

impl LinearHead {
    pub fn zeros(dim: usize) -> Self {
        LinearHead {
            weights: Array2::zeros((2, dim)),
            bias: [0.0; 2],
        }
    }

    /// Small random init, uniform in (-0.01, 0.01).
    pub fn seeded<R: Rng>(dim: usize, rng: &mut R) -> Self {
        LinearHead {
            weights: Array2::from_shape_fn((2, dim), |_| rng.random_range(-0.01..0.01)),
            bias: [0.0; 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &[f64; 2] {
        &self.bias
    }

    /// Rebuild from a flat parameter block `[w_neg | w_pos | bias]`.
    pub fn from_flat(dim: usize, params: &[f64]) -> Result<Self, TrainError> {
        if params.len() != 2 * dim + 2 {
            return Err(TrainError::ShapeMismatch {
                expected: 2 * dim + 2,
                got: params.len(),
            });
        }
        let weights =
            Array2::from_shape_vec((2, dim), params[..2 * dim].to_vec()).expect("sized above");
        Ok(LinearHead {
            weights,
            bias: [params[2 * dim], params[2 * dim + 1]],
        })
    }

    /// Row-major flat parameters `[w_neg | w_pos | bias]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = self.weights.iter().copied().collect::<Vec<_>>();
        flat.extend_from_slice(&self.bias);
        flat
    }

    fn pre_activations(&self, embedding: &[f64]) -> Result<[f64; 2], TrainError> {
        if embedding.len() != self.dim() {
            return Err(TrainError::ShapeMismatch {
                expected: self.dim(),
                got: embedding.len(),
            });
        }
        let mut z = [0.0f64; 2];
        for (k, row) in self.weights.rows().into_iter().enumerate() {
            z[k] = row
                .iter()
                .zip(embedding.iter())
                .map(|(w, e)| w * e)
                .sum::<f64>()
                + self.bias[k];
        }
        Ok(z)
    }

    /// Sigmoid activations of the two output nodes, each in (0, 1).
    pub fn forward(&self, embedding: &[f64]) -> Result<[f64; 2], TrainError> {
        let z = self.pre_activations(embedding)?;
        Ok([sigmoid(z[0]), sigmoid(z[1])])
    }
}

/// Mean per-node binary cross-entropy against a soft target.
pub fn bce_loss(out: [f64; 2], target: SoftLabel) -> f64 {
    let t = [target.neg(), target.pos()];
    let mut sum = 0.0;
    for k in 0..2 {
        let o = out[k].clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
        sum += -(t[k] * o.ln() + (1.0 - t[k]) * (1.0 - o).ln());
    }
    sum / 2.0
}

/// Loss and analytic parameter gradients of `bce_loss . forward` for one
/// sample, accumulated into `grad` (flat layout of [`LinearHead::to_flat`]).
pub fn accumulate_loss_grad(
    head: &LinearHead,
    embedding: &[f64],
    target: SoftLabel,
    weight: f64,
    grad: &mut [f64],
) -> Result<f64, TrainError> {
    let dim = head.dim();
    debug_assert_eq!(grad.len(), 2 * dim + 2);
    let z = head.pre_activations(embedding)?;
    let out = [sigmoid(z[0]), sigmoid(z[1])];
    let t = [target.neg(), target.pos()];
    for k in 0..2 {
        // d(bce)/dz_k = (o_k - t_k) / 2
        let dz = weight * (out[k] - t[k]) / 2.0;
        for (j, &e) in embedding.iter().enumerate() {
            grad[k * dim + j] += dz * e;
        }
        grad[2 * dim + k] += dz;
    }
    Ok(bce_loss(out, target))
}

/// Class decision: argmax of the two activations, ties to negative.
pub fn predict(head: &LinearHead, embedding: &[f64]) -> Result<Label, TrainError> {
    let out = head.forward(embedding)?;
    Ok(if out[1] > out[0] {
        Label::Positive
    } else {
        Label::Negative
    })
}
