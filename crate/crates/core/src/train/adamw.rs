//! AdamW: adaptive moments with decoupled weight decay.

use super::TrainError;

/// First/second moment accumulators and the step counter.
///
/// Defaults beta1 0.9, beta2 0.999, eps 1e-8.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    m: Vec<f64>,
    v: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamWState {
    pub fn new(n_params: usize) -> Self {
        AdamWState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One update:
///
/// ```text
/// m <- b1 m + (1 - b1) g        v <- b2 v + (1 - b2) g^2
/// m^ = m / (1 - b1^t)           v^ = v / (1 - b2^t)
/// theta <- theta (1 - lr wd) - lr m^ / (sqrt(v^) + eps)
/// ```
///
/// The decay multiplies the parameter directly (decoupled from the gradient
/// term), so a zero-gradient step from zero moments is exactly
/// `theta * (1 - lr * wd)`.
pub fn adamw_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamWState,
    lr: f64,
    weight_decay: f64,
) -> Result<(), TrainError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TrainError::ShapeMismatch {
            expected: state.m.len(),
            got: if params.len() != state.m.len() {
                params.len()
            } else {
                grads.len()
            },
        });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let decay = 1.0 - lr * weight_decay;
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] = params[i] * decay - lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_a_fixed_point() {
        let mut p = vec![0.7, -1.3];
        let mut s = AdamWState::new(2);
        adamw_step(&mut p, &[0.0, 0.0], &mut s, 0.001, 0.0).unwrap();
        assert_eq!(p, vec![0.7, -1.3]);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn zero_gradient_decay_is_exactly_multiplicative() {
        let (lr, wd) = (0.001, 0.01);
        for theta in [1.0f64, 0.3, -2.5, 1e-6, 123.456] {
            let mut p = vec![theta];
            let mut s = AdamWState::new(1);
            adamw_step(&mut p, &[0.0], &mut s, lr, wd).unwrap();
            assert_eq!(p[0], theta * (1.0 - lr * wd), "theta {theta}");
        }
    }

    #[test]
    fn first_step_moves_by_roughly_the_learning_rate() {
        // m^ = g and sqrt(v^) = |g| at step 1, so the update is ~ -lr.
        let mut p = vec![0.0];
        let mut s = AdamWState::new(1);
        adamw_step(&mut p, &[1.0], &mut s, 0.001, 0.0).unwrap();
        assert!((p[0] - (-0.000999999990000001)).abs() < 1e-15);
        assert!((p[0] + 0.001).abs() < 1e-6);
    }

    #[test]
    fn two_step_trace_matches_a_hand_stepped_oracle() {
        let (lr, wd) = (0.001, 0.004);
        let grads = [0.3, -0.2];
        let mut p = vec![0.5];
        let mut s = AdamWState::new(1);

        // independent re-derivation of the update equations
        let (b1, b2, eps) = (0.9f64, 0.999, 1e-8);
        let (mut om, mut ov, mut op) = (0.0f64, 0.0f64, 0.5f64);
        for (t, &g) in grads.iter().enumerate() {
            adamw_step(&mut p, &[g], &mut s, lr, wd).unwrap();

            om = b1 * om + (1.0 - b1) * g;
            ov = b2 * ov + (1.0 - b2) * g * g;
            let mh = om / (1.0 - b1.powi(t as i32 + 1));
            let vh = ov / (1.0 - b2.powi(t as i32 + 1));
            op = op * (1.0 - lr * wd) - lr * mh / (vh.sqrt() + eps);
            assert!((p[0] - op).abs() < 1e-9, "step {t}: {} vs {op}", p[0]);
        }
        // frozen endpoints of the same trace
        assert!((p[0] - 0.49885148351728587).abs() < 1e-9);
    }

    #[test]
    fn with_zero_decay_it_reduces_to_adam() {
        // Adam reference, written as the textbook update.
        let grads = [[0.5, -0.1], [0.2, 0.4], [-0.3, 0.0]];
        let mut p = vec![0.1, -0.2];
        let mut s = AdamWState::new(2);
        let (b1, b2, eps, lr) = (0.9f64, 0.999, 1e-8, 0.01);
        let mut rm = [0.0f64; 2];
        let mut rv = [0.0f64; 2];
        let mut rp = [0.1f64, -0.2];
        for (t, g) in grads.iter().enumerate() {
            adamw_step(&mut p, g, &mut s, lr, 0.0).unwrap();
            for i in 0..2 {
                rm[i] = b1 * rm[i] + (1.0 - b1) * g[i];
                rv[i] = b2 * rv[i] + (1.0 - b2) * g[i] * g[i];
                let mh = rm[i] / (1.0 - b1.powi(t as i32 + 1));
                let vh = rv[i] / (1.0 - b2.powi(t as i32 + 1));
                rp[i] -= lr * mh / (vh.sqrt() + eps);
            }
            for i in 0..2 {
                assert!((p[i] - rp[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = vec![0.0; 3];
        let mut s = AdamWState::new(3);
        assert!(matches!(
            adamw_step(&mut p, &[0.0; 2], &mut s, 0.001, 0.0),
            Err(TrainError::ShapeMismatch { .. })
        ));
        let mut wrong = AdamWState::new(5);
        assert!(adamw_step(&mut p, &[0.0; 3], &mut wrong, 0.001, 0.0).is_err());
    }
}
