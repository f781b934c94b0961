//! Adam optimizer with bias correction, operating on flat parameter
//! vectors. Deterministic: the update is a pure function of
//! `(theta, grad, state, params)`.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn zeros(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step_count: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum AdamError {
    #[error("gradient and parameter shapes differ: {grad} vs {theta}")]
    ShapeMismatch { grad: usize, theta: usize },
    #[error("non-finite gradient component at index {0}")]
    NonFiniteGradient(usize),
}

/// One Adam update, in place.
pub fn adam_step(
    theta: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    params: &AdamParams,
) -> Result<(), AdamError> {
    if grad.len() != theta.len() || state.m.len() != theta.len() {
        return Err(AdamError::ShapeMismatch {
            grad: grad.len(),
            theta: theta.len(),
        });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(AdamError::NonFiniteGradient(i));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let m_corr = 1.0 - params.beta1.powi(t);
    let v_corr = 1.0 - params.beta2.powi(t);
    for i in 0..theta.len() {
        state.m[i] = params.beta1 * state.m[i] + (1.0 - params.beta1) * grad[i];
        state.v[i] = params.beta2 * state.v[i] + (1.0 - params.beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / m_corr;
        let v_hat = state.v[i] / v_corr;
        theta[i] -= params.lr * m_hat / (v_hat.sqrt() + params.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_from_rest_leaves_theta_unchanged() {
        let mut theta = vec![1.0, -2.0];
        let mut state = AdamState::zeros(2);
        let params = AdamParams::default();
        adam_step(&mut theta, &[0.0, 0.0], &mut state, &params).unwrap();
        assert_eq!(theta, vec![1.0, -2.0]);
        assert_eq!(state.m, vec![0.0, 0.0]);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn zero_gradient_decays_existing_moments() {
        let mut theta = vec![1.0];
        let mut state = AdamState::zeros(1);
        state.m = vec![0.5];
        state.v = vec![0.25];
        adam_step(&mut theta, &[0.0], &mut state, &AdamParams::default()).unwrap();
        assert!((state.m[0] - 0.45).abs() < 1e-15);
        assert!((state.v[0] - 0.24975).abs() < 1e-15);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut theta = vec![0.0, 0.0, 0.0];
        let mut state = AdamState::zeros(3);
        let params = AdamParams::default();
        adam_step(&mut theta, &[3.0, -0.01, 1e-4], &mut state, &params).unwrap();
        for (i, sign) in [(0usize, 1.0), (1, -1.0), (2, 1.0)] {
            assert!(
                (theta[i] + sign * params.lr).abs() < params.lr * 1e-3,
                "theta[{i}] = {}",
                theta[i]
            );
        }
    }

    #[test]
    fn constant_gradient_steps_are_non_expanding() {
        // Closed-form recursion: with constant g, bias correction makes
        // m_hat = g and v_hat = g^2 at every step, so updates are equal.
        let g = 0.7;
        let params = AdamParams::default();
        let mut theta = vec![1.0];
        let mut state = AdamState::zeros(1);
        adam_step(&mut theta, &[g], &mut state, &params).unwrap();
        let step1 = 1.0 - theta[0];
        let before = theta[0];
        adam_step(&mut theta, &[g], &mut state, &params).unwrap();
        let step2 = before - theta[0];
        assert!(step2.abs() <= step1.abs() * (1.0 + 1e-9));

        let expected = params.lr * g / (g.abs() + params.eps);
        assert!((step1 - expected).abs() < 1e-15);
        assert!((step2 - expected).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut theta = vec![1.0];
        let mut state = AdamState::zeros(1);
        let err = adam_step(&mut theta, &[f64::NAN], &mut state, &AdamParams::default());
        assert!(matches!(err, Err(AdamError::NonFiniteGradient(0))));
        assert_eq!(theta, vec![1.0]);
        assert_eq!(state.step_count, 0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut theta = vec![1.0, 2.0];
        let mut state = AdamState::zeros(2);
        let err = adam_step(&mut theta, &[0.1], &mut state, &AdamParams::default());
        assert!(matches!(err, Err(AdamError::ShapeMismatch { .. })));
    }
}
