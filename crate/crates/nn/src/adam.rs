use serde::{Deserialize, Serialize};

use crate::error::NnError;

/// Bias-corrected Adam on one flat parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One descent step in place. Moments persist across calls.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        if params.len() != self.m.len() {
            return Err(NnError::DimMismatch { expected: self.m.len(), got: params.len() });
        }
        if grads.len() != self.m.len() {
            return Err(NnError::DimMismatch { expected: self.m.len(), got: grads.len() });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // bias correction makes the first update lr * g/(|g| + eps),
        // essentially a signed step of size lr
        let mut adam = AdamState::new(1e-3, 1);
        let mut p = [1.0];
        adam.step(&mut p, &[0.5]).unwrap();
        let expected = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn two_opposite_steps_follow_the_moment_estimates() {
        // hand computation, g then -g with |g| = 1:
        //   step 1: m_hat = g, v_hat = g^2            -> move -lr
        //   step 2: m2 = 0.09g - 0.1g = -0.01g, bias correction 1 - 0.81 = 0.19
        //           m_hat = -g/19, v_hat = g^2         -> move +lr/19
        // the moments remember the first gradient, so the parameter does NOT
        // return to the start; it ends 18/19 lr below it.
        let lr = 1e-3;
        let g = 1.0;
        let mut adam = AdamState::new(lr, 1);
        let mut p = [0.0];
        adam.step(&mut p, &[g]).unwrap();
        adam.step(&mut p, &[-g]).unwrap();
        let eps = 1e-8;
        let expected = -lr * (g / (g + eps)) + lr * ((g / 19.0) / (g + eps));
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] + lr * 18.0 / 19.0).abs() < 1e-6 * lr);
    }

    #[test]
    fn converges_on_a_quadratic() {
        let mut adam = AdamState::new(0.05, 2);
        let mut p = [3.0, -2.0];
        for _ in 0..2000 {
            let g = [2.0 * (p[0] - 1.0), 2.0 * (p[1] + 4.0)];
            adam.step(&mut p, &g).unwrap();
        }
        assert!((p[0] - 1.0).abs() < 1e-4);
        assert!((p[1] + 4.0).abs() < 1e-4);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut adam = AdamState::new(1e-3, 2);
        assert!(adam.step(&mut [0.0], &[1.0]).is_err());
        assert!(adam.step(&mut [0.0, 0.0], &[1.0]).is_err());
    }
}
