//! Adam update rule shared by the CPE trainer and the VI engine.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self::with_moments(dim, 0.9, 0.999, 1e-8)
    }

    pub fn with_moments(dim: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        AdamState { m: vec![0.0; dim], v: vec![0.0; dim], step: 0, beta1, beta2, epsilon }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One descent step: params -= lr * mhat / (sqrt(vhat) + eps).
    /// Callers maximizing an objective pass the negated gradient.
    pub fn apply(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grad.len());
        debug_assert_eq!(params.len(), self.m.len());
        self.step += 1;
        let b1t = 1.0 - math::powf(self.beta1, self.step as f64);
        let b2t = 1.0 - math::powf(self.beta2, self.step as f64);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= lr * mhat / (math::sqrt(vhat) + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut adam = AdamState::new(3);
        let mut params = [1.0, -2.0, 0.5];
        let before = params;
        for _ in 0..10 {
            adam.apply(&mut params, &[0.0; 3], 0.1);
        }
        assert_eq!(params, before);
    }

    #[test]
    fn descends_a_quadratic() {
        let mut adam = AdamState::new(1);
        let mut params = [4.0];
        for _ in 0..2000 {
            let g = [2.0 * params[0]];
            adam.apply(&mut params, &g, 0.01);
        }
        assert!(params[0].abs() < 1e-3);
    }
}
