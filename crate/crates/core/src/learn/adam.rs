// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of steps taken so far.
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0, config: AdamConfig::default() }
    }
}

/// One Adam step with decoupled weight decay: parameters are first shrunk
/// by `1 - lr * wd`, then moved by the bias-corrected moment ratio.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64, wd: f64) -> Result<(), LearnError> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(LearnError::Shape(format!("{} params, {} grads, {} moments", params.len(), grads.len(), state.m.len())));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(LearnError::NonFiniteGradient(i));
    }
    state.t += 1;
    let AdamConfig { beta1, beta2, eps } = state.config;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    let shrink = 1.0 - lr * wd;
    for i in 0..params.len() {
        params[i] *= shrink;
        let g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= lr * mh / (vh.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut p = vec![1.0, -2.0, 3.5];
        let mut s = AdamState::new(3);
        for _ in 0..10 {
            adam_step(&mut p, &[0.0; 3], &mut s, 1e-2, 0.0).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let lr = 1e-3;
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        let mut last = 0.0;
        for _ in 0..2000 {
            let before = p[0];
            adam_step(&mut p, &[0.37], &mut s, lr, 0.0).unwrap();
            last = before - p[0];
        }
        assert!((last - lr).abs() < 1e-6 * lr.max(1.0));
        // bias correction makes the very first step exactly lr too
        let mut q = vec![0.0];
        adam_step(&mut q, &[5.0], &mut AdamState::new(1), lr, 0.0).unwrap();
        assert!((q[0] + lr).abs() < 1e-9);
    }

    #[test]
    fn decoupled_decay() {
        let mut p = vec![2.0];
        adam_step(&mut p, &[0.0], &mut AdamState::new(1), 0.1, 0.5).unwrap();
        assert!((p[0] - 2.0 * 0.95).abs() < 1e-15);
    }

    #[test]
    fn quadratic_bowl_descends_after_warmup() {
        let target = [3.0, -1.0, 0.5];
        let loss = |p: &[f64]| p.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3);
        let mut losses = Vec::new();
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            adam_step(&mut p, &g, &mut s, 1e-2, 0.0).unwrap();
            losses.push(loss(&p));
        }
        assert!(losses[20..].windows(2).all(|w| w[1] <= w[0]));
        assert!(losses[499] < 0.25 * losses[0]);
    }

    #[test]
    fn non_finite_gradient() {
        let mut p = vec![0.0, 0.0];
        let r = adam_step(&mut p, &[0.0, f64::NAN], &mut AdamState::new(2), 1e-3, 0.0);
        assert!(matches!(r, Err(LearnError::NonFiniteGradient(1))));
    }
}
