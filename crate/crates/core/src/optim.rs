//! Moment-corrected adaptive gradient descent with decoupled weight decay.

use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig { lr: 5e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

impl AdamWConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamWConfig { lr, ..Default::default() }
    }
}

/// Optimizer state for a fixed parameter list; the caller supplies gradients
/// in the same order every step.
pub struct AdamW {
    config: AdamWConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamW {
    pub fn new(config: AdamWConfig, param_sizes: &[usize]) -> Self {
        AdamW {
            config,
            m: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn for_params(config: AdamWConfig, params: &[&Tensor]) -> Self {
        let sizes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        AdamW::new(config, &sizes)
    }

    /// One update. `params` and `grads` must match the construction order.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) {
        assert_eq!(params.len(), grads.len());
        self.step += 1;
        let t = self.step as i32;
        let c = &self.config;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        for (i, (param, grad)) in params.iter_mut().zip(grads.iter()).enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let data = param.data_mut();
            for (j, g) in grad.data().iter().enumerate() {
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                data[j] -= c.lr * (m_hat / (v_hat.sqrt() + c.eps) + c.weight_decay * data[j]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        // f(x) = (x - 3)^2, gradient 2(x - 3)
        let mut x = Tensor::scalar(0.0);
        let mut opt = AdamW::new(
            AdamWConfig { lr: 0.1, weight_decay: 0.0, ..Default::default() },
            &[1],
        );
        for _ in 0..500 {
            let g = Tensor::scalar(2.0 * (x.item().unwrap() - 3.0));
            opt.step(&mut [&mut x], &[g]);
        }
        assert!((x.item().unwrap() - 3.0).abs() < 1e-3);
    }

    #[test]
    fn weight_decay_shrinks_idle_params() {
        let mut x = Tensor::scalar(1.0);
        let mut opt = AdamW::new(AdamWConfig { lr: 0.01, ..Default::default() }, &[1]);
        for _ in 0..100 {
            opt.step(&mut [&mut x], &[Tensor::scalar(0.0)]);
        }
        assert!(x.item().unwrap() < 1.0);
    }
}
