use serde::{Deserialize, Serialize};

use crate::nn::{Block, EncoderParams, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// AdamW with decoupled weight decay. Moments are kept in `f64`.
#[derive(Debug, Clone)]
pub struct AdamW {
    cfg: AdamWConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    /// Flat ranges the optimiser updates (running statistics excluded).
    trainable: Vec<std::ops::Range<usize>>,
}

impl AdamW {
    pub fn new<T: Real>(cfg: AdamWConfig, params: &EncoderParams<T>) -> Self {
        let layout = params.layout();
        let trainable = Block::ALL
            .iter()
            .filter(|b| b.trainable())
            .map(|&b| layout.range(b))
            .collect();
        Self {
            cfg,
            m: vec![0.0; params.len()],
            v: vec![0.0; params.len()],
            step: 0,
            trainable,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step<T: Real>(&mut self, params: &mut EncoderParams<T>, grad: &[T]) {
        assert_eq!(grad.len(), params.len(), "gradient/parameter length mismatch");
        self.step += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let decay = 1.0 - c.lr * c.weight_decay;
        let step_size = c.lr / bc1;
        let inv_sqrt_bc2 = 1.0 / bc2.sqrt();
        for r in &self.trainable {
            let values = &mut params.values_mut()[r.clone()];
            let (m, v) = (&mut self.m[r.clone()], &mut self.v[r.clone()]);
            for (((p, &g), m), v) in values.iter_mut().zip(&grad[r.clone()]).zip(m).zip(v) {
                let g = g.as_f64();
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let denom = v.sqrt() * inv_sqrt_bc2 + c.eps;
                *p = T::of(p.as_f64() * decay - step_size * *m / denom);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::EncoderDims;

    fn dims() -> EncoderDims {
        EncoderDims {
            channels: 2,
            timepoints: 3,
            conv_maps: 2,
            hidden1: 2,
            hidden2: 2,
            embed: 3,
            feature_dim: 3,
            adapter_hidden: 2,
            blur_levels: 2,
        }
    }

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let mut p = EncoderParams::<f32>::init(dims(), 3).unwrap();
        let before = p.clone();
        let mut opt = AdamW::new(
            AdamWConfig {
                weight_decay: 0.0,
                ..Default::default()
            },
            &p,
        );
        let g = p.zeros_like();
        for _ in 0..5 {
            opt.step(&mut p, &g);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr_in_gradient_sign() {
        let mut p = EncoderParams::<f64>::init(dims(), 3).unwrap();
        let before = p.clone();
        let mut opt = AdamW::new(
            AdamWConfig {
                weight_decay: 0.0,
                lr: 0.01,
                ..Default::default()
            },
            &p,
        );
        let g: Vec<f64> = (0..p.len()).map(|i| if i % 2 == 0 { 1.0 } else { -2.0 }).collect();
        opt.step(&mut p, &g);
        let rv = p.layout().range(Block::BnRunningVar);
        for (i, (a, b)) in p.values().iter().zip(before.values()).enumerate() {
            if rv.contains(&i) || p.layout().range(Block::BnRunningMean).contains(&i) {
                assert_eq!(a, b);
            } else {
                let expected = b - 0.01 * g[i].signum();
                assert!((a - expected).abs() < 1e-8, "{i}: {a} vs {expected}");
            }
        }
    }
}
