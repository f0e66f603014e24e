//! Central finite-difference checks of the encoder + InfoNCE gradients.

use eegret::nn::{
    eeg_backward, eeg_forward, visual_backward, visual_forward, Block, DropoutRates, EncoderDims,
    EncoderParams, ForwardMode,
};
use eegret::train::infonce_loss;

use super::{rng, uniform};

pub const H: f64 = 1e-3;
pub const TOL: f64 = 1e-4;

pub fn micro_dims() -> EncoderDims {
    EncoderDims {
        channels: 3,
        timepoints: 6,
        conv_maps: 2,
        hidden1: 4,
        hidden2: 3,
        embed: 5,
        feature_dim: 4,
        adapter_hidden: 3,
        blur_levels: 3,
    }
}

pub struct Problem {
    pub params: EncoderParams<f64>,
    pub x: Vec<f64>,
    pub blur: Vec<f64>,
    pub evnet: Option<Vec<f64>>,
    pub mode: ForwardMode,
    pub batch: usize,
}

impl Problem {
    /// Seeded micro-batch with every parameter moved off its initial value so
    /// biases, logits and batch-norm affine terms all carry signal.
    pub fn new(dims: EncoderDims, batch: usize, evnet: bool, rates: DropoutRates, seed: u64) -> Self {
        let mut r = rng(seed);
        let mut params = EncoderParams::<f64>::init(dims, seed).unwrap();
        for b in Block::ALL {
            let vals = params.block_mut(b);
            match b {
                Block::BnGamma => vals.iter_mut().for_each(|v| *v = r_range(&mut r, 0.5, 1.5)),
                Block::BnRunningMean | Block::BnRunningVar => {}
                Block::ConvB | Block::BnBeta | Block::Mlp1B | Block::Mlp2B | Block::ProjB
                | Block::Fuse1B | Block::Fuse2B | Block::BlurAdapter1B | Block::BlurAdapter2B => {
                    vals.iter_mut().for_each(|v| *v = r_range(&mut r, -0.3, 0.3))
                }
                Block::BlurAttn | Block::Gate => {
                    vals.iter_mut().for_each(|v| *v = r_range(&mut r, -1.0, 1.0))
                }
                _ => vals.iter_mut().for_each(|v| *v *= r_range(&mut r, 1.0, 3.0)),
            }
        }
        let x = uniform(&mut r, batch * dims.channels * dims.timepoints, -1.0, 1.0);
        let blur = uniform(&mut r, batch * dims.blur_levels * dims.feature_dim, -1.0, 1.0);
        let evnet = evnet.then(|| uniform(&mut r, batch * dims.feature_dim, -1.0, 1.0));
        Self {
            params,
            x,
            blur,
            evnet,
            mode: ForwardMode::train(seed ^ 0x5eed).with_rates(rates),
            batch,
        }
    }

    pub fn loss(&self, params: &EncoderParams<f64>) -> f64 {
        let (z, _) = eeg_forward(params, &self.x, &self.mode).unwrap();
        let (v, _) = visual_forward(params, &self.blur, self.evnet.as_deref(), &self.mode).unwrap();
        infonce_loss(&z, &v, params.dims().embed, 1.0).unwrap().loss
    }

    pub fn gradient(&self) -> Vec<f64> {
        let p = &self.params;
        let (z, ec) = eeg_forward(p, &self.x, &self.mode).unwrap();
        let (v, vc) = visual_forward(p, &self.blur, self.evnet.as_deref(), &self.mode).unwrap();
        let out = infonce_loss(&z, &v, p.dims().embed, 1.0).unwrap();
        let mut g = p.zeros_like();
        eeg_backward(p, &ec, &out.grad_z, &mut g).unwrap();
        visual_backward(p, &vc, &out.grad_v, &mut g).unwrap();
        g
    }

    /// Distance of every non-smooth point (|·|, ELU) from the current inputs.
    pub fn kink_margin(&self) -> f64 {
        let (_, ec) = eeg_forward(&self.params, &self.x, &self.mode).unwrap();
        let (_, vc) =
            visual_forward(&self.params, &self.blur, self.evnet.as_deref(), &self.mode).unwrap();
        ec.kink_margin().min(vc.kink_margin())
    }

    /// Which side of every kink (|·| and ELU) each activation lies on.
    pub fn kink_signs(&self, params: &EncoderParams<f64>) -> Vec<bool> {
        let (_, ec) = eeg_forward(params, &self.x, &self.mode).unwrap();
        let (_, vc) = visual_forward(params, &self.blur, self.evnet.as_deref(), &self.mode).unwrap();
        let mut s = ec.activation_signs();
        s.extend(vc.activation_signs());
        s
    }

    pub fn numeric(&self, i: usize) -> f64 {
        let mut p = self.params.clone();
        let orig = p.values()[i];
        p.values_mut()[i] = orig + H;
        let up = self.loss(&p);
        p.values_mut()[i] = orig - H;
        let down = self.loss(&p);
        (up - down) / (2.0 * H)
    }
}

fn r_range(r: &mut rand_chacha::ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    use rand::Rng;
    r.random_range(lo..hi)
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// First seed at or after `from` whose micro-batch keeps every kink at least
/// `margin` away.
pub fn smooth_problem(dims: EncoderDims, evnet: bool, rates: DropoutRates, from: u64, margin: f64) -> Problem {
    (from..from + 10_000)
        .map(|s| Problem::new(dims, 4, evnet, rates, s))
        .find(|p| p.kink_margin() >= margin)
        .expect("a smooth micro-batch exists")
}

#[derive(Debug, Default, Clone)]
pub struct BlockReport {
    pub block: Option<Block>,
    pub checked: usize,
    /// Coordinates left out because a ±h step crosses a kink.
    pub skipped: usize,
    pub max_rel: f64,
}

/// Checks every coordinate; returns the worst relative error per block.
pub fn dense_check(p: &Problem) -> Vec<BlockReport> {
    let g = p.gradient();
    let layout = p.params.layout().clone();
    Block::ALL
        .iter()
        .map(|&b| {
            let mut rep = BlockReport {
                block: Some(b),
                ..Default::default()
            };
            for i in layout.range(b) {
                let e = rel_err(g[i], p.numeric(i));
                rep.checked += 1;
                rep.max_rel = rep.max_rel.max(e);
            }
            rep
        })
        .collect()
}

/// Checks `per_block` evenly spaced coordinates of every block at the given
/// dims, skipping coordinates whose perturbation crosses any kink: central
/// differences are only second-order accurate where the loss is smooth.
pub fn spot_check(p: &Problem, per_block: usize) -> Vec<BlockReport> {
    let g = p.gradient();
    let layout = p.params.layout().clone();
    let base_signs = p.kink_signs(&p.params);
    Block::ALL
        .iter()
        .map(|&b| {
            let range = layout.range(b);
            let stride = (range.len() / per_block).max(1);
            let mut rep = BlockReport {
                block: Some(b),
                ..Default::default()
            };
            for i in range.clone().step_by(stride).take(per_block) {
                let mut q = p.params.clone();
                let orig = q.values()[i];
                let crosses = [orig + H, orig - H].iter().any(|&v| {
                    q.values_mut()[i] = v;
                    p.kink_signs(&q) != base_signs
                });
                if crosses {
                    rep.skipped += 1;
                    continue;
                }
                rep.checked += 1;
                rep.max_rel = rep.max_rel.max(rel_err(g[i], p.numeric(i)));
            }
            rep
        })
        .collect()
}
