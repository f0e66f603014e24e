use super::ops::{add_bias, add_col_sums, dropout_mask, elu, elu_grad};
use super::{gemm, Block, EncoderParams, ForwardMode, Mode, Op, Real, DROPOUT_MLP1, DROPOUT_MLP2};
use crate::error::{Error, Result};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

/// Intermediates of one EEG forward pass. All matrices are row-major; `R`
/// below is `B · conv_maps` (one MLP row per sample and map).
#[derive(Debug, Clone)]
pub struct EegCache<T> {
    pub mode: Mode,
    pub batch: usize,
    input: Vec<T>,
    /// Conv output before `|·|`, `[B, F, T]`.
    pub conv: Vec<T>,
    xhat: Vec<T>,
    inv_std: Vec<T>,
    bn_out: Vec<T>,
    h1: Vec<T>,
    mask1: Vec<T>,
    d1: Vec<T>,
    h2: Vec<T>,
    mask2: Vec<T>,
    /// Flattened MLP output, `[B, F·H2]`.
    pub flat: Vec<T>,
    /// Per-map batch mean and (biased) variance; empty in eval mode.
    pub batch_mean: Vec<T>,
    pub batch_var: Vec<T>,
}

/// EEG encoder: conv over channels → |·| → batch-norm → shared two-layer MLP
/// per map → flatten → linear projection. `batch` is `[B, C, T]`.
pub fn eeg_forward<T: Real>(
    p: &EncoderParams<T>,
    batch: &[T],
    mode: &ForwardMode,
) -> Result<(Vec<T>, EegCache<T>)> {
    let d = *p.dims();
    let (c, t, f, h1n, h2n) = (d.channels, d.timepoints, d.conv_maps, d.hidden1, d.hidden2);
    let seg = c * t;
    if batch.is_empty() || batch.len() % seg != 0 {
        return Err(Error::Shape(format!(
            "EEG batch of {} values is not a multiple of {c}×{t}",
            batch.len()
        )));
    }
    let b = batch.len() / seg;
    if mode.mode == Mode::Train && b < 2 {
        return Err(Error::Mode("train-mode batch-norm needs at least 2 samples".into()));
    }
    if batch.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("EEG batch contains non-finite values".into()));
    }

    let w = p.block(Block::ConvW);
    let cb = p.block(Block::ConvB);
    let mut conv = vec![T::zero(); b * f * t];
    for (xb, yb) in batch.chunks_exact(seg).zip(conv.chunks_exact_mut(f * t)) {
        gemm(f, t, c, w, Op::N, xb, Op::N, T::zero(), yb);
        for (row, &bias) in yb.chunks_exact_mut(t).zip(cb) {
            row.iter_mut().for_each(|v| *v += bias);
        }
    }

    // Batch-norm per map over (batch × time).
    let n = T::of((b * t) as f64);
    let eps = T::of(BN_EPS);
    let (mean, var, batch_mean, batch_var) = match mode.mode {
        Mode::Train => {
            let mut mean = vec![T::zero(); f];
            let mut var = vec![T::zero(); f];
            for yb in conv.chunks_exact(f * t) {
                for (m, row) in mean.iter_mut().zip(yb.chunks_exact(t)) {
                    *m += row.iter().map(|v| v.abs()).sum::<T>();
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            for yb in conv.chunks_exact(f * t) {
                for ((v, row), &m) in var.iter_mut().zip(yb.chunks_exact(t)).zip(&mean) {
                    *v += row.iter().map(|&x| (x.abs() - m) * (x.abs() - m)).sum::<T>();
                }
            }
            var.iter_mut().for_each(|v| *v /= n);
            (mean.clone(), var.clone(), mean, var)
        }
        Mode::Eval => (
            p.block(Block::BnRunningMean).to_vec(),
            p.block(Block::BnRunningVar).to_vec(),
            Vec::new(),
            Vec::new(),
        ),
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let gamma = p.block(Block::BnGamma);
    let beta = p.block(Block::BnBeta);
    let mut xhat = vec![T::zero(); conv.len()];
    let mut bn_out = vec![T::zero(); conv.len()];
    for ((yrow, (xr, or)), fi) in conv
        .chunks_exact(t)
        .zip(xhat.chunks_exact_mut(t).zip(bn_out.chunks_exact_mut(t)))
        .zip((0..f).cycle())
    {
        for ((&y, xh), o) in yrow.iter().zip(xr.iter_mut()).zip(or.iter_mut()) {
            *xh = (y.abs() - mean[fi]) * inv_std[fi];
            *o = gamma[fi] * *xh + beta[fi];
        }
    }

    let rows = b * f;
    let train = mode.mode == Mode::Train;
    let mut h1 = vec![T::zero(); rows * h1n];
    gemm(rows, h1n, t, &bn_out, Op::N, p.block(Block::Mlp1W), Op::T, T::zero(), &mut h1);
    add_bias(&mut h1, p.block(Block::Mlp1B));
    let mask1 = if train {
        dropout_mask(mode.dropout_seed, DROPOUT_MLP1, h1.len(), mode.rates.mlp1)
    } else {
        Vec::new()
    };
    let d1 = apply(&h1, &mask1);

    let mut h2 = vec![T::zero(); rows * h2n];
    gemm(rows, h2n, h1n, &d1, Op::N, p.block(Block::Mlp2W), Op::T, T::zero(), &mut h2);
    add_bias(&mut h2, p.block(Block::Mlp2B));
    let mask2 = if train {
        dropout_mask(mode.dropout_seed, DROPOUT_MLP2, h2.len(), mode.rates.mlp2)
    } else {
        Vec::new()
    };
    // Row (b, f) of the MLP output is already laid out as sample b's flat vector.
    let flat = apply(&h2, &mask2);

    let mut z = vec![T::zero(); b * d.embed];
    gemm(b, d.embed, d.flat(), &flat, Op::N, p.block(Block::ProjW), Op::T, T::zero(), &mut z);
    add_bias(&mut z, p.block(Block::ProjB));

    let cache = EegCache {
        mode: mode.mode,
        batch: b,
        input: batch.to_vec(),
        conv,
        xhat,
        inv_std,
        bn_out,
        h1,
        mask1,
        d1,
        h2,
        mask2,
        flat,
        batch_mean,
        batch_var,
    };
    Ok((z, cache))
}

/// ELU followed by the (possibly empty = identity) dropout mask.
fn apply<T: Real>(h: &[T], mask: &[T]) -> Vec<T> {
    if mask.is_empty() {
        h.iter().map(|&x| elu(x)).collect()
    } else {
        h.iter().zip(mask).map(|(&x, &m)| elu(x) * m).collect()
    }
}

/// Gradient through dropout and ELU: `dh = dout · mask · elu'(h)`.
fn apply_backward<T: Real>(dout: &[T], h: &[T], mask: &[T]) -> Vec<T> {
    dout.iter()
        .zip(h)
        .zip(mask)
        .map(|((&g, &x), &m)| g * m * elu_grad(x))
        .collect()
}

/// Accumulates `∂L/∂params` into `grad` given `upstream = ∂L/∂z` (`[B, embed]`).
/// Running statistics receive no gradient.
pub fn eeg_backward<T: Real>(
    p: &EncoderParams<T>,
    cache: &EegCache<T>,
    upstream: &[T],
    grad: &mut [T],
) -> Result<()> {
    if cache.mode != Mode::Train {
        return Err(Error::Mode("backward needs a train-mode forward cache".into()));
    }
    let d = *p.dims();
    let (c, t, f, h1n, h2n) = (d.channels, d.timepoints, d.conv_maps, d.hidden1, d.hidden2);
    let b = cache.batch;
    let rows = b * f;
    if upstream.len() != b * d.embed {
        return Err(Error::Shape(format!(
            "upstream gradient has {} values, expected {}×{}",
            upstream.len(),
            b,
            d.embed
        )));
    }
    if grad.len() != p.len() {
        return Err(Error::Shape("gradient buffer does not match the parameter layout".into()));
    }
    let layout = p.layout().clone();

    // Projection.
    gemm(
        d.embed,
        d.flat(),
        b,
        upstream,
        Op::T,
        &cache.flat,
        Op::N,
        T::one(),
        &mut grad[layout.range(Block::ProjW)],
    );
    add_col_sums(&mut grad[layout.range(Block::ProjB)], upstream);
    let mut dflat = vec![T::zero(); b * d.flat()];
    gemm(b, d.flat(), d.embed, upstream, Op::N, p.block(Block::ProjW), Op::N, T::zero(), &mut dflat);

    // Second MLP layer.
    let dh2 = apply_backward(&dflat, &cache.h2, &cache.mask2);
    gemm(h2n, h1n, rows, &dh2, Op::T, &cache.d1, Op::N, T::one(), &mut grad[layout.range(Block::Mlp2W)]);
    add_col_sums(&mut grad[layout.range(Block::Mlp2B)], &dh2);
    let mut dd1 = vec![T::zero(); rows * h1n];
    gemm(rows, h1n, h2n, &dh2, Op::N, p.block(Block::Mlp2W), Op::N, T::zero(), &mut dd1);

    // First MLP layer.
    let dh1 = apply_backward(&dd1, &cache.h1, &cache.mask1);
    gemm(h1n, t, rows, &dh1, Op::T, &cache.bn_out, Op::N, T::one(), &mut grad[layout.range(Block::Mlp1W)]);
    add_col_sums(&mut grad[layout.range(Block::Mlp1B)], &dh1);
    let mut dbn = vec![T::zero(); rows * t];
    gemm(rows, t, h1n, &dh1, Op::N, p.block(Block::Mlp1W), Op::N, T::zero(), &mut dbn);

    // Batch-norm with batch statistics.
    let gamma = p.block(Block::BnGamma);
    let mut dgamma = vec![T::zero(); f];
    let mut dbeta = vec![T::zero(); f];
    let mut sum_dxhat = vec![T::zero(); f];
    let mut sum_dxhat_xhat = vec![T::zero(); f];
    for ((drow, xrow), fi) in dbn.chunks_exact(t).zip(cache.xhat.chunks_exact(t)).zip((0..f).cycle()) {
        for (&g, &xh) in drow.iter().zip(xrow) {
            dgamma[fi] += g * xh;
            dbeta[fi] += g;
            sum_dxhat[fi] += g * gamma[fi];
            sum_dxhat_xhat[fi] += g * gamma[fi] * xh;
        }
    }
    for (g, v) in grad[layout.range(Block::BnGamma)].iter_mut().zip(&dgamma) {
        *g += *v;
    }
    for (g, v) in grad[layout.range(Block::BnBeta)].iter_mut().zip(&dbeta) {
        *g += *v;
    }
    let n = T::of((b * t) as f64);
    // dconv = sign(conv) · inv_std/N · (N·dxhat − Σdxhat − xhat·Σ(dxhat·xhat))
    let mut dconv = dbn;
    for (((drow, xrow), yrow), fi) in dconv
        .chunks_exact_mut(t)
        .zip(cache.xhat.chunks_exact(t))
        .zip(cache.conv.chunks_exact(t))
        .zip((0..f).cycle())
    {
        let k = cache.inv_std[fi] / n;
        for ((g, &xh), &y) in drow.iter_mut().zip(xrow).zip(yrow) {
            let da = k * (n * *g * gamma[fi] - sum_dxhat[fi] - xh * sum_dxhat_xhat[fi]);
            *g = if y > T::zero() {
                da
            } else if y < T::zero() {
                -da
            } else {
                T::zero()
            };
        }
    }

    // Convolution over channels.
    let seg = c * t;
    let wr = layout.range(Block::ConvW);
    for (dy, x) in dconv.chunks_exact(f * t).zip(cache.input.chunks_exact(seg)) {
        gemm(f, c, t, dy, Op::N, x, Op::T, T::one(), &mut grad[wr.clone()]);
    }
    let cb = &mut grad[layout.range(Block::ConvB)];
    for (row, fi) in dconv.chunks_exact(t).zip((0..f).cycle()) {
        cb[fi] += row.iter().copied().sum::<T>();
    }
    Ok(())
}

impl<T: Real> EegCache<T> {
    /// Smallest distance of any conv output or MLP pre-activation from the
    /// non-smooth point 0. Finite-difference checks need this to exceed the
    /// step size.
    pub fn kink_margin(&self) -> f64 {
        self.conv
            .iter()
            .chain(&self.h1)
            .chain(&self.h2)
            .map(|v| v.abs().as_f64())
            .fold(f64::INFINITY, f64::min)
    }

    /// Sides of the non-smooth points taken by every conv output and MLP
    /// pre-activation; a change between two passes means a kink was crossed.
    pub fn activation_signs(&self) -> Vec<bool> {
        self.conv.iter().chain(&self.h1).chain(&self.h2).map(|&v| v > T::zero()).collect()
    }
}

/// Momentum update of the batch-norm running statistics from a train-mode cache.
pub fn update_running_stats<T: Real>(p: &mut EncoderParams<T>, cache: &EegCache<T>) -> Result<()> {
    if cache.mode != Mode::Train {
        return Err(Error::Mode("running statistics need a train-mode cache".into()));
    }
    let m = T::of(BN_MOMENTUM);
    let keep = T::one() - m;
    for (r, &v) in p.block_mut(Block::BnRunningMean).iter_mut().zip(&cache.batch_mean) {
        *r = keep * *r + m * v;
    }
    for (r, &v) in p.block_mut(Block::BnRunningVar).iter_mut().zip(&cache.batch_var) {
        *r = keep * *r + m * v;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::EncoderDims;
    use super::*;
    use rand::Rng;

    fn small() -> EncoderDims {
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

    fn batch(b: usize, d: &EncoderDims, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Permutation, 1);
        (0..b * d.channels * d.timepoints)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect()
    }

    #[test]
    fn full_size_shapes() {
        let d = EncoderDims::default();
        let p = EncoderParams::<f32>::init(d, 0).unwrap();
        let x: Vec<f32> = batch(4, &d, 0).iter().map(|&v| v as f32).collect();
        let (z, cache) = eeg_forward(&p, &x, &ForwardMode::train(1)).unwrap();
        assert_eq!(cache.conv.len(), 4 * 25 * 250);
        assert_eq!(cache.flat.len(), 4 * 5000);
        assert_eq!(z.len(), 4 * 1024);
    }

    #[test]
    fn train_mode_rejects_single_sample() {
        let d = small();
        let p = EncoderParams::<f64>::init(d, 0).unwrap();
        let x = batch(1, &d, 0);
        assert!(matches!(eeg_forward(&p, &x, &ForwardMode::train(0)), Err(Error::Mode(_))));
        assert!(eeg_forward(&p, &x, &ForwardMode::eval()).is_ok());
    }

    #[test]
    fn eval_ignores_dropout_seed_and_input_sign() {
        let d = small();
        let p = EncoderParams::<f64>::init(d, 3).unwrap();
        let x = batch(3, &d, 5);
        let mut e1 = ForwardMode::eval();
        e1.dropout_seed = 1;
        let mut e2 = ForwardMode::eval();
        e2.dropout_seed = 99;
        let (a, _) = eeg_forward(&p, &x, &e1).unwrap();
        let (b, _) = eeg_forward(&p, &x, &e2).unwrap();
        assert_eq!(a, b);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let (c, _) = eeg_forward(&p, &neg, &e1).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn eval_cache_cannot_backprop() {
        let d = small();
        let p = EncoderParams::<f64>::init(d, 0).unwrap();
        let (z, cache) = eeg_forward(&p, &batch(2, &d, 0), &ForwardMode::eval()).unwrap();
        let mut g = p.zeros_like();
        assert!(matches!(eeg_backward(&p, &cache, &z, &mut g), Err(Error::Mode(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let d = small();
        let p = EncoderParams::<f64>::init(d, 0).unwrap();
        let (z, cache) = eeg_forward(&p, &batch(4, &d, 0), &ForwardMode::train(2)).unwrap();
        let mut g = p.zeros_like();
        eeg_backward(&p, &cache, &vec![0.0; z.len()], &mut g).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn running_stats_converge_geometrically() {
        let d = small();
        let mut p = EncoderParams::<f64>::init(d, 0).unwrap();
        let x = batch(4, &d, 8);
        let (_, cache) = eeg_forward(&p, &x, &ForwardMode::train(0)).unwrap();
        let target = cache.batch_mean.clone();
        let start: Vec<f64> = p.block(Block::BnRunningMean).to_vec();
        for step in 1..=50 {
            update_running_stats(&mut p, &cache).unwrap();
            for ((&r, &m), &s) in p.block(Block::BnRunningMean).iter().zip(&target).zip(&start) {
                let expected = m + (s - m) * (1.0 - BN_MOMENTUM).powi(step);
                assert!((r - expected).abs() < 1e-12);
            }
        }
        // Batch statistics do not depend on parameters' running values.
        let (_, again) = eeg_forward(&p, &x, &ForwardMode::train(0)).unwrap();
        assert_eq!(again.batch_var, cache.batch_var);
    }
}
