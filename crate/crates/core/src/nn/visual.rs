use super::ops::{add_bias, add_col_sums, dropout_mask, elu, elu_grad, softmax, softmax_backward};
use super::{gemm, Block, EncoderParams, ForwardMode, Mode, Op, Real, DROPOUT_ADAPTER};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct VisualCache<T> {
    pub mode: Mode,
    pub batch: usize,
    blur: Vec<T>,
    evnet: Option<Vec<T>>,
    /// Softmax weights over blur levels.
    pub attn: Vec<T>,
    /// Gate weights `(w1, w2)`; empty without the second stream.
    pub gate: Vec<T>,
    /// Attention-pooled blur feature, `[B, feature_dim]`.
    pub v_blur: Vec<T>,
    /// Adapter input (`v_fused`, or `v_blur` alone), `[B, feature_dim]`.
    pub fused: Vec<T>,
    a1: Vec<T>,
    mask: Vec<T>,
    hidden: Vec<T>,
}

impl<T: Real> VisualCache<T> {
    /// Smallest |pre-activation| of the adapter's hidden layer.
    pub fn kink_margin(&self) -> f64 {
        self.a1.iter().map(|v| v.abs().as_f64()).fold(f64::INFINITY, f64::min)
    }

    pub fn activation_signs(&self) -> Vec<bool> {
        self.a1.iter().map(|&v| v > T::zero()).collect()
    }
}

fn adapter_blocks(evnet: bool) -> [Block; 4] {
    if evnet {
        [Block::Fuse1W, Block::Fuse1B, Block::Fuse2W, Block::Fuse2B]
    } else {
        [Block::BlurAdapter1W, Block::BlurAdapter1B, Block::BlurAdapter2W, Block::BlurAdapter2B]
    }
}

/// Visual head: softmax attention over blur levels, optional softmax gate with
/// the second stream, then a two-layer adapter (ELU + dropout in between).
/// `blur` is `[B, L, feature_dim]`, `evnet` is `[B, feature_dim]`.
pub fn visual_forward<T: Real>(
    p: &EncoderParams<T>,
    blur: &[T],
    evnet: Option<&[T]>,
    mode: &ForwardMode,
) -> Result<(Vec<T>, VisualCache<T>)> {
    let d = *p.dims();
    let (l, df, ah) = (d.blur_levels, d.feature_dim, d.adapter_hidden);
    if blur.is_empty() || blur.len() % (l * df) != 0 {
        return Err(Error::Shape(format!(
            "blur features of {} values are not a multiple of {l} levels × {df}",
            blur.len()
        )));
    }
    let b = blur.len() / (l * df);
    if let Some(e) = evnet {
        if e.len() != b * df {
            return Err(Error::Shape(format!(
                "second-stream features have {} values, expected {b}×{df}",
                e.len()
            )));
        }
    }
    if blur.iter().chain(evnet.unwrap_or(&[])).any(|v| !v.is_finite()) {
        return Err(Error::Data("visual features contain non-finite values".into()));
    }

    let attn = softmax(p.block(Block::BlurAttn));
    let mut v_blur = vec![T::zero(); b * df];
    for (vb, fb) in v_blur.chunks_exact_mut(df).zip(blur.chunks_exact(l * df)) {
        for (&w, level) in attn.iter().zip(fb.chunks_exact(df)) {
            for (o, &x) in vb.iter_mut().zip(level) {
                *o += w * x;
            }
        }
    }
    let (gate, fused) = match evnet {
        Some(e) => {
            let g = softmax(p.block(Block::Gate));
            let fused = v_blur.iter().zip(e).map(|(&x, &y)| g[0] * x + g[1] * y).collect();
            (g, fused)
        }
        None => (Vec::new(), v_blur.clone()),
    };

    let [w1, b1, w2, b2] = adapter_blocks(evnet.is_some());
    let mut a1 = vec![T::zero(); b * ah];
    gemm(b, ah, df, &fused, Op::N, p.block(w1), Op::T, T::zero(), &mut a1);
    add_bias(&mut a1, p.block(b1));
    let mask = match mode.mode {
        Mode::Train => dropout_mask(mode.dropout_seed, DROPOUT_ADAPTER, a1.len(), mode.rates.adapter),
        Mode::Eval => vec![T::one(); a1.len()],
    };
    let hidden: Vec<T> = a1.iter().zip(&mask).map(|(&x, &m)| elu(x) * m).collect();
    let mut out = vec![T::zero(); b * d.embed];
    gemm(b, d.embed, ah, &hidden, Op::N, p.block(w2), Op::T, T::zero(), &mut out);
    add_bias(&mut out, p.block(b2));

    let cache = VisualCache {
        mode: mode.mode,
        batch: b,
        blur: blur.to_vec(),
        evnet: evnet.map(<[T]>::to_vec),
        attn,
        gate,
        v_blur,
        fused,
        a1,
        mask,
        hidden,
    };
    Ok((out, cache))
}

/// Accumulates `∂L/∂params` for the visual head into `grad`.
pub fn visual_backward<T: Real>(
    p: &EncoderParams<T>,
    cache: &VisualCache<T>,
    upstream: &[T],
    grad: &mut [T],
) -> Result<()> {
    if cache.mode != Mode::Train {
        return Err(Error::Mode("backward needs a train-mode forward cache".into()));
    }
    let d = *p.dims();
    let (l, df, ah) = (d.blur_levels, d.feature_dim, d.adapter_hidden);
    let b = cache.batch;
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
    let [w1, b1, w2, b2] = adapter_blocks(cache.evnet.is_some());

    gemm(d.embed, ah, b, upstream, Op::T, &cache.hidden, Op::N, T::one(), &mut grad[layout.range(w2)]);
    add_col_sums(&mut grad[layout.range(b2)], upstream);
    let mut dhidden = vec![T::zero(); b * ah];
    gemm(b, ah, d.embed, upstream, Op::N, p.block(w2), Op::N, T::zero(), &mut dhidden);
    let da1: Vec<T> = dhidden
        .iter()
        .zip(&cache.a1)
        .zip(&cache.mask)
        .map(|((&g, &x), &m)| g * m * elu_grad(x))
        .collect();
    gemm(ah, df, b, &da1, Op::T, &cache.fused, Op::N, T::one(), &mut grad[layout.range(w1)]);
    add_col_sums(&mut grad[layout.range(b1)], &da1);
    let mut dfused = vec![T::zero(); b * df];
    gemm(b, df, ah, &da1, Op::N, p.block(w1), Op::N, T::zero(), &mut dfused);

    let dv_blur = match &cache.evnet {
        Some(e) => {
            let dot = |v: &[T]| dfused.iter().zip(v).map(|(&g, &x)| g * x).sum::<T>();
            let dgate = [dot(&cache.v_blur), dot(e)];
            for (g, v) in grad[layout.range(Block::Gate)]
                .iter_mut()
                .zip(softmax_backward(&cache.gate, &dgate))
            {
                *g += v;
            }
            dfused.iter().map(|&g| g * cache.gate[0]).collect()
        }
        None => dfused,
    };

    let mut dattn = vec![T::zero(); l];
    for (dv, fb) in dv_blur.chunks_exact(df).zip(cache.blur.chunks_exact(l * df)) {
        for (da, level) in dattn.iter_mut().zip(fb.chunks_exact(df)) {
            *da += dv.iter().zip(level).map(|(&g, &x)| g * x).sum::<T>();
        }
    }
    for (g, v) in grad[layout.range(Block::BlurAttn)]
        .iter_mut()
        .zip(softmax_backward(&cache.attn, &dattn))
    {
        *g += v;
    }
    Ok(())
}
