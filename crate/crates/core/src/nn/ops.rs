use rand::Rng;

use super::Real;
use crate::rng::{stream, Purpose};

pub fn elu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        x.exp_m1()
    }
}

/// Derivative of ELU expressed through the pre-activation.
pub(crate) fn elu_grad<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        x.exp()
    }
}

pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `dL/dlogit_i = w_i (dL/dw_i − Σ_j w_j dL/dw_j)`.
pub(crate) fn softmax_backward<T: Real>(w: &[T], dw: &[T]) -> Vec<T> {
    let dot: T = w.iter().zip(dw).map(|(&a, &b)| a * b).sum();
    w.iter().zip(dw).map(|(&wi, &di)| wi * (di - dot)).collect()
}

/// Inverted-dropout mask: 0 with probability `p`, `1/(1−p)` otherwise.
pub(crate) fn dropout_mask<T: Real>(seed: u64, site: u64, len: usize, p: f64) -> Vec<T> {
    if p == 0.0 {
        return vec![T::one(); len];
    }
    let keep = T::of(1.0 / (1.0 - p));
    let mut rng = stream(seed, Purpose::Dropout, site);
    (0..len)
        .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
        .collect()
}

/// `out[r, j] += bias[j]` for a row-major `rows × bias.len()` matrix.
pub(crate) fn add_bias<T: Real>(out: &mut [T], bias: &[T]) {
    for row in out.chunks_exact_mut(bias.len()) {
        for (o, &b) in row.iter_mut().zip(bias) {
            *o += b;
        }
    }
}

/// `acc[j] += Σ_r m[r, j]`.
pub(crate) fn add_col_sums<T: Real>(acc: &mut [T], m: &[T]) {
    for row in m.chunks_exact(acc.len()) {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
}
