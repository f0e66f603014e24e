use crate::error::{Error, Result};
use crate::nn::{gemm, Op, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct InfoNceOutput<T> {
    pub loss: T,
    pub grad_z: Vec<T>,
    pub grad_v: Vec<T>,
}

/// Symmetric InfoNCE over `N` paired rows of `z` and `v` (`[N, dim]` each).
///
/// Logits are `scale · z_i·v_j` with no normalisation. The loss is the mean of
/// the row-wise (z→v) and column-wise (v→z) cross-entropies with the diagonal
/// as targets. Returns exact gradients with respect to both inputs.
pub fn infonce_loss<T: Real>(z: &[T], v: &[T], dim: usize, scale: T) -> Result<InfoNceOutput<T>> {
    if dim == 0 || z.is_empty() || z.len() % dim != 0 || z.len() != v.len() {
        return Err(Error::Shape(format!(
            "InfoNCE inputs of {} and {} values with dim {dim}",
            z.len(),
            v.len()
        )));
    }
    if z.iter().chain(v).any(|x| !x.is_finite()) || !scale.is_finite() {
        return Err(Error::Data("InfoNCE inputs contain non-finite values".into()));
    }
    let n = z.len() / dim;
    let mut logits = vec![T::zero(); n * n];
    gemm(n, n, dim, z, Op::N, v, Op::T, T::zero(), &mut logits);
    logits.iter_mut().for_each(|l| *l *= scale);

    // Row softmax P (z→v) and column softmax Q (v→z), in f64 for the reductions.
    let mut p = vec![0.0f64; n * n];
    let mut q = vec![0.0f64; n * n];
    let mut loss = 0.0f64;
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| logits[i * n + j].as_f64()).collect();
        let lse = log_sum_exp(&row);
        loss -= row[i] - lse;
        for j in 0..n {
            p[i * n + j] = (row[j] - lse).exp();
        }
    }
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| logits[i * n + j].as_f64()).collect();
        let lse = log_sum_exp(&col);
        loss -= col[j] - lse;
        for i in 0..n {
            q[i * n + j] = (col[i] - lse).exp();
        }
    }
    let inv = 1.0 / (2 * n) as f64;
    loss *= inv;

    // dL/dlogits = ((P − I) + (Q − I)) / 2N.
    let g: Vec<T> = (0..n * n)
        .map(|k| {
            let diag = if k / n == k % n { 2.0 } else { 0.0 };
            T::of((p[k] + q[k] - diag) * inv)
        })
        .collect();
    let g: Vec<T> = g.into_iter().map(|x| x * scale).collect();
    let mut grad_z = vec![T::zero(); n * dim];
    let mut grad_v = vec![T::zero(); n * dim];
    gemm(n, dim, n, &g, Op::N, v, Op::N, T::zero(), &mut grad_z);
    gemm(n, dim, n, &g, Op::T, z, Op::N, T::zero(), &mut grad_v);
    Ok(InfoNceOutput {
        loss: T::of(loss.max(0.0)),
        grad_z,
        grad_v,
    })
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_loss_is_zero() {
        let out = infonce_loss(&[0.3f64, -2.0, 5.0], &[1.0, 4.0, -0.5], 3, 1.0).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.grad_z.iter().chain(&out.grad_v).all(|&g| g == 0.0));
    }

    #[test]
    fn two_by_two_hand_value() {
        let z = [1.0f64, 0.0, 0.0, 0.0, 1.0, 0.0];
        let out = infonce_loss(&z, &z, 3, 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((out.loss - -(e / (e + 1.0)).ln()).abs() < 1e-12);
        assert!((out.loss - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(infonce_loss(&[f64::NAN, 0.0], &[1.0, 0.0], 2, 1.0), Err(Error::Data(_))));
        assert!(matches!(infonce_loss(&[1.0f64, 0.0], &[1.0], 2, 1.0), Err(Error::Shape(_))));
    }
}
