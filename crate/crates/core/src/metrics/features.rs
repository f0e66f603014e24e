use crate::error::{Error, Result};

/// Pearson correlation, two-pass in `f64`. Constant inputs are a data error.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Shape(format!(
            "correlation needs two equal-length vectors of at least 2 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::Data("correlation of a constant vector is undefined".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Data("correlation of a constant vector is undefined".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn check_banks(gen: &[f64], gt: &[f64], dim: usize) -> Result<usize> {
    if dim < 2 {
        return Err(Error::Shape("feature dimension must be at least 2".into()));
    }
    if gen.len() != gt.len() || gen.len() % dim != 0 || gen.is_empty() {
        return Err(Error::Shape(format!(
            "feature banks of {} and {} values are not aligned [n × {dim}]",
            gen.len(),
            gt.len()
        )));
    }
    Ok(gen.len() / dim)
}

/// Mean over ordered pairs `(i, j ≠ i)` of `[r(gen_i, gt_i) > r(gen_i, gt_j)]`,
/// counting exact ties as one half.
pub fn two_way_identification(gen: &[f64], gt: &[f64], dim: usize) -> Result<f64> {
    let n = check_banks(gen, gt, dim)?;
    if n < 2 {
        return Err(Error::Shape("two-way identification needs at least 2 items".into()));
    }
    let mut total = 0.0;
    for (i, g) in gen.chunks_exact(dim).enumerate() {
        let r: Vec<f64> = gt.chunks_exact(dim).map(|t| pearson(g, t)).collect::<Result<_>>()?;
        for (j, &rj) in r.iter().enumerate() {
            if j == i {
                continue;
            }
            total += if r[i] > rj {
                1.0
            } else if r[i] == rj {
                0.5
            } else {
                0.0
            };
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// Mean of `1 − r(gen_i, gt_i)` over aligned rows; 0 is perfect, 2 is anti-correlated.
pub fn correlation_distance(gen: &[f64], gt: &[f64], dim: usize) -> Result<f64> {
    let n = check_banks(gen, gt, dim)?;
    let sum = gen
        .chunks_exact(dim)
        .zip(gt.chunks_exact(dim))
        .map(|(g, t)| pearson(g, t).map(|r| 1.0 - r))
        .sum::<Result<f64>>()?;
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_tie_case() {
        let gen = [1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0];
        let gt = [1.0, 0.0, 2.0, 3.0, 0.0, 1.0, 2.0, 3.0];
        assert_eq!(two_way_identification(&gen, &gt, 4).unwrap(), 0.75);
    }

    #[test]
    fn identity_and_anti_correlation() {
        let gt = [1.0, 2.0, 4.0, -1.0, 0.5, 3.0, 2.0, 0.0, -2.0];
        assert_eq!(two_way_identification(&gt, &gt, 3).unwrap(), 1.0);
        assert!(correlation_distance(&gt, &gt, 3).unwrap().abs() < 1e-15);
        let centered = [1.0, 0.0, -1.0, 2.0, -3.0, 1.0];
        let neg: Vec<f64> = centered.iter().map(|v| -v).collect();
        assert!((correlation_distance(&neg, &centered, 3).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_rows_rejected() {
        let gen = [1.0, 1.0, 1.0, 0.0, 1.0, 2.0];
        let gt = [1.0, 2.0, 3.0, 0.0, 1.0, 2.0];
        assert!(matches!(correlation_distance(&gen, &gt, 3), Err(Error::Data(_))));
        assert!(matches!(two_way_identification(&gen, &gt, 3), Err(Error::Data(_))));
    }
}
