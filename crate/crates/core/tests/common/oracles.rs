//! Direct, unoptimised reference implementations used as test oracles.

use eegret::preproc::Image;

/// Pearson correlation via the textbook covariance / σ formula.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n).sqrt();
    cov / (sx * sy)
}

pub fn two_way(gen: &[Vec<f64>], gt: &[Vec<f64>]) -> f64 {
    let n = gen.len();
    let mut score = 0.0;
    let mut pairs = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let own = pearson(&gen[i], &gt[i]);
                let other = pearson(&gen[i], &gt[j]);
                score += if own > other { 1.0 } else if own == other { 0.5 } else { 0.0 };
                pairs += 1.0;
            }
        }
    }
    score / pairs
}

/// 2-D Gaussian weights of an `n × n` window, normalised over the window.
fn window_2d(n: usize, sigma: f64) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    let mut w = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
            w.push((-d2 / (2.0 * sigma * sigma)).exp());
        }
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// SSIM evaluated window by window with the 2-D weights applied directly.
pub fn ssim_dense(a: &Image, b: &Image) -> f64 {
    let (h, w) = (a.height(), a.width());
    let luma = |img: &Image| -> Vec<f64> {
        (0..h * w)
            .map(|i| {
                let p = img.pixel(i / w, i % w);
                0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
            })
            .collect()
    };
    let (la, lb) = (luma(a), luma(b));
    let n = 11;
    let win = window_2d(n, 1.5);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut total = 0.0;
    let mut count = 0.0;
    for y in 0..=h - n {
        for x in 0..=w - n {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let k = (y + i) * w + x + j;
                    ma += win[i * n + j] * la[k];
                    mb += win[i * n + j] * lb[k];
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let k = (y + i) * w + x + j;
                    let (da, db) = (la[k] - ma, lb[k] - mb);
                    va += win[i * n + j] * da * da;
                    vb += win[i * n + j] * db * db;
                    cov += win[i * n + j] * da * db;
                }
            }
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1.0;
        }
    }
    total / count
}

/// Lexicographically first maximum-score permutation, by enumeration.
pub fn brute_force_assignment(scores: &[f64], n: usize) -> (f64, Vec<usize>) {
    fn rec(s: &[f64], n: usize, row: usize, used: &mut [bool], cur: &mut Vec<usize>, acc: f64, best: &mut (f64, Vec<usize>)) {
        if row == n {
            if acc > best.0 {
                *best = (acc, cur.clone());
            }
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(s, n, row + 1, used, cur, acc + s[row * n + j], best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    rec(scores, n, 0, &mut vec![false; n], &mut Vec::with_capacity(n), 0.0, &mut best);
    best
}

/// Analytic 1-D Gaussian of odd size `k` with σ = 0.3·((k−1)/2 − 1) + 0.8.
pub fn analytic_kernel(k: usize) -> Vec<f64> {
    let sigma = 0.3 * ((k as f64 - 1.0) / 2.0 - 1.0) + 0.8;
    let r = (k / 2) as i64;
    let taps: Vec<f64> = (-r..=r)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter().map(|t| t / s).collect()
}

pub fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

/// Pixel-centre bilinear resampling, written out per output pixel.
pub fn bilinear(img: &Image, h: usize, w: usize) -> Vec<f64> {
    let (sh, sw) = (img.height(), img.width());
    let mut out = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        let sy = ((y as f64 + 0.5) * sh as f64 / h as f64 - 0.5).clamp(0.0, (sh - 1) as f64);
        let (y0, fy) = (sy.floor() as usize, sy - sy.floor());
        let y1 = (y0 + 1).min(sh - 1);
        for x in 0..w {
            let sx = ((x as f64 + 0.5) * sw as f64 / w as f64 - 0.5).clamp(0.0, (sw - 1) as f64);
            let (x0, fx) = (sx.floor() as usize, sx - sx.floor());
            let x1 = (x0 + 1).min(sw - 1);
            for c in 0..3 {
                let v = img.pixel(y0, x0)[c] * (1.0 - fx) * (1.0 - fy)
                    + img.pixel(y0, x1)[c] * fx * (1.0 - fy)
                    + img.pixel(y1, x0)[c] * (1.0 - fx) * fy
                    + img.pixel(y1, x1)[c] * fx * fy;
                out.push(v);
            }
        }
    }
    out
}

/// Twenty seeded test images mixing noise, gradients, edges and blobs.
pub fn corpus() -> Vec<Image> {
    use rand::Rng;
    let mut r = super::rng(2024);
    (0..20)
        .map(|i| {
            let (h, w) = (40 + (i % 3) * 4, 36 + (i % 4) * 3);
            let phase: [f64; 3] = [r.random(), r.random(), r.random()];
            let freq = 0.1 + 0.05 * i as f64;
            let noise_amp = 0.05 * (i % 5) as f64;
            let noise: Vec<f64> = (0..h * w * 3).map(|_| r.random::<f64>()).collect();
            Image::from_fn(h, w, |y, x| {
                let mut px = [0.0; 3];
                for c in 0..3 {
                    let base = match i % 4 {
                        0 => 0.5 + 0.4 * ((x as f64 * freq) + phase[c] * 6.0).sin(),
                        1 => (y as f64 / h as f64) * (0.3 + 0.7 * phase[c]),
                        2 => if (x / 5 + y / 5) % 2 == 0 { 0.8 } else { 0.2 },
                        _ => {
                            let d = ((y as f64 - h as f64 / 2.0).powi(2) + (x as f64 - w as f64 / 2.0).powi(2)).sqrt();
                            if d < 10.0 + 5.0 * phase[c] { 0.9 } else { 0.1 }
                        }
                    };
                    let n = noise[(y * w + x) * 3 + c];
                    px[c] = ((1.0 - noise_amp) * base + noise_amp * n).clamp(0.0, 1.0);
                }
                px
            })
            .unwrap()
        })
        .collect()
}
