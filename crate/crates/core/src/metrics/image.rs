use serde::{Deserialize, Serialize};

use super::pearson;
use crate::error::{Error, Result};
use crate::preproc::Image;

/// Both images are resampled to this square size before pixel correlation.
pub const PIXCORR_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            data_range: 1.0,
        }
    }
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable 'valid' filtering of an `h × w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    ssim_with(a, b, &SsimParams::default())
}

/// Mean SSIM over all fully contained Gaussian windows of the Rec. 601
/// luminance planes.
pub fn ssim_with(a: &Image, b: &Image, p: &SsimParams) -> Result<f64> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::Parameter(format!(
            "SSIM needs equal sizes, got {}×{} and {}×{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let (h, w) = (a.height(), a.width());
    if p.window == 0 || p.window % 2 == 0 || h < p.window || w < p.window {
        return Err(Error::Parameter(format!(
            "SSIM window {} does not fit a {h}×{w} image",
            p.window
        )));
    }
    let la = a.luminance();
    let lb = b.luminance();
    let k = gaussian_window(p.window, p.sigma);
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(u, v)| u * v).collect() };
    let mu_a = filter_valid(&la, h, w, &k);
    let mu_b = filter_valid(&lb, h, w, &k);
    let e_aa = filter_valid(&prod(&la, &la), h, w, &k);
    let e_bb = filter_valid(&prod(&lb, &lb), h, w, &k);
    let e_ab = filter_valid(&prod(&la, &lb), h, w, &k);
    let c1 = (p.k1 * p.data_range).powi(2);
    let c2 = (p.k2 * p.data_range).powi(2);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mu_a.len() as f64)
}

/// Pearson correlation of the RGB pixels after bilinear resampling of both
/// images to 256×256.
pub fn pixcorr(a: &Image, b: &Image) -> Result<f64> {
    let ra = a.resize_bilinear(PIXCORR_SIZE, PIXCORR_SIZE)?;
    let rb = b.resize_bilinear(PIXCORR_SIZE, PIXCORR_SIZE)?;
    pearson(ra.pixels(), rb.pixels()).map_err(|e| match e {
        Error::Data(_) => Error::Data("pixel correlation of a constant image is undefined".into()),
        other => other,
    })
}
