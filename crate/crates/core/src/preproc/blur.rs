use serde::{Deserialize, Serialize};

use super::Image;
use crate::error::{Error, Result};

pub const DEFAULT_KERNEL_SIZES: [usize; 8] = [1, 3, 15, 21, 33, 45, 57, 63];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlurSpec {
    pub kernel_sizes: Vec<usize>,
}

impl Default for BlurSpec {
    fn default() -> Self {
        Self {
            kernel_sizes: DEFAULT_KERNEL_SIZES.to_vec(),
        }
    }
}

impl BlurSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_sizes.is_empty() {
            return Err(Error::Parameter("blur spec lists no kernel sizes".into()));
        }
        for &k in &self.kernel_sizes {
            check_kernel(k)?;
        }
        Ok(())
    }
}

fn check_kernel(k: usize) -> Result<()> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::Parameter(format!(
            "kernel size must be odd and positive, got {k}"
        )));
    }
    Ok(())
}

/// Kernel-size to sigma convention `0.3·((k−1)·0.5 − 1) + 0.8`.
pub fn sigma_for_kernel(k: usize) -> f64 {
    0.3 * ((k as f64 - 1.0) * 0.5 - 1.0) + 0.8
}

/// Normalised 1-D Gaussian taps of length `k`.
pub fn gaussian_kernel(k: usize) -> Result<Vec<f64>> {
    check_kernel(k)?;
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let sigma = sigma_for_kernel(k);
    let centre = (k / 2) as f64;
    let taps: Vec<f64> = (0..k)
        .map(|i| {
            let d = i as f64 - centre;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / sum).collect())
}

/// Mirror index without repeating the edge sample (`dcb|abcd|cba`); folds
/// repeatedly when the offset exceeds the signal length.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Separable blur of one row-major plane, without clamping.
pub fn blur_plane(plane: &[f64], height: usize, width: usize, k: usize) -> Result<Vec<f64>> {
    let taps = gaussian_kernel(k)?;
    if k == 1 {
        return Ok(plane.to_vec());
    }
    let r = (k / 2) as isize;
    let mut rows = vec![0.0; plane.len()];
    for y in 0..height {
        let src = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            rows[y * width + x] = taps
                .iter()
                .enumerate()
                .map(|(t, w)| w * src[reflect(x as isize + t as isize - r, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = taps
                .iter()
                .enumerate()
                .map(|(t, w)| w * rows[reflect(y as isize + t as isize - r, height) * width + x])
                .sum();
        }
    }
    Ok(out)
}

/// Gaussian blur with reflect padding; `k == 1` returns the input unchanged.
pub fn gaussian_blur(img: &Image, k: usize) -> Result<Image> {
    check_kernel(k)?;
    if k == 1 {
        return Ok(img.clone());
    }
    let (h, w) = (img.height(), img.width());
    let planes = [0, 1, 2].map(|c| blur_plane(&img.plane(c), h, w, k));
    let [r, g, b] = planes;
    Image::from_planes(h, w, [r?, g?, b?])
}

/// One blurred copy per kernel size, each computed from the original image.
pub fn build_blur_pyramid(img: &Image, spec: &BlurSpec) -> Result<Vec<Image>> {
    spec.validate()?;
    spec.kernel_sizes
        .iter()
        .map(|&k| gaussian_blur(img, k))
        .collect()
}
