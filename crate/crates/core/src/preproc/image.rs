use std::path::Path;

use crate::error::{Error, Result};

/// RGB image with channel values in `[0, 1]`, stored `[height × width × 3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("image must be non-empty, got {height}x{width}")));
        }
        if pixels.len() != height * width * 3 {
            return Err(Error::Shape(format!(
                "{} values for a {height}x{width} RGB image",
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        let pixels = (0..height * width).flat_map(|_| rgb).collect();
        Self::new(height, width, pixels)
    }

    /// Builds an image from per-pixel values, clamping into `[0, 1]`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend(f(y, x).map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// One colour plane, row-major.
    pub fn plane(&self, channel: usize) -> Vec<f64> {
        self.pixels.iter().skip(channel).step_by(3).copied().collect()
    }

    pub(crate) fn from_planes(height: usize, width: usize, planes: [Vec<f64>; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width * 3);
        for i in 0..height * width {
            for p in &planes {
                pixels.push(p[i].clamp(0.0, 1.0));
            }
        }
        Self::new(height, width, pixels)
    }

    /// Rec. 601 luma.
    pub fn luminance(&self) -> Vec<f64> {
        self.pixels
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    }

    /// Bilinear resize with pixel-centre alignment.
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Result<Image> {
        if height == 0 || width == 0 {
            return Err(Error::Parameter("resize target must be non-empty".into()));
        }
        if height == self.height && width == self.width {
            return Ok(self.clone());
        }
        let axis = |dst: usize, n_dst: usize, n_src: usize| -> (usize, usize, f64) {
            let s = ((dst as f64 + 0.5) * n_src as f64 / n_dst as f64 - 0.5)
                .clamp(0.0, (n_src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(n_src - 1);
            (i0, i1, s - i0 as f64)
        };
        let cols: Vec<_> = (0..width).map(|x| axis(x, width, self.width)).collect();
        let mut pixels = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            let (y0, y1, fy) = axis(y, height, self.height);
            for &(x0, x1, fx) in &cols {
                let (a, b, c, d) = (
                    self.pixel(y0, x0),
                    self.pixel(y0, x1),
                    self.pixel(y1, x0),
                    self.pixel(y1, x1),
                );
                for ch in 0..3 {
                    let top = a[ch] + (b[ch] - a[ch]) * fx;
                    let bottom = c[ch] + (d[ch] - c[ch]) * fx;
                    pixels.push((top + (bottom - top) * fy).clamp(0.0, 1.0));
                }
            }
        }
        Image::new(height, width, pixels)
    }

    /// Reads an 8-bit (or wider) PNG, scaling to `[0, 1]` by /255.
    pub fn load_png(path: &Path) -> Result<Image> {
        let img = ::image::open(path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        let pixels = img.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
        Image::new(h as usize, w as usize, pixels)
    }

    /// Writes an 8-bit sRGB PNG (values rounded to the nearest /255 step).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let raw: Vec<u8> = self
            .pixels
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        let buf = ::image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions");
        buf.save(path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}
