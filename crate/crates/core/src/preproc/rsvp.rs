use serde::{Deserialize, Serialize};

use super::Image;
use crate::error::{Error, Result};

/// Display recreation: the stimulus centred on a grey canvas with a fixation
/// dot drawn over its centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsvpSpec {
    pub canvas_width: usize,
    pub canvas_height: usize,
    pub background_gray: f64,
    /// Radius in pixels; 0 disables the dot.
    pub dot_radius: f64,
    pub dot_color: [f64; 3],
    /// Share of the canvas area covered by the resized stimulus.
    pub image_area_fraction: f64,
}

impl Default for RsvpSpec {
    fn default() -> Self {
        Self {
            canvas_width: 224,
            canvas_height: 224,
            background_gray: 0.5,
            dot_radius: 4.0,
            dot_color: [0.8, 0.1, 0.1],
            image_area_fraction: 0.25,
        }
    }
}

impl RsvpSpec {
    /// Size of the stimulus after scaling to `image_area_fraction` of the canvas.
    pub fn inner_size(&self, height: usize, width: usize) -> (usize, usize) {
        let canvas_area = (self.canvas_width * self.canvas_height) as f64;
        let scale = (self.image_area_fraction * canvas_area / (height * width) as f64).sqrt();
        let h = ((height as f64 * scale).round() as usize).max(1);
        let w = ((width as f64 * scale).round() as usize).max(1);
        (h, w)
    }
}

pub fn compose_rsvp(img: &Image, spec: &RsvpSpec) -> Result<Image> {
    if spec.canvas_width == 0 || spec.canvas_height == 0 {
        return Err(Error::Parameter("RSVP canvas must be non-empty".into()));
    }
    if !(spec.image_area_fraction > 0.0) {
        return Err(Error::Parameter("image_area_fraction must be positive".into()));
    }
    let (h, w) = spec.inner_size(img.height(), img.width());
    if h > spec.canvas_height || w > spec.canvas_width {
        return Err(Error::Parameter(format!(
            "scaled stimulus {h}x{w} exceeds the {}x{} canvas",
            spec.canvas_height, spec.canvas_width
        )));
    }
    let inner = img.resize_bilinear(h, w)?;
    let top = (spec.canvas_height - h) / 2;
    let left = (spec.canvas_width - w) / 2;
    let (cy, cx) = (
        spec.canvas_height as f64 / 2.0,
        spec.canvas_width as f64 / 2.0,
    );
    let r2 = spec.dot_radius * spec.dot_radius;
    Image::from_fn(spec.canvas_height, spec.canvas_width, |y, x| {
        if spec.dot_radius > 0.0 {
            let (dy, dx) = (y as f64 + 0.5 - cy, x as f64 + 0.5 - cx);
            if dy * dy + dx * dx <= r2 {
                return spec.dot_color;
            }
        }
        if (top..top + h).contains(&y) && (left..left + w).contains(&x) {
            inner.pixel(y - top, x - left)
        } else {
            [spec.background_gray; 3]
        }
    })
}
