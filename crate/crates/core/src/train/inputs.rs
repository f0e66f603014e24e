use serde::{Deserialize, Serialize};

use crate::data::{EegDataset, FeatureBank};
use crate::error::{Error, Result};
use crate::nn::{eeg_forward, visual_forward, EncoderParams, ForwardMode};

/// Which bank streams feed the visual head: the blur levels (in attention
/// order) and optionally the second stream that goes through the gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSelection {
    pub blur: Vec<String>,
    pub evnet: Option<String>,
}

/// Visual-head inputs for every image of a bank, laid out for batching.
#[derive(Debug, Clone)]
pub struct VisualInputs {
    n_images: usize,
    levels: usize,
    dim: usize,
    blur: Vec<f32>,
    evnet: Option<Vec<f32>>,
}

impl VisualInputs {
    pub fn from_bank(bank: &FeatureBank, sel: &StreamSelection) -> Result<Self> {
        if sel.blur.is_empty() {
            return Err(Error::Config("at least one blur stream is required".into()));
        }
        let dim = bank.dim();
        let blur_idx = sel
            .blur
            .iter()
            .map(|s| {
                bank.stream_index(s)
                    .ok_or_else(|| Error::Config(format!("bank has no stream {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let ev_idx = sel
            .evnet
            .as_ref()
            .map(|s| {
                bank.stream_index(s)
                    .ok_or_else(|| Error::Config(format!("bank has no stream {s:?}")))
            })
            .transpose()?;
        let n = bank.n_images();
        let mut blur = Vec::with_capacity(n * blur_idx.len() * dim);
        for i in 0..n {
            for &s in &blur_idx {
                blur.extend_from_slice(bank.vector(i, s));
            }
        }
        let evnet = ev_idx.map(|s| (0..n).flat_map(|i| bank.vector(i, s).iter().copied()).collect());
        Ok(Self {
            n_images: n,
            levels: blur_idx.len(),
            dim,
            blur,
            evnet,
        })
    }

    pub fn n_images(&self) -> usize {
        self.n_images
    }
    pub fn levels(&self) -> usize {
        self.levels
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn has_evnet(&self) -> bool {
        self.evnet.is_some()
    }

    /// Rows `images` stacked as `([B, L, dim], Option<[B, dim]>)`.
    pub fn gather(&self, images: &[usize]) -> (Vec<f32>, Option<Vec<f32>>) {
        let block = self.levels * self.dim;
        let mut blur = Vec::with_capacity(images.len() * block);
        for &i in images {
            blur.extend_from_slice(&self.blur[i * block..(i + 1) * block]);
        }
        let evnet = self.evnet.as_ref().map(|e| {
            images
                .iter()
                .flat_map(|&i| e[i * self.dim..(i + 1) * self.dim].iter().copied())
                .collect()
        });
        (blur, evnet)
    }
}

const EVAL_CHUNK: usize = 256;

/// Eval-mode EEG embeddings `[n, embed]`; repetitions are averaged first.
pub fn embed_eeg(params: &EncoderParams<f32>, data: &EegDataset) -> Result<Vec<f32>> {
    let d = params.dims();
    if data.n_channels() != d.channels || data.n_timepoints() != d.timepoints {
        return Err(Error::Shape(format!(
            "dataset is {}×{}, encoder expects {}×{}",
            data.n_channels(),
            data.n_timepoints(),
            d.channels,
            d.timepoints
        )));
    }
    let averaged;
    let data = if data.n_reps() > 1 {
        averaged = data.average_repetitions();
        &averaged
    } else {
        data
    };
    let seg = data.segment_len();
    let mut out = Vec::with_capacity(data.n_samples() * d.embed);
    for chunk in data.segments().chunks(EVAL_CHUNK * seg) {
        let (z, _) = eeg_forward(params, chunk, &ForwardMode::eval())?;
        out.extend(z);
    }
    Ok(out)
}

/// Eval-mode visual embeddings for the given images (all images if `None`).
pub fn embed_visual(
    params: &EncoderParams<f32>,
    inputs: &VisualInputs,
    images: Option<&[usize]>,
) -> Result<Vec<f32>> {
    check_visual(params, inputs)?;
    let all: Vec<usize>;
    let images = match images {
        Some(i) => i,
        None => {
            all = (0..inputs.n_images()).collect();
            &all
        }
    };
    let mut out = Vec::with_capacity(images.len() * params.dims().embed);
    for chunk in images.chunks(EVAL_CHUNK) {
        let (blur, ev) = inputs.gather(chunk);
        let (v, _) = visual_forward(params, &blur, ev.as_deref(), &ForwardMode::eval())?;
        out.extend(v);
    }
    Ok(out)
}

pub(crate) fn check_visual(params: &EncoderParams<f32>, inputs: &VisualInputs) -> Result<()> {
    let d = params.dims();
    if inputs.dim() != d.feature_dim || inputs.levels() != d.blur_levels {
        return Err(Error::Config(format!(
            "bank provides {} blur levels of dim {}, encoder expects {} of dim {}",
            inputs.levels(),
            inputs.dim(),
            d.blur_levels,
            d.feature_dim
        )));
    }
    Ok(())
}
