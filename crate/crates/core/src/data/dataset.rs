use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{read_container, write_container_atomic, DTYPE_F32LE};
use crate::error::{Error, Result};

pub const STANDARD_CHANNELS: usize = 63;
pub const STANDARD_TIMEPOINTS: usize = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    #[default]
    Train,
    Val,
    Test,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        })
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    shape: Vec<usize>,
    dtype: String,
    labels: Vec<usize>,
    classes: Vec<String>,
    #[serde(default)]
    split: SplitTag,
}

/// EEG segments with a repetition axis: `[samples × reps × channels × time]`.
///
/// `labels[i]` is the class of sample `i`, which doubles as the row of the
/// matching image in a [`FeatureBank`](super::FeatureBank).
#[derive(Debug, Clone, PartialEq)]
pub struct EegDataset {
    segments: Vec<f32>,
    n_samples: usize,
    n_reps: usize,
    n_channels: usize,
    n_timepoints: usize,
    labels: Vec<usize>,
    classes: Vec<String>,
    split: SplitTag,
}

impl EegDataset {
    /// `shape` is `[samples, reps, channels, timepoints]`.
    pub fn new(
        segments: Vec<f32>,
        shape: [usize; 4],
        labels: Vec<usize>,
        classes: Vec<String>,
        split: SplitTag,
    ) -> Result<Self> {
        let [n_samples, n_reps, n_channels, n_timepoints] = shape;
        if n_reps == 0 || n_channels == 0 || n_timepoints == 0 {
            return Err(Error::Shape(format!("degenerate dataset shape {shape:?}")));
        }
        if segments.len() != n_samples * n_reps * n_channels * n_timepoints {
            return Err(Error::Integrity(format!(
                "shape {shape:?} does not match {} values",
                segments.len()
            )));
        }
        if labels.len() != n_samples {
            return Err(Error::Integrity(format!(
                "{} labels for {n_samples} samples",
                labels.len()
            )));
        }
        if classes.is_empty() {
            return Err(Error::Format("dataset declares no classes".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::Data(format!(
                "label {bad} outside [0, {})",
                classes.len()
            )));
        }
        if let Some(pos) = segments.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite EEG value at flat index {pos}")));
        }
        Ok(Self {
            segments,
            n_samples,
            n_reps,
            n_channels,
            n_timepoints,
            labels,
            classes,
            split,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }
    pub fn n_reps(&self) -> usize {
        self.n_reps
    }
    pub fn n_channels(&self) -> usize {
        self.n_channels
    }
    pub fn n_timepoints(&self) -> usize {
        self.n_timepoints
    }
    pub fn shape(&self) -> [usize; 4] {
        [self.n_samples, self.n_reps, self.n_channels, self.n_timepoints]
    }
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
    pub fn classes(&self) -> &[String] {
        &self.classes
    }
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }
    pub fn split(&self) -> SplitTag {
        self.split
    }
    pub fn segments(&self) -> &[f32] {
        &self.segments
    }

    pub fn segment_len(&self) -> usize {
        self.n_channels * self.n_timepoints
    }

    /// True when the segment shape is the 63-channel, 250-sample protocol shape.
    pub fn has_standard_montage(&self) -> bool {
        self.n_channels == STANDARD_CHANNELS && self.n_timepoints == STANDARD_TIMEPOINTS
    }

    pub fn segment(&self, sample: usize, rep: usize) -> &[f32] {
        let len = self.segment_len();
        let start = (sample * self.n_reps + rep) * len;
        &self.segments[start..start + len]
    }

    pub fn with_split(mut self, split: SplitTag) -> Self {
        self.split = split;
        self
    }

    /// Mean over the repetition axis; the result has `n_reps == 1`.
    pub fn average_repetitions(&self) -> EegDataset {
        if self.n_reps == 1 {
            return self.clone();
        }
        let len = self.segment_len();
        let mut out = Vec::with_capacity(self.n_samples * len);
        let mut acc = vec![0f64; len];
        let scale = 1.0 / self.n_reps as f64;
        for s in 0..self.n_samples {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for r in 0..self.n_reps {
                for (a, &v) in acc.iter_mut().zip(self.segment(s, r)) {
                    *a += v as f64;
                }
            }
            out.extend(acc.iter().map(|&a| (a * scale) as f32));
        }
        EegDataset {
            segments: out,
            n_reps: 1,
            ..self.clone_header()
        }
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], split: SplitTag) -> EegDataset {
        let block = self.n_reps * self.segment_len();
        let mut segments = Vec::with_capacity(indices.len() * block);
        for &i in indices {
            segments.extend_from_slice(&self.segments[i * block..(i + 1) * block]);
        }
        EegDataset {
            segments,
            n_samples: indices.len(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split,
            ..self.clone_header()
        }
    }

    fn clone_header(&self) -> EegDataset {
        EegDataset {
            segments: Vec::new(),
            n_samples: self.n_samples,
            n_reps: self.n_reps,
            n_channels: self.n_channels,
            n_timepoints: self.n_timepoints,
            labels: self.labels.clone(),
            classes: self.classes.clone(),
            split: self.split,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let meta = DatasetMeta {
            shape: self.shape().to_vec(),
            dtype: DTYPE_F32LE.into(),
            labels: self.labels.clone(),
            classes: self.classes.clone(),
            split: self.split,
        };
        write_container_atomic(dir, &meta, &self.segments)
    }
}

/// Loads a dataset container. The repetition axis is kept as stored.
pub fn load_dataset(dir: &Path) -> Result<EegDataset> {
    let (meta, shape, values): (DatasetMeta, _, _) = read_container(dir)?;
    let shape: [usize; 4] = shape.as_slice().try_into().map_err(|_| {
        Error::Format(format!(
            "{}: dataset shape must have 4 axes, got {:?}",
            dir.display(),
            shape
        ))
    })?;
    EegDataset::new(values, shape, meta.labels, meta.classes, meta.split)
}
