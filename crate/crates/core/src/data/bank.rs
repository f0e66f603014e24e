use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{read_container, write_container_atomic, DTYPE_F32LE};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct BankMeta {
    shape: Vec<usize>,
    dtype: String,
    streams: Vec<String>,
    image_ids: Vec<String>,
    #[serde(default)]
    provider: String,
}

/// Per-image, per-stream feature vectors `[images × streams × dim]`.
///
/// Row `i` belongs to `image_ids[i]`; EEG labels index these rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    features: Vec<f32>,
    dim: usize,
    streams: Vec<String>,
    image_ids: Vec<String>,
    provider: String,
}

impl FeatureBank {
    pub fn new(
        features: Vec<f32>,
        dim: usize,
        streams: Vec<String>,
        image_ids: Vec<String>,
        provider: impl Into<String>,
    ) -> Result<Self> {
        if streams.is_empty() {
            return Err(Error::Config("feature bank needs at least one stream".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = streams.iter().find(|s| !seen.insert(s.as_str())) {
            return Err(Error::Config(format!("duplicate stream name {dup:?}")));
        }
        if dim == 0 {
            return Err(Error::Shape("feature dimension must be positive".into()));
        }
        if features.len() != image_ids.len() * streams.len() * dim {
            return Err(Error::Integrity(format!(
                "{} values for {} images x {} streams x {dim}",
                features.len(),
                image_ids.len(),
                streams.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("feature bank contains non-finite values".into()));
        }
        for (row, chunk) in features.chunks_exact(dim).enumerate() {
            if chunk.iter().all(|&v| v == 0.0) {
                let image = &image_ids[row / streams.len()];
                let stream = &streams[row % streams.len()];
                return Err(Error::Data(format!(
                    "all-zero feature vector for image {image:?}, stream {stream:?}"
                )));
            }
        }
        Ok(Self {
            features,
            dim,
            streams,
            image_ids,
            provider: provider.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n_images(&self) -> usize {
        self.image_ids.len()
    }
    pub fn streams(&self) -> &[String] {
        &self.streams
    }
    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }
    pub fn provider(&self) -> &str {
        &self.provider
    }
    pub fn raw(&self) -> &[f32] {
        &self.features
    }

    pub fn stream_index(&self, name: &str) -> Option<usize> {
        self.streams.iter().position(|s| s == name)
    }

    pub fn vector(&self, image: usize, stream: usize) -> &[f32] {
        let start = (image * self.streams.len() + stream) * self.dim;
        &self.features[start..start + self.dim]
    }

    /// Restricts the bank to `names`, in that order.
    pub fn select_streams(&self, names: &[String]) -> Result<FeatureBank> {
        if names.is_empty() {
            return Err(Error::Config("no streams requested".into()));
        }
        let idx = names
            .iter()
            .map(|n| {
                self.stream_index(n).ok_or_else(|| {
                    Error::Config(format!(
                        "stream {n:?} not in bank (has {:?})",
                        self.streams
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut features = Vec::with_capacity(self.n_images() * idx.len() * self.dim);
        for img in 0..self.n_images() {
            for &s in &idx {
                features.extend_from_slice(self.vector(img, s));
            }
        }
        FeatureBank::new(
            features,
            self.dim,
            names.to_vec(),
            self.image_ids.clone(),
            self.provider.clone(),
        )
    }

    /// Rows for `ids`, in query order.
    pub fn select_images(&self, ids: &[String]) -> Result<FeatureBank> {
        let lookup: std::collections::HashMap<&str, usize> = self
            .image_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let block = self.streams.len() * self.dim;
        let mut features = Vec::with_capacity(ids.len() * block);
        for id in ids {
            let &row = lookup
                .get(id.as_str())
                .ok_or_else(|| Error::Lookup(format!("image id {id:?} not in bank")))?;
            features.extend_from_slice(&self.features[row * block..(row + 1) * block]);
        }
        FeatureBank::new(
            features,
            self.dim,
            self.streams.clone(),
            ids.to_vec(),
            self.provider.clone(),
        )
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let meta = BankMeta {
            shape: vec![self.n_images(), self.streams.len(), self.dim],
            dtype: DTYPE_F32LE.into(),
            streams: self.streams.clone(),
            image_ids: self.image_ids.clone(),
            provider: self.provider.clone(),
        };
        write_container_atomic(dir, &meta, &self.features)
    }

    pub fn load(dir: &Path) -> Result<FeatureBank> {
        let (meta, shape, values): (BankMeta, _, _) = read_container(dir)?;
        let [n, s, d]: [usize; 3] = shape.as_slice().try_into().map_err(|_| {
            Error::Format(format!(
                "{}: bank shape must have 3 axes, got {shape:?}",
                dir.display()
            ))
        })?;
        if meta.streams.len() != s || meta.image_ids.len() != n {
            return Err(Error::Integrity(format!(
                "{}: header lists {} streams / {} ids for shape {shape:?}",
                dir.display(),
                meta.streams.len(),
                meta.image_ids.len()
            )));
        }
        FeatureBank::new(values, d, meta.streams, meta.image_ids, meta.provider)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("img_{i}")).collect()
    }

    #[test]
    fn rejects_zero_rows_and_duplicate_streams() {
        let r = FeatureBank::new(vec![1.0, 0.0, 0.0, 0.0], 2, vec!["a".into()], ids(2), "t");
        assert!(matches!(r, Err(Error::Data(_))));
        let r = FeatureBank::new(vec![1.0; 4], 1, vec!["a".into(), "a".into()], ids(2), "t");
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn stream_and_image_selection() {
        let values: Vec<f32> = (1..=12).map(|v| v as f32).collect();
        let bank = FeatureBank::new(values, 2, vec!["a".into(), "b".into(), "c".into()], ids(2), "t").unwrap();
        let sel = bank.select_streams(&["c".into(), "a".into()]).unwrap();
        assert_eq!(sel.vector(1, 0), &[11.0, 12.0]);
        assert_eq!(sel.vector(1, 1), &[7.0, 8.0]);
        assert!(matches!(bank.select_streams(&["evnet".into()]), Err(Error::Config(_))));
        let rows = bank.select_images(&["img_1".into(), "img_0".into()]).unwrap();
        assert_eq!(rows.vector(0, 0), &[7.0, 8.0]);
        assert!(matches!(bank.select_images(&["nope".into()]), Err(Error::Lookup(_))));
    }
}
