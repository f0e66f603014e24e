//! Feature providers standing in for the frozen visual backbones.
//!
//! A provider maps image ids to per-stream feature vectors. `Precomputed`
//! reads a bank produced by any external extractor; `Synthetic` projects the
//! class latents of a synthetic dataset through seeded per-stream maps.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::FeatureBank;
use crate::error::{Error, Result};
use crate::rng::{labelled_stream, Purpose};

pub const EVNET_STREAM: &str = "evnet";

/// Relative size of the per-stream perturbation added to the shared map.
const BLUR_PERTURBATION: f64 = 0.3;
const EVNET_PERTURBATION: f64 = 0.6;

pub fn blur_stream_name(kernel: usize) -> String {
    format!("blur_k{kernel}")
}

/// `blur_k{k}` for every kernel, then `evnet` when requested.
pub fn default_stream_names(kernels: &[usize], evnet: bool) -> Vec<String> {
    let mut names: Vec<String> = kernels.iter().map(|&k| blur_stream_name(k)).collect();
    if evnet {
        names.push(EVNET_STREAM.into());
    }
    names
}

fn default_dim() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderSource {
    Precomputed { path: PathBuf },
    Synthetic { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    #[serde(flatten)]
    pub source: ProviderSource,
    pub streams: Vec<String>,
    #[serde(default = "default_dim")]
    pub feature_dim: usize,
}

pub trait FeatureProvider {
    /// Bank with one row per id, in query order.
    fn provide(&self, ids: &[String]) -> Result<FeatureBank>;
}

#[derive(Debug, Clone)]
pub struct PrecomputedProvider {
    bank: FeatureBank,
}

impl PrecomputedProvider {
    pub fn open(path: &Path, streams: &[String]) -> Result<Self> {
        let bank = FeatureBank::load(path)?;
        Self::from_bank(&bank, streams)
    }

    pub fn from_bank(bank: &FeatureBank, streams: &[String]) -> Result<Self> {
        Ok(Self {
            bank: bank.select_streams(streams)?,
        })
    }
}

impl FeatureProvider for PrecomputedProvider {
    fn provide(&self, ids: &[String]) -> Result<FeatureBank> {
        self.bank.select_images(ids)
    }
}

/// Deterministic features: `normalize((G + s·P_stream) · latent)` where `G`
/// is shared by all streams and `P_stream` is keyed by the stream name.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    seed: u64,
    streams: Vec<String>,
    dim: usize,
    latents: HashMap<String, Vec<f64>>,
}

impl SyntheticProvider {
    pub fn new(seed: u64, streams: Vec<String>, dim: usize) -> Result<Self> {
        if streams.is_empty() {
            return Err(Error::Config("synthetic provider needs at least one stream".into()));
        }
        if dim == 0 {
            return Err(Error::Config("feature_dim must be positive".into()));
        }
        Ok(Self {
            seed,
            streams,
            dim,
            latents: HashMap::new(),
        })
    }

    /// Registers the class latent behind each image id.
    pub fn with_latents(mut self, entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Self {
        self.latents.extend(entries);
        self
    }

    fn gaussian_map(&self, label: &str, latent_dim: usize) -> Vec<f64> {
        let mut rng = labelled_stream(self.seed, Purpose::SynthFeature, label);
        (0..self.dim * latent_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn stream_map(&self, stream: &str, latent_dim: usize) -> Vec<f64> {
        let scale = if stream.ends_with(EVNET_STREAM) {
            EVNET_PERTURBATION
        } else {
            BLUR_PERTURBATION
        };
        let mut map = self.gaussian_map("\0shared", latent_dim);
        let pert = self.gaussian_map(stream, latent_dim);
        for (m, p) in map.iter_mut().zip(&pert) {
            *m += scale * p;
        }
        map
    }
}

impl FeatureProvider for SyntheticProvider {
    fn provide(&self, ids: &[String]) -> Result<FeatureBank> {
        let rows = ids
            .iter()
            .map(|id| {
                self.latents
                    .get(id)
                    .ok_or_else(|| Error::Lookup(format!("no latent registered for image {id:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let latent_dim = rows.first().map_or(0, |l| l.len());
        if rows.iter().any(|l| l.len() != latent_dim) {
            return Err(Error::Shape("latents have inconsistent dimensions".into()));
        }
        let maps: Vec<Vec<f64>> = self
            .streams
            .iter()
            .map(|s| self.stream_map(s, latent_dim))
            .collect();
        let mut features = Vec::with_capacity(ids.len() * self.streams.len() * self.dim);
        for latent in &rows {
            for map in &maps {
                let v: Vec<f64> = map
                    .chunks_exact(latent_dim)
                    .map(|row| row.iter().zip(latent.iter()).map(|(a, b)| a * b).sum())
                    .collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::Data("synthetic feature collapsed to zero".into()));
                }
                features.extend(v.iter().map(|x| (x / norm) as f32));
            }
        }
        FeatureBank::new(
            features,
            self.dim,
            self.streams.clone(),
            ids.to_vec(),
            format!("synthetic(seed={})", self.seed),
        )
    }
}

/// Builds a provider from a spec. Synthetic providers need the latent table of
/// the dataset they describe.
pub fn provide_features(
    spec: &ProviderSpec,
    ids: &[String],
    latents: Option<&[(String, Vec<f64>)]>,
) -> Result<FeatureBank> {
    match &spec.source {
        ProviderSource::Precomputed { path } => {
            let bank = PrecomputedProvider::open(path, &spec.streams)?.provide(ids)?;
            if bank.dim() != spec.feature_dim {
                return Err(Error::Config(format!(
                    "bank at {} has dim {}, spec requests {}",
                    path.display(),
                    bank.dim(),
                    spec.feature_dim
                )));
            }
            Ok(bank)
        }
        ProviderSource::Synthetic { seed } => {
            let latents = latents.ok_or_else(|| {
                Error::Config("synthetic provider requires class latents".into())
            })?;
            SyntheticProvider::new(*seed, spec.streams.clone(), spec.feature_dim)?
                .with_latents(latents.iter().cloned())
                .provide(ids)
        }
    }
}

/// Persists a bank so later runs can use it as a precomputed source. The
/// write goes to a temporary directory that is renamed into place.
pub fn cache_features(bank: &FeatureBank, path: &Path) -> Result<()> {
    if bank.streams().is_empty() {
        return Err(Error::Config("refusing to cache a bank without streams".into()));
    }
    bank.write(path)
}
