use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EegDataset, FeatureBank, SplitTag, STANDARD_CHANNELS, STANDARD_TIMEPOINTS};
use crate::error::{Error, Result};
use crate::features::{default_stream_names, FeatureProvider, SyntheticProvider};
use crate::rng::{stream, Purpose};

/// Maximum pairwise cosine between class latents; closer draws are redrawn.
const MAX_LATENT_COSINE: f64 = 0.9;

fn default_channels() -> usize {
    STANDARD_CHANNELS
}
fn default_timepoints() -> usize {
    STANDARD_TIMEPOINTS
}
fn default_feature_dim() -> usize {
    1024
}
fn one() -> usize {
    1
}
fn default_streams() -> Vec<String> {
    default_stream_names(&crate::preproc::BlurSpec::default().kernel_sizes, true)
}

/// Desk-scale stand-in for a recorded EEG/image dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub class_count: usize,
    pub samples_per_class: usize,
    pub latent_dim: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_timepoints")]
    pub timepoints: usize,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    /// Repetitions per sample before averaging; noise is drawn per repetition.
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "one")]
    pub test_samples_per_class: usize,
    #[serde(default = "default_streams")]
    pub streams: Vec<String>,
}

impl Default for SyntheticSpec {
    /// The standard benchmark: 200 classes x 10 samples, latent 64, noise 0.1.
    fn default() -> Self {
        Self {
            class_count: 200,
            samples_per_class: 10,
            latent_dim: 64,
            noise_sigma: 0.1,
            seed: 0,
            channels: STANDARD_CHANNELS,
            timepoints: STANDARD_TIMEPOINTS,
            feature_dim: 1024,
            repetitions: 1,
            test_samples_per_class: 1,
            streams: default_streams(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: EegDataset,
    pub test: EegDataset,
    /// One image per class; row `c` is class `c`.
    pub bank: FeatureBank,
    /// Unit-norm class latents, `latents[c]` for class `c`.
    pub latents: Vec<Vec<f64>>,
}

impl SyntheticData {
    pub fn image_ids(&self) -> &[String] {
        self.bank.image_ids()
    }
}

pub fn image_id(class: usize) -> String {
    format!("img_{class:05}")
}

fn class_name(class: usize) -> String {
    format!("class_{class:05}")
}

fn draw_latents(spec: &SyntheticSpec) -> Vec<Vec<f64>> {
    let mut latents: Vec<Vec<f64>> = Vec::with_capacity(spec.class_count);
    for c in 0..spec.class_count {
        let mut attempt = 0u64;
        loop {
            let mut rng = stream(spec.seed, Purpose::SynthLatent, (c as u64) | attempt << 32);
            let mut v: Vec<f64> = (0..spec.latent_dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            let too_close = latents
                .iter()
                .any(|u| u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() >= MAX_LATENT_COSINE);
            if !too_close {
                latents.push(v);
                break;
            }
            attempt += 1;
        }
    }
    latents
}

/// Generates train/test EEG, a one-image-per-class feature bank and the class
/// latents that tie them together.
///
/// EEG for a sample of class `c` is `M · latent_c + noise_sigma · N(0, I)`,
/// with `M` a fixed seeded Gaussian map (unit-variance signal per element).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.class_count < 2 {
        return Err(Error::Config("synthetic data needs at least 2 classes".into()));
    }
    if spec.latent_dim < 2 {
        return Err(Error::Config("synthetic latent_dim must be at least 2".into()));
    }
    if spec.samples_per_class == 0 || spec.repetitions == 0 || spec.test_samples_per_class == 0 {
        return Err(Error::Config("synthetic sample counts must be positive".into()));
    }
    if !(spec.noise_sigma >= 0.0) {
        return Err(Error::Config("noise_sigma must be non-negative".into()));
    }
    let latents = draw_latents(spec);
    let seg_len = spec.channels * spec.timepoints;

    let mut map_rng = stream(spec.seed, Purpose::SynthEegMap, 0);
    let eeg_map: Vec<f64> = (0..seg_len * spec.latent_dim)
        .map(|_| map_rng.sample(StandardNormal))
        .collect();
    let clean: Vec<Vec<f64>> = latents
        .iter()
        .map(|l| {
            eeg_map
                .chunks_exact(spec.latent_dim)
                .map(|row| row.iter().zip(l).map(|(m, x)| m * x).sum())
                .collect()
        })
        .collect();

    let classes: Vec<String> = (0..spec.class_count).map(class_name).collect();
    let make_split = |split: SplitTag, per_class: usize| -> Result<EegDataset> {
        let n = spec.class_count * per_class;
        let mut segments = Vec::with_capacity(n * spec.repetitions * seg_len);
        let mut labels = Vec::with_capacity(n);
        let split_id = split as u64;
        for c in 0..spec.class_count {
            for s in 0..per_class {
                let sample = (c * per_class + s) as u64;
                labels.push(c);
                for r in 0..spec.repetitions {
                    let mut rng = stream(
                        spec.seed,
                        Purpose::SynthNoise,
                        split_id << 40 | sample << 8 | r as u64,
                    );
                    segments.extend(clean[c].iter().map(|&x| {
                        let noise: f64 = if spec.noise_sigma > 0.0 {
                            rng.sample::<f64, _>(StandardNormal) * spec.noise_sigma
                        } else {
                            0.0
                        };
                        (x + noise) as f32
                    }));
                }
            }
        }
        EegDataset::new(
            segments,
            [n, spec.repetitions, spec.channels, spec.timepoints],
            labels,
            classes.clone(),
            split,
        )
    };
    let train = make_split(SplitTag::Train, spec.samples_per_class)?;
    let test = make_split(SplitTag::Test, spec.test_samples_per_class)?;

    let ids: Vec<String> = (0..spec.class_count).map(image_id).collect();
    let provider = SyntheticProvider::new(spec.seed, spec.streams.clone(), spec.feature_dim)?
        .with_latents(ids.iter().cloned().zip(latents.iter().cloned()));
    let bank = provider.provide(&ids)?;
    Ok(SyntheticData {
        train,
        test,
        bank,
        latents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, sigma: f64) -> SyntheticSpec {
        SyntheticSpec {
            class_count: 5,
            samples_per_class: 3,
            latent_dim: 4,
            noise_sigma: sigma,
            seed,
            channels: 3,
            timepoints: 7,
            feature_dim: 16,
            repetitions: 1,
            test_samples_per_class: 1,
            streams: vec!["blur_k1".into(), "evnet".into()],
        }
    }

    #[test]
    fn zero_noise_same_class_identical() {
        let d = generate_synthetic(&small(1, 0.0)).unwrap();
        let t = &d.train;
        for c in 0..5 {
            let first = t.segment(c * 3, 0);
            for s in 1..3 {
                assert_eq!(t.segment(c * 3 + s, 0), first);
            }
        }
        assert_ne!(t.segment(0, 0), t.segment(3, 0));
    }

    #[test]
    fn identical_spec_bit_identical() {
        let a = generate_synthetic(&small(9, 0.3)).unwrap();
        let b = generate_synthetic(&small(9, 0.3)).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.bank, b.bank);
        assert_eq!(a.latents, b.latents);
        let c = generate_synthetic(&small(10, 0.3)).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn standard_latents_are_separated() {
        let spec = SyntheticSpec::default();
        let latents = draw_latents(&spec);
        assert_eq!(latents.len(), 200);
        for i in 0..200 {
            let norm: f64 = latents[i].iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            for j in 0..i {
                let cos: f64 = latents[i].iter().zip(&latents[j]).map(|(a, b)| a * b).sum();
                assert!(cos < 0.9, "classes {i},{j} cosine {cos}");
            }
        }
    }

    #[test]
    fn shapes_are_consistent() {
        let mut spec = small(2, 0.1);
        spec.repetitions = 2;
        let d = generate_synthetic(&spec).unwrap();
        assert_eq!(d.train.shape(), [15, 2, 3, 7]);
        assert_eq!(d.test.shape(), [5, 2, 3, 7]);
        assert_eq!(d.bank.n_images(), 5);
        assert_eq!(d.bank.dim(), 16);
    }

    #[test]
    fn rejects_degenerate_specs() {
        let mut spec = small(0, 0.1);
        spec.class_count = 1;
        assert!(generate_synthetic(&spec).is_err());
        let mut spec = small(0, 0.1);
        spec.latent_dim = 1;
        assert!(generate_synthetic(&spec).is_err());
    }
}
