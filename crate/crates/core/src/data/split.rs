use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{EegDataset, SplitTag};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SplitStrategy {
    /// Uniform random permutation of sample indices.
    #[default]
    BySample,
    /// Same fraction taken from every class independently.
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub strategy: SplitStrategy,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.95,
            seed: 0,
            strategy: SplitStrategy::BySample,
        }
    }
}

impl SplitSpec {
    /// Sorted `(train, val)` index sets.
    pub fn partition(&self, labels: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "train_fraction {} outside (0, 1]",
                self.train_fraction
            )));
        }
        let mut rng = stream(self.seed, Purpose::Split, 0);
        let (mut train, mut val) = match self.strategy {
            SplitStrategy::BySample => {
                let mut idx: Vec<usize> = (0..labels.len()).collect();
                idx.shuffle(&mut rng);
                let n_train = (labels.len() as f64 * self.train_fraction).round() as usize;
                let val = idx.split_off(n_train.min(idx.len()));
                (idx, val)
            }
            SplitStrategy::Stratified => {
                let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
                let mut by_class = vec![Vec::new(); n_classes];
                for (i, &l) in labels.iter().enumerate() {
                    by_class[l].push(i);
                }
                let (mut train, mut val) = (Vec::new(), Vec::new());
                for mut members in by_class {
                    members.shuffle(&mut rng);
                    let n_train = (members.len() as f64 * self.train_fraction).round() as usize;
                    val.extend(members.split_off(n_train.min(members.len())));
                    train.extend(members);
                }
                (train, val)
            }
        };
        if val.is_empty() {
            return Err(Error::Config(format!(
                "train_fraction {} leaves the validation split empty",
                self.train_fraction
            )));
        }
        if train.is_empty() {
            return Err(Error::Config("split leaves the training set empty".into()));
        }
        train.sort_unstable();
        val.sort_unstable();
        Ok((train, val))
    }
}

/// Partitions a training dataset into train / validation subsets.
pub fn split_train_val(d: &EegDataset, s: &SplitSpec) -> Result<(EegDataset, EegDataset)> {
    if d.split() != SplitTag::Train {
        return Err(Error::Config(format!(
            "can only split a train dataset, got {}",
            d.split()
        )));
    }
    let (train, val) = s.partition(d.labels())?;
    Ok((d.subset(&train, SplitTag::Train), d.subset(&val, SplitTag::Val)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_fraction_is_configuration_error() {
        let spec = SplitSpec {
            train_fraction: 1.0,
            ..Default::default()
        };
        assert!(matches!(spec.partition(&[0; 10]), Err(Error::Config(_))));
    }

    #[test]
    fn protocol_sizes() {
        let labels: Vec<usize> = (0..16_540).map(|i| i / 10).collect();
        let (train, val) = SplitSpec::default().partition(&labels).unwrap();
        assert_eq!((train.len(), val.len()), (15_713, 827));
    }

    #[test]
    fn deterministic_given_seed() {
        let labels: Vec<usize> = (0..300).map(|i| i % 7).collect();
        let spec = SplitSpec {
            seed: 11,
            ..Default::default()
        };
        assert_eq!(spec.partition(&labels).unwrap(), spec.partition(&labels).unwrap());
        let other = SplitSpec {
            seed: 12,
            ..Default::default()
        };
        assert_ne!(spec.partition(&labels).unwrap(), other.partition(&labels).unwrap());
    }

    #[test]
    fn disjoint_and_exhaustive_over_seed_sweep() {
        let labels: Vec<usize> = (0..237).map(|i| i % 13).collect();
        for strategy in [SplitStrategy::BySample, SplitStrategy::Stratified] {
            for seed in 0..100 {
                let spec = SplitSpec {
                    train_fraction: 0.9,
                    seed,
                    strategy,
                };
                let (train, val) = spec.partition(&labels).unwrap();
                let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
                all.sort_unstable();
                assert_eq!(all, (0..237).collect::<Vec<_>>());
                if strategy == SplitStrategy::BySample {
                    assert!((train.len() as f64 - 237.0 * 0.9).abs() <= 1.0);
                }
            }
        }
    }

    #[test]
    fn rejects_non_train_input() {
        let d = EegDataset::new(vec![0.0; 4], [4, 1, 1, 1], vec![0; 4], vec!["a".into()], SplitTag::Test)
            .unwrap();
        assert!(matches!(split_train_val(&d, &SplitSpec::default()), Err(Error::Config(_))));
    }
}
