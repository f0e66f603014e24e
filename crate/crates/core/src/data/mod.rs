//! EEG datasets, feature banks and their on-disk containers.
//!
//! Both containers are a directory holding `meta.json` and a row-major
//! little-endian `f32` payload in `data.bin`.

mod bank;
mod container;
mod dataset;
pub mod npy;
mod split;
mod synth;

pub use bank::FeatureBank;
pub use dataset::{load_dataset, EegDataset, SplitTag, STANDARD_CHANNELS, STANDARD_TIMEPOINTS};
pub use split::{split_train_val, SplitSpec, SplitStrategy};
pub use synth::{generate_synthetic, SyntheticData, SyntheticSpec};

