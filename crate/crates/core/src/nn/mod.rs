//! The trainable encoder: EEG branch and visual fusion head over one flat
//! parameter vector, with hand-written backward passes.
//!
//! Forward passes are pure. In train mode they return a cache (including the
//! batch statistics) that [`eeg_backward`] / [`visual_backward`] consume, and
//! [`update_running_stats`] folds the batch statistics into the parameters.

mod eeg;
mod ops;
mod params;
mod real;
mod visual;

pub use eeg::{eeg_backward, eeg_forward, update_running_stats, EegCache, BN_EPS, BN_MOMENTUM};
pub use ops::{elu, softmax};
pub use params::{Block, EncoderDims, EncoderParams, LayoutEntry, ParamLayout};
pub use real::Real;
pub use visual::{visual_backward, visual_forward, VisualCache};

pub(crate) use real::{gemm, Op};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Dropout probabilities of the three dropout sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutRates {
    pub mlp1: f64,
    pub mlp2: f64,
    pub adapter: f64,
}

impl Default for DropoutRates {
    fn default() -> Self {
        Self {
            mlp1: 0.25,
            mlp2: 0.65,
            adapter: 0.85,
        }
    }
}

impl DropoutRates {
    pub const NONE: DropoutRates = DropoutRates {
        mlp1: 0.0,
        mlp2: 0.0,
        adapter: 0.0,
    };

    pub fn validate(&self) -> crate::Result<()> {
        for p in [self.mlp1, self.mlp2, self.adapter] {
            if !(0.0..1.0).contains(&p) {
                return Err(crate::Error::Config(format!("dropout rate {p} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardMode {
    pub mode: Mode,
    pub dropout_seed: u64,
    pub rates: DropoutRates,
}

impl ForwardMode {
    pub fn train(dropout_seed: u64) -> Self {
        Self {
            mode: Mode::Train,
            dropout_seed,
            rates: DropoutRates::default(),
        }
    }

    pub fn eval() -> Self {
        Self {
            mode: Mode::Eval,
            dropout_seed: 0,
            rates: DropoutRates::default(),
        }
    }

    pub fn with_rates(mut self, rates: DropoutRates) -> Self {
        self.rates = rates;
        self
    }
}

/// Dropout site indices; each draws its mask from its own stream.
pub(crate) const DROPOUT_MLP1: u64 = 0;
pub(crate) const DROPOUT_MLP2: u64 = 1;
pub(crate) const DROPOUT_ADAPTER: u64 = 2;
