//! Symmetric InfoNCE training of the encoder with AdamW, per-epoch retrieval
//! evaluation and checkpoint-selection policies.

mod adamw;
mod infonce;
mod inputs;
mod record;
mod trainer;

pub use adamw::{AdamW, AdamWConfig};
pub use infonce::{infonce_loss, InfoNceOutput};
pub use inputs::{embed_eeg, embed_visual, StreamSelection, VisualInputs};
pub use record::{select_checkpoint, EpochMetrics, RunRecord, SelectionPolicy};
pub use trainer::{
    config_hash, dims_for, train, val_accuracy, EvalSets, LabelledSet, TrainConfig, TrainOutcome,
};
