//! EEG-to-image retrieval with a dual-stream contrastive encoder.
//!
//! The crate covers the full desk-scale pipeline: EEG and feature containers
//! ([`data`]), image preprocessing ([`preproc`]), pluggable frozen-backbone
//! feature providers ([`features`]), the trainable encoder with explicit
//! forward/backward passes ([`nn`]), symmetric InfoNCE training ([`train`]),
//! cosine and one-to-one assignment retrieval ([`retrieval`]), reconstruction
//! quality metrics ([`metrics`]) and the multi-seed experiment harness
//! ([`experiment`]).

pub mod data;
pub mod error;
pub mod experiment;
pub mod features;
pub mod metrics;
pub mod nn;
pub mod preproc;
pub mod retrieval;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
