use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{cosine_matrix, hungarian_top_k, top_k_accuracy, SimilarityMatrix};
use crate::data::{EegDataset, FeatureBank};
use crate::error::{Error, Result};
use crate::nn::EncoderParams;
use crate::train::{embed_eeg, embed_visual, StreamSelection, VisualInputs};

/// Rule recorded next to every Hungarian Top-k number.
pub const HUNGARIAN_TOPK_RULE: &str =
    "k successive optimal one-to-one assignments, each excluding pairs matched in earlier rounds; \
     hit if any round pairs the query with its true candidate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Independent cosine ranking per query.
    Standard,
    /// Global one-to-one assignment; uses the knowledge that every candidate
    /// is the answer to exactly one query.
    Hungarian,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Standard => "standard",
            Protocol::Hungarian => "hungarian",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Protocol::Standard),
            "hungarian" => Ok(Protocol::Hungarian),
            other => Err(Error::Parameter(format!(
                "unknown retrieval protocol {other:?} (expected standard or hungarian)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    pub protocol: Protocol,
    pub top1: f64,
    pub top5: f64,
    pub n: usize,
    pub seed: Option<u64>,
    pub checkpoint: Option<String>,
    /// Set for the Hungarian protocol: it exploits the one-to-one structure of
    /// the test set, which a deployed decoder would not know.
    pub prior_knowledge_assisted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topk_rule: Option<String>,
}

/// `(top1, top5)` of a similarity matrix under a protocol. Top-5 is taken
/// at `min(5, candidates)`.
pub fn protocol_accuracies(s: &SimilarityMatrix, protocol: Protocol) -> Result<(f64, f64)> {
    let k5 = s.cols().min(5);
    match protocol {
        Protocol::Standard => Ok((top_k_accuracy(s, 1)?, top_k_accuracy(s, k5)?)),
        Protocol::Hungarian => Ok((hungarian_top_k(s, 1)?, hungarian_top_k(s, k5)?)),
    }
}

/// Cosine matrix between eval-mode EEG embeddings of `data` and visual
/// embeddings of every bank image; query labels index bank rows.
pub fn retrieval_similarity(
    params: &EncoderParams<f32>,
    data: &EegDataset,
    inputs: &VisualInputs,
) -> Result<SimilarityMatrix> {
    if let Some(&bad) = data.labels().iter().find(|&&l| l >= inputs.n_images()) {
        return Err(Error::Config(format!(
            "label {bad} has no image in a bank of {}",
            inputs.n_images()
        )));
    }
    let e = embed_eeg(params, data)?;
    let v = embed_visual(params, inputs, None)?;
    cosine_matrix(&e, &v, params.dims().embed)?
        .with_labels(data.labels().to_vec(), (0..inputs.n_images()).collect())
}

pub fn evaluate_retrieval(
    params: &EncoderParams<f32>,
    test: &EegDataset,
    bank: &FeatureBank,
    streams: &StreamSelection,
    protocol: Protocol,
) -> Result<RetrievalMetrics> {
    let inputs = VisualInputs::from_bank(bank, streams)?;
    let s = retrieval_similarity(params, test, &inputs)?;
    let (top1, top5) = protocol_accuracies(&s, protocol)?;
    Ok(RetrievalMetrics {
        protocol,
        top1,
        top5,
        n: s.rows(),
        seed: None,
        checkpoint: None,
        prior_knowledge_assisted: protocol == Protocol::Hungarian,
        topk_rule: (protocol == Protocol::Hungarian).then(|| HUNGARIAN_TOPK_RULE.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_strings() {
        assert_eq!("standard".parse::<Protocol>().unwrap(), Protocol::Standard);
        assert_eq!("hungarian".parse::<Protocol>().unwrap(), Protocol::Hungarian);
        assert!(matches!("greedy".parse::<Protocol>(), Err(Error::Parameter(_))));
    }
}
