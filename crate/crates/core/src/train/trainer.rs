use std::time::Instant;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    infonce_loss, select_checkpoint, AdamW, AdamWConfig, EpochMetrics, RunRecord, SelectionPolicy,
    StreamSelection, VisualInputs,
};
use crate::data::{EegDataset, FeatureBank};
use crate::error::{Error, Result};
use crate::nn::{
    eeg_backward, eeg_forward, update_running_stats, visual_backward, visual_forward,
    DropoutRates, EncoderDims, EncoderParams, ForwardMode,
};
use crate::retrieval::{
    cosine_matrix, protocol_accuracies, retrieval_similarity, top_k_accuracy, Protocol,
};
use crate::rng::{stream, Purpose};
use crate::train::inputs::check_visual;
use crate::train::embed_eeg;
use crate::train::embed_visual;

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seeds: Vec<u64>,
    pub logit_scale: f64,
    #[serde(default)]
    pub selection: SelectionPolicy,
    /// ℓ2-normalise both embeddings before the loss. Off by default: the
    /// loss uses raw dot products and normalisation only happens at retrieval.
    #[serde(default)]
    pub normalize_embeddings: bool,
    #[serde(default)]
    pub dropout: DropoutRates,
    /// Evaluate the one-to-one protocol every epoch (square test sets only).
    #[serde(default = "default_true")]
    pub eval_hungarian: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 1024,
            lr: 1e-3,
            weight_decay: 0.01,
            seeds: (21..=30).collect(),
            logit_scale: 1.0,
            selection: SelectionPolicy::FinalEpoch,
            normalize_embeddings: false,
            dropout: DropoutRates::default(),
            eval_hungarian: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.logit_scale > 0.0 && self.logit_scale.is_finite()) {
            return Err(Error::Config("logit_scale must be positive".into()));
        }
        if !(self.lr >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("lr and weight_decay must be non-negative".into()));
        }
        self.dropout.validate()
    }

    fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..Default::default()
        }
    }
}

/// An EEG split together with the bank its labels index into.
#[derive(Debug, Clone, Copy)]
pub struct LabelledSet<'a> {
    pub data: &'a EegDataset,
    pub bank: &'a FeatureBank,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalSets<'a> {
    /// Evaluated every epoch with the standard (and optionally Hungarian) protocol.
    pub test: Option<LabelledSet<'a>>,
    /// Ranked against the images of its own samples only.
    pub val: Option<LabelledSet<'a>>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub final_params: EncoderParams<f32>,
    /// Parameters at `record.selected_epoch`.
    pub selected_params: EncoderParams<f32>,
    pub record: RunRecord,
    pub wall_seconds: f64,
}

/// Encoder dimensions implied by a dataset, a bank and a stream selection.
pub fn dims_for(data: &EegDataset, bank: &FeatureBank, streams: &StreamSelection) -> EncoderDims {
    EncoderDims {
        channels: data.n_channels(),
        timepoints: data.n_timepoints(),
        feature_dim: bank.dim(),
        blur_levels: streams.blur.len(),
        ..EncoderDims::default()
    }
}

/// Stable digest of everything that determines a run besides the data.
pub fn config_hash(cfg: &TrainConfig, dims: &EncoderDims, streams: &StreamSelection) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        cfg: &'a TrainConfig,
        dims: &'a EncoderDims,
        streams: &'a StreamSelection,
    }
    let json = serde_json::to_vec(&Key { cfg, dims, streams }).expect("config serializes");
    Sha256::digest(json).iter().map(|b| format!("{b:02x}")).collect()
}

fn check_labels(set: &EegDataset, bank: &FeatureBank, what: &str) -> Result<()> {
    if let Some(&bad) = set.labels().iter().find(|&&l| l >= bank.n_images()) {
        return Err(Error::Config(format!(
            "{what} label {bad} has no image in a bank of {} images",
            bank.n_images()
        )));
    }
    Ok(())
}

/// Mini-batches of a shuffled order. A trailing batch of one sample is merged
/// into the previous batch because train-mode batch-norm needs two samples.
pub(crate) fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size).collect();
    if out.len() >= 2 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * batch_size;
        *out.last_mut().unwrap() = &order[start..];
    }
    out
}

fn l2_normalize(x: &[f32], dim: usize) -> (Vec<f32>, Vec<f32>) {
    let mut out = x.to_vec();
    let mut norms = Vec::with_capacity(x.len() / dim);
    for row in out.chunks_exact_mut(dim) {
        let n = row.iter().map(|v| v * v).sum::<f32>().sqrt().max(1e-12);
        row.iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    (out, norms)
}

/// Backpropagates through `y = x/‖x‖` given normalised `y` and norms.
fn l2_normalize_backward(dy: &[f32], y: &[f32], norms: &[f32], dim: usize) -> Vec<f32> {
    let mut dx = vec![0.0; dy.len()];
    for (((dxr, dyr), yr), &n) in dx
        .chunks_exact_mut(dim)
        .zip(dy.chunks_exact(dim))
        .zip(y.chunks_exact(dim))
        .zip(norms)
    {
        let dot: f32 = dyr.iter().zip(yr).map(|(a, b)| a * b).sum();
        for ((o, &g), &v) in dxr.iter_mut().zip(dyr).zip(yr) {
            *o = (g - v * dot) / n;
        }
    }
    dx
}

/// Trains one seed. All randomness (init, shuffling, dropout) derives from
/// `seed`, so identical inputs reproduce the record and parameters exactly.
pub fn train(
    data: &EegDataset,
    bank: &FeatureBank,
    streams: &StreamSelection,
    cfg: &TrainConfig,
    seed: u64,
    eval: EvalSets<'_>,
) -> Result<TrainOutcome> {
    let start = Instant::now();
    cfg.validate()?;
    check_labels(data, bank, "train")?;
    if data.n_samples() < 2 {
        return Err(Error::Config("training needs at least 2 samples".into()));
    }
    if cfg.selection == SelectionPolicy::ValSelected && eval.val.is_none() {
        return Err(Error::Config("val_selected policy needs a validation set".into()));
    }
    let data = data.average_repetitions();
    let inputs = VisualInputs::from_bank(bank, streams)?;
    let dims = dims_for(&data, bank, streams);
    let mut params = EncoderParams::<f32>::init(dims, seed)?;
    check_visual(&params, &inputs)?;

    let test = eval
        .test
        .map(|s| -> Result<_> {
            check_labels(s.data, s.bank, "test")?;
            Ok((s.data, VisualInputs::from_bank(s.bank, streams)?))
        })
        .transpose()?;
    let val = eval
        .val
        .map(|s| -> Result<_> {
            check_labels(s.data, s.bank, "val")?;
            Ok((s.data, VisualInputs::from_bank(s.bank, streams)?))
        })
        .transpose()?;

    let mut opt = AdamW::new(cfg.adamw(), &params);
    let hash = config_hash(cfg, &dims, streams);
    let seg = data.segment_len();
    let embed = dims.embed;
    let scale = cfg.logit_scale as f32;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut snapshot: Option<(f64, EncoderParams<f32>)> = None;
    let mut step = 0u64;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..data.n_samples()).collect();
        order.shuffle(&mut stream(seed, Purpose::Shuffle, epoch as u64));
        let mut loss_sum = 0.0f64;
        for batch in batches(&order, cfg.batch_size) {
            let mut x = Vec::with_capacity(batch.len() * seg);
            for &i in batch {
                x.extend_from_slice(data.segment(i, 0));
            }
            let images: Vec<usize> = batch.iter().map(|&i| data.labels()[i]).collect();
            let (blur, ev) = inputs.gather(&images);
            let dropout_seed = stream(seed, Purpose::Dropout, step).next_u64();
            let mode = ForwardMode::train(dropout_seed).with_rates(cfg.dropout);

            let (z, ecache) = eeg_forward(&params, &x, &mode)?;
            let (v, vcache) = visual_forward(&params, &blur, ev.as_deref(), &mode)?;
            let (dz, dv, loss) = if cfg.normalize_embeddings {
                let (zn, zs) = l2_normalize(&z, embed);
                let (vn, vs) = l2_normalize(&v, embed);
                let out = infonce_loss(&zn, &vn, embed, scale)?;
                (
                    l2_normalize_backward(&out.grad_z, &zn, &zs, embed),
                    l2_normalize_backward(&out.grad_v, &vn, &vs, embed),
                    out.loss,
                )
            } else {
                let out = infonce_loss(&z, &v, embed, scale)?;
                (out.grad_z, out.grad_v, out.loss)
            };
            if !loss.is_finite() {
                return Err(Error::Data(format!("loss diverged at epoch {epoch}")));
            }
            let mut grad = params.zeros_like();
            eeg_backward(&params, &ecache, &dz, &mut grad)?;
            visual_backward(&params, &vcache, &dv, &mut grad)?;
            update_running_stats(&mut params, &ecache)?;
            opt.step(&mut params, &grad);
            loss_sum += loss as f64 * batch.len() as f64;
            step += 1;
        }

        let mut m = EpochMetrics {
            epoch,
            loss: loss_sum / data.n_samples() as f64,
            top1: 0.0,
            top5: 0.0,
            val_acc: None,
            hungarian_top1: None,
            hungarian_top5: None,
        };
        if let Some((tdata, tin)) = &test {
            let s = retrieval_similarity(&params, tdata, tin)?;
            (m.top1, m.top5) = protocol_accuracies(&s, Protocol::Standard)?;
            if cfg.eval_hungarian && s.rows() == s.cols() {
                let (h1, h5) = protocol_accuracies(&s, Protocol::Hungarian)?;
                m.hungarian_top1 = Some(h1);
                m.hungarian_top5 = Some(h5);
            }
        }
        if let Some((vdata, vin)) = &val {
            m.val_acc = Some(val_accuracy(&params, vdata, vin)?);
        }
        log::info!(
            "seed {seed} epoch {epoch}: loss {:.4} top1 {:.4} top5 {:.4}",
            m.loss,
            m.top1,
            m.top5
        );
        let score = match cfg.selection {
            SelectionPolicy::FinalEpoch => None,
            SelectionPolicy::ValSelected => m.val_acc,
            SelectionPolicy::BestTestDiagnostic => Some(m.top1),
        };
        if let Some(score) = score {
            if snapshot.as_ref().is_none_or(|(best, _)| score > *best) {
                snapshot = Some((score, params.clone()));
            }
        }
        epochs.push(m);
    }

    let selected_epoch = select_checkpoint(&epochs, cfg.selection)?;
    let selected_params = match snapshot {
        Some((_, p)) => p,
        None => params.clone(),
    };
    Ok(TrainOutcome {
        final_params: params,
        selected_params,
        record: RunRecord {
            seed,
            config_hash: hash,
            selection: cfg.selection,
            selected_epoch,
            epochs,
        },
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Validation accuracy: each val EEG ranked against the images of all val
/// samples (each distinct image once), Top-1.
pub fn val_accuracy(params: &EncoderParams<f32>, val: &EegDataset, inputs: &VisualInputs) -> Result<f64> {
    let mut images: Vec<usize> = val.labels().to_vec();
    images.sort_unstable();
    images.dedup();
    let e = embed_eeg(params, val)?;
    let v = embed_visual(params, inputs, Some(&images))?;
    let s = cosine_matrix(&e, &v, params.dims().embed)?.with_labels(val.labels().to_vec(), images)?;
    top_k_accuracy(&s, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_singleton_is_merged() {
        let order: Vec<usize> = (0..9).collect();
        let b = batches(&order, 4);
        assert_eq!(b.len(), 2);
        assert_eq!(b[1], &[4, 5, 6, 7, 8]);
        let b = batches(&order, 3);
        assert_eq!(b.len(), 3);
        let b = batches(&order[..1], 4);
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn normalize_backward_matches_finite_difference() {
        let x = [0.3f32, -1.2, 0.7, 2.0, 0.1, -0.4];
        let dy = [0.5f32, -0.1, 0.9, -0.3, 0.2, 0.4];
        let (y, n) = l2_normalize(&x, 3);
        let dx = l2_normalize_backward(&dy, &y, &n, 3);
        let f = |x: &[f32]| -> f64 {
            let (y, _) = l2_normalize(x, 3);
            y.iter().zip(&dy).map(|(a, b)| (*a as f64) * (*b as f64)).sum()
        };
        for i in 0..6 {
            let mut p = x;
            p[i] += 1e-3;
            let mut m = x;
            m[i] -= 1e-3;
            let num = (f(&p) - f(&m)) / 2e-3;
            assert!((num - dx[i] as f64).abs() < 1e-3, "{i}: {num} vs {}", dx[i]);
        }
    }
}
