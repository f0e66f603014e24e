use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Layer sizes of the encoder. [`EncoderDims::default`] is the full-size
/// network (63×250 EEG, 1024-d embeddings, 8 blur levels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderDims {
    pub channels: usize,
    pub timepoints: usize,
    pub conv_maps: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub embed: usize,
    pub feature_dim: usize,
    pub adapter_hidden: usize,
    pub blur_levels: usize,
}

impl Default for EncoderDims {
    fn default() -> Self {
        Self {
            channels: 63,
            timepoints: 250,
            conv_maps: 25,
            hidden1: 200,
            hidden2: 200,
            embed: 1024,
            feature_dim: 1024,
            adapter_hidden: 768,
            blur_levels: 8,
        }
    }
}

impl EncoderDims {
    /// Length of the flattened per-sample MLP output fed to the projection.
    pub fn flat(&self) -> usize {
        self.conv_maps * self.hidden2
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.channels,
            self.timepoints,
            self.conv_maps,
            self.hidden1,
            self.hidden2,
            self.embed,
            self.feature_dim,
            self.adapter_hidden,
            self.blur_levels,
        ];
        if all.contains(&0) {
            return Err(Error::Shape(format!("encoder dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Parameter blocks in flat-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    ConvW,
    ConvB,
    BnGamma,
    BnBeta,
    BnRunningMean,
    BnRunningVar,
    Mlp1W,
    Mlp1B,
    Mlp2W,
    Mlp2B,
    ProjW,
    ProjB,
    BlurAttn,
    Gate,
    Fuse1W,
    Fuse1B,
    Fuse2W,
    Fuse2B,
    BlurAdapter1W,
    BlurAdapter1B,
    BlurAdapter2W,
    BlurAdapter2B,
}

impl Block {
    pub const ALL: [Block; 22] = [
        Block::ConvW,
        Block::ConvB,
        Block::BnGamma,
        Block::BnBeta,
        Block::BnRunningMean,
        Block::BnRunningVar,
        Block::Mlp1W,
        Block::Mlp1B,
        Block::Mlp2W,
        Block::Mlp2B,
        Block::ProjW,
        Block::ProjB,
        Block::BlurAttn,
        Block::Gate,
        Block::Fuse1W,
        Block::Fuse1B,
        Block::Fuse2W,
        Block::Fuse2B,
        Block::BlurAdapter1W,
        Block::BlurAdapter1B,
        Block::BlurAdapter2W,
        Block::BlurAdapter2B,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Block::ConvW => "conv_w",
            Block::ConvB => "conv_b",
            Block::BnGamma => "bn_gamma",
            Block::BnBeta => "bn_beta",
            Block::BnRunningMean => "bn_running_mean",
            Block::BnRunningVar => "bn_running_var",
            Block::Mlp1W => "mlp1_w",
            Block::Mlp1B => "mlp1_b",
            Block::Mlp2W => "mlp2_w",
            Block::Mlp2B => "mlp2_b",
            Block::ProjW => "proj_w",
            Block::ProjB => "proj_b",
            Block::BlurAttn => "blur_attn_logits",
            Block::Gate => "gate_logits",
            Block::Fuse1W => "adapter1_w",
            Block::Fuse1B => "adapter1_b",
            Block::Fuse2W => "adapter2_w",
            Block::Fuse2B => "adapter2_b",
            Block::BlurAdapter1W => "blur_adapter1_w",
            Block::BlurAdapter1B => "blur_adapter1_b",
            Block::BlurAdapter2W => "blur_adapter2_w",
            Block::BlurAdapter2B => "blur_adapter2_b",
        }
    }

    /// Running batch-norm statistics are state, not optimiser targets.
    pub fn trainable(self) -> bool {
        !matches!(self, Block::BnRunningMean | Block::BnRunningVar)
    }

    pub fn shape(self, d: &EncoderDims) -> Vec<usize> {
        match self {
            Block::ConvW => vec![d.conv_maps, 1, d.channels, 1],
            Block::ConvB
            | Block::BnGamma
            | Block::BnBeta
            | Block::BnRunningMean
            | Block::BnRunningVar => vec![d.conv_maps],
            Block::Mlp1W => vec![d.hidden1, d.timepoints],
            Block::Mlp1B => vec![d.hidden1],
            Block::Mlp2W => vec![d.hidden2, d.hidden1],
            Block::Mlp2B => vec![d.hidden2],
            Block::ProjW => vec![d.embed, d.flat()],
            Block::ProjB => vec![d.embed],
            Block::BlurAttn => vec![d.blur_levels],
            Block::Gate => vec![2],
            Block::Fuse1W | Block::BlurAdapter1W => vec![d.adapter_hidden, d.feature_dim],
            Block::Fuse1B | Block::BlurAdapter1B => vec![d.adapter_hidden],
            Block::Fuse2W | Block::BlurAdapter2W => vec![d.embed, d.adapter_hidden],
            Block::Fuse2B | Block::BlurAdapter2B => vec![d.embed],
        }
    }

    /// Fan-in of weight blocks; `None` for everything else.
    fn fan_in(self, d: &EncoderDims) -> Option<usize> {
        match self {
            Block::ConvW => Some(d.channels),
            Block::Mlp1W => Some(d.timepoints),
            Block::Mlp2W => Some(d.hidden1),
            Block::ProjW => Some(d.flat()),
            Block::Fuse1W | Block::BlurAdapter1W => Some(d.feature_dim),
            Block::Fuse2W | Block::BlurAdapter2W => Some(d.adapter_hidden),
            _ => None,
        }
    }

    pub fn from_name(name: &str) -> Option<Block> {
        Block::ALL.iter().copied().find(|b| b.name() == name)
    }

    fn index(self) -> usize {
        Block::ALL.iter().position(|&b| b == self).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    dims: EncoderDims,
    offsets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl ParamLayout {
    pub fn new(dims: EncoderDims) -> Result<Self> {
        dims.validate()?;
        let mut offsets = Vec::with_capacity(Block::ALL.len() + 1);
        let mut at = 0;
        for b in Block::ALL {
            offsets.push(at);
            at += b.shape(&dims).iter().product::<usize>();
        }
        offsets.push(at);
        Ok(Self { dims, offsets })
    }

    pub fn dims(&self) -> &EncoderDims {
        &self.dims
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self, b: Block) -> std::ops::Range<usize> {
        let i = b.index();
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Block owning flat index `i`.
    pub fn block_at(&self, i: usize) -> Block {
        let pos = self.offsets.partition_point(|&o| o <= i) - 1;
        Block::ALL[pos]
    }

    pub fn entries(&self) -> Vec<LayoutEntry> {
        Block::ALL
            .iter()
            .map(|&b| LayoutEntry {
                name: b.name().into(),
                offset: self.range(b).start,
                shape: b.shape(&self.dims),
            })
            .collect()
    }
}

/// Every parameter of the EEG encoder and visual head in one flat vector,
/// addressable by [`Block`] or by raw offset.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    layout: ParamLayout,
    values: Vec<T>,
}

impl<T: Real> EncoderParams<T> {
    /// Fan-in uniform init (bound `1/sqrt(fan_in)`), zero biases and logits,
    /// unit batch-norm scale and running variance.
    pub fn init(dims: EncoderDims, seed: u64) -> Result<Self> {
        let layout = ParamLayout::new(dims)?;
        let mut values = vec![T::zero(); layout.len()];
        for (bi, b) in Block::ALL.iter().enumerate() {
            let slot = &mut values[layout.range(*b)];
            match b {
                Block::BnGamma | Block::BnRunningVar => slot.fill(T::one()),
                _ => {
                    if let Some(fan_in) = b.fan_in(&dims) {
                        let bound = 1.0 / (fan_in as f64).sqrt();
                        let mut rng = stream(seed, Purpose::Init, bi as u64);
                        for v in slot.iter_mut() {
                            *v = T::of(rng.random_range(-bound..bound));
                        }
                    }
                }
            }
        }
        Ok(Self { layout, values })
    }

    pub fn from_values(dims: EncoderDims, values: Vec<T>) -> Result<Self> {
        let layout = ParamLayout::new(dims)?;
        if values.len() != layout.len() {
            return Err(Error::Integrity(format!(
                "{} parameter values for a layout of {}",
                values.len(),
                layout.len()
            )));
        }
        let params = Self { layout, values };
        if params.block(Block::BnRunningVar).iter().any(|&v| !(v > T::zero())) {
            return Err(Error::Data("batch-norm running variance must be positive".into()));
        }
        Ok(params)
    }

    pub fn dims(&self) -> &EncoderDims {
        self.layout.dims()
    }
    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
    pub fn block(&self, b: Block) -> &[T] {
        &self.values[self.layout.range(b)]
    }
    pub fn block_mut(&mut self, b: Block) -> &mut [T] {
        let r = self.layout.range(b);
        &mut self.values[r]
    }

    /// Zero vector with the same layout, for gradients and optimiser state.
    pub fn zeros_like(&self) -> Vec<T> {
        vec![T::zero(); self.values.len()]
    }

    pub fn cast<U: Real>(&self) -> EncoderParams<U> {
        EncoderParams {
            layout: self.layout.clone(),
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"EEGRCKPT";

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    version: u32,
    dtype: String,
    dims: EncoderDims,
    layout: Vec<LayoutEntry>,
    len: usize,
}

impl EncoderParams<f32> {
    /// Checkpoint: 8-byte magic, u64 LE header length, JSON header (dims and
    /// the name/offset/shape layout table), then the raw `f32` LE blob.
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let header = CheckpointHeader {
            version: 1,
            dtype: "f32le".into(),
            dims: *self.dims(),
            layout: self.layout.entries(),
            len: self.len(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + 4 * self.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Format("not an encoder checkpoint".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes
            .get(16..16 + hlen)
            .ok_or_else(|| Error::Format("truncated checkpoint header".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(body)
            .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        if header.dtype != "f32le" {
            return Err(Error::Format(format!("unsupported checkpoint dtype {}", header.dtype)));
        }
        let layout = ParamLayout::new(header.dims)?;
        if header.layout != layout.entries() || header.len != layout.len() {
            return Err(Error::Integrity("checkpoint layout table does not match its dims".into()));
        }
        let blob = &bytes[16 + hlen..];
        if blob.len() != 4 * header.len {
            return Err(Error::Integrity(format!(
                "checkpoint blob has {} bytes, expected {}",
                blob.len(),
                4 * header.len
            )));
        }
        let values = blob
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_values(header.dims, values)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("ckpt.tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&self.to_checkpoint_bytes())
            .map_err(|e| Error::io(&tmp, e))?;
        drop(f);
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes)
    }
}
