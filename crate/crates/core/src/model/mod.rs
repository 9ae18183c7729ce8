//! Tiny pre-norm transformer decoder with a hand-written backward pass.
//!
//! All weights live in one flat `f64` buffer; [`Layout`] names the tensors and
//! fixes their order, which is also the checkpoint order.

mod checkpoint;
mod forward;
mod sampling;

use std::sync::Arc;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use forward::{
    forward, loss_and_gradients, sequence_logprob, Activations, LogProbTable, SequenceExample,
};
pub use sampling::{sample_next, GREEDY_TEMPERATURE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub context_length: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub embed_dim: usize,
    pub mlp_dim: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: crate::vocab::VOCAB_SIZE,
            context_length: 200,
            num_layers: 2,
            num_heads: 4,
            embed_dim: 32,
            mlp_dim: 128,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("context_length", self.context_length),
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("embed_dim", self.embed_dim),
            ("mlp_dim", self.mlp_dim),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if !self.embed_dim.is_multiple_of(self.num_heads) {
            return Err(Error::InvalidConfig(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    pub fn parameter_count(&self) -> usize {
        Layout::new(self).total
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Offsets of one transformer block's tensors.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BlockOffsets {
    pub ln1_gain: usize,
    pub ln1_bias: usize,
    pub qkv_weight: usize,
    pub qkv_bias: usize,
    pub out_weight: usize,
    pub out_bias: usize,
    pub ln2_gain: usize,
    pub ln2_bias: usize,
    pub fc_weight: usize,
    pub fc_bias: usize,
    pub proj_weight: usize,
    pub proj_bias: usize,
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub tensors: Vec<TensorSpec>,
    pub total: usize,
    pub(crate) tok_emb: usize,
    pub(crate) pos_emb: usize,
    pub(crate) blocks: Vec<BlockOffsets>,
    pub(crate) lnf_gain: usize,
    pub(crate) lnf_bias: usize,
    pub(crate) head_weight: usize,
    pub(crate) head_bias: usize,
}

impl Layout {
    pub fn new(c: &ModelConfig) -> Self {
        let (v, t, d, m) = (c.vocab_size, c.context_length, c.embed_dim, c.mlp_dim);
        let mut tensors = Vec::new();
        let mut total = 0;
        let mut add = |name: String, shape: Vec<usize>| {
            let offset = total;
            total += shape.iter().product::<usize>();
            tensors.push(TensorSpec { name, shape, offset });
            offset
        };
        let tok_emb = add("tok_emb".into(), vec![v, d]);
        let pos_emb = add("pos_emb".into(), vec![t, d]);
        let blocks = (0..c.num_layers)
            .map(|l| {
                let p = format!("layers.{l}");
                BlockOffsets {
                    ln1_gain: add(format!("{p}.ln1.gain"), vec![d]),
                    ln1_bias: add(format!("{p}.ln1.bias"), vec![d]),
                    qkv_weight: add(format!("{p}.attn.qkv.weight"), vec![d, 3 * d]),
                    qkv_bias: add(format!("{p}.attn.qkv.bias"), vec![3 * d]),
                    out_weight: add(format!("{p}.attn.out.weight"), vec![d, d]),
                    out_bias: add(format!("{p}.attn.out.bias"), vec![d]),
                    ln2_gain: add(format!("{p}.ln2.gain"), vec![d]),
                    ln2_bias: add(format!("{p}.ln2.bias"), vec![d]),
                    fc_weight: add(format!("{p}.mlp.fc.weight"), vec![d, m]),
                    fc_bias: add(format!("{p}.mlp.fc.bias"), vec![m]),
                    proj_weight: add(format!("{p}.mlp.proj.weight"), vec![m, d]),
                    proj_bias: add(format!("{p}.mlp.proj.bias"), vec![d]),
                }
            })
            .collect();
        let lnf_gain = add("final_ln.gain".into(), vec![d]);
        let lnf_bias = add("final_ln.bias".into(), vec![d]);
        let head_weight = add("head.weight".into(), vec![d, v]);
        let head_bias = add("head.bias".into(), vec![v]);
        Layout {
            tensors,
            total,
            tok_emb,
            pos_emb,
            blocks,
            lnf_gain,
            lnf_bias,
            head_weight,
            head_bias,
        }
    }
}

/// Model weights (or a gradient with the same named structure).
#[derive(Debug, Clone)]
pub struct Parameters {
    config: ModelConfig,
    layout: Arc<Layout>,
    data: Vec<f64>,
}

impl PartialEq for Parameters {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.data == other.data
    }
}

pub type Gradients = Parameters;

impl Parameters {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config);
        let data = vec![0.0; layout.total];
        Ok(Parameters { config: *config, layout: Arc::new(layout), data })
    }

    pub fn zeros_like(&self) -> Self {
        Parameters {
            config: self.config,
            layout: Arc::clone(&self.layout),
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let spec = self.layout.tensors.iter().find(|t| t.name == name)?;
        Some(&self.data[spec.offset..spec.offset + spec.len()])
    }

    pub fn named_tensors(&self) -> impl Iterator<Item = (&TensorSpec, &[f64])> {
        self.layout
            .tensors
            .iter()
            .map(|t| (t, &self.data[t.offset..t.offset + t.len()]))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Parameters, scale: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub(crate) fn from_parts(config: ModelConfig, data: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if layout.total != data.len() {
            return Err(Error::InvalidCheckpoint(format!(
                "expected {} weights, found {}",
                layout.total,
                data.len()
            )));
        }
        Ok(Parameters { config, layout: Arc::new(layout), data })
    }
}

/// Gaussian initialization: fan-in scaled matrices, residual projections shrunk
/// by `1/sqrt(2L)`, unit normalization gains, zero biases.
pub fn init_params(config: &ModelConfig) -> Result<Parameters> {
    let mut p = Parameters::zeros(config)?;
    let layout = Arc::clone(&p.layout);
    let mut rng = rng::stream(config.seed, Domain::Init, &[]);
    let d = config.embed_dim as f64;
    let m = config.mlp_dim as f64;
    let residual = 1.0 / (2.0 * config.num_layers as f64).sqrt();
    for spec in &layout.tensors {
        let name = spec.name.as_str();
        let slot = &mut p.data[spec.offset..spec.offset + spec.len()];
        let std = if name.ends_with(".gain") {
            slot.fill(1.0);
            continue;
        } else if name.ends_with(".bias") {
            continue;
        } else if name.ends_with("emb") {
            0.1
        } else if name == "head.weight" {
            0.02
        } else if name.ends_with("attn.out.weight") {
            residual / d.sqrt()
        } else if name.ends_with("mlp.proj.weight") {
            residual / m.sqrt()
        } else {
            1.0 / d.sqrt()
        };
        let normal = Normal::new(0.0, std).expect("positive std");
        for x in slot.iter_mut() {
            *x = normal.sample(&mut rng);
        }
    }
    Ok(p)
}
