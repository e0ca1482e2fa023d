//! Transformer text encoder in the RoBERTa / XLM-RoBERTa layout.
//!
//! Parameter names follow the Hugging Face serialization
//! (`embeddings.word_embeddings.weight`, `encoder.layer.0.attention.self.query.weight`, ...)
//! so pretrained safetensors checkpoints load without renaming.

use std::collections::{BTreeMap, HashMap};

use candle_core::{DType, Device, Tensor, Var, D};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Additive attention bias for masked key positions. Large enough that the
/// softmax weight underflows to exactly zero in both f32 and f64.
const MASK_BIAS: f64 = -1e9;

/// Architecture hyperparameters. Field names match the Hugging Face
/// `config.json` so that file can be deserialized directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub intermediate_size: usize,
    pub max_position_embeddings: usize,
    #[serde(default = "default_type_vocab_size")]
    pub type_vocab_size: usize,
    #[serde(default = "default_layer_norm_eps")]
    pub layer_norm_eps: f64,
    #[serde(default = "default_pad_token_id")]
    pub pad_token_id: u32,
    #[serde(default = "default_initializer_range")]
    pub initializer_range: f64,
}

fn default_type_vocab_size() -> usize {
    1
}
fn default_layer_norm_eps() -> f64 {
    1e-5
}
fn default_pad_token_id() -> u32 {
    1
}
fn default_initializer_range() -> f64 {
    0.02
}

impl EncoderConfig {
    /// 2 layers, width 32, 4 heads, 1,000-entry vocabulary.
    pub fn tiny() -> Self {
        Self {
            vocab_size: 1000,
            hidden_size: 32,
            num_hidden_layers: 2,
            num_attention_heads: 4,
            intermediate_size: 128,
            max_position_embeddings: 514,
            type_vocab_size: 1,
            layer_norm_eps: 1e-5,
            pad_token_id: 1,
            initializer_range: 0.02,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_attention_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0
            || self.num_attention_heads == 0
            || self.hidden_size % self.num_attention_heads != 0
        {
            return Err(Error::Config(format!(
                "hidden_size {} is not divisible into {} heads",
                self.hidden_size, self.num_attention_heads
            )));
        }
        if self.max_position_embeddings <= self.pad_token_id as usize + 2 {
            return Err(Error::Config("max_position_embeddings too small".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Init {
    Normal(f64),
    Zeros,
    Ones,
}

/// Where parameter values come from while a model is being assembled.
pub(crate) enum ParamSource {
    Random(Box<ChaCha8Rng>),
    Loaded(HashMap<String, Tensor>),
}

impl ParamSource {
    pub(crate) fn random(seed: u64) -> Self {
        Self::Random(Box::new(ChaCha8Rng::seed_from_u64(seed)))
    }

    /// Accepts both bare (`embeddings.*`) and task-model (`roberta.embeddings.*`)
    /// key layouts.
    pub(crate) fn loaded(tensors: HashMap<String, Tensor>) -> Self {
        let tensors = tensors
            .into_iter()
            .map(|(k, v)| match k.strip_prefix("roberta.") {
                Some(rest) => (rest.to_string(), v),
                None => (k, v),
            })
            .collect();
        Self::Loaded(tensors)
    }
}

/// Named trainable parameters, kept in name order.
#[derive(Debug, Clone)]
pub struct ParamStore {
    vars: BTreeMap<String, Var>,
    dtype: DType,
    device: Device,
}

impl ParamStore {
    pub(crate) fn new(dtype: DType, device: Device) -> Self {
        Self {
            vars: BTreeMap::new(),
            dtype,
            device,
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }

    pub fn vars(&self) -> Vec<Var> {
        self.vars.values().cloned().collect()
    }

    pub(crate) fn take(
        &mut self,
        source: &mut ParamSource,
        name: &str,
        shape: &[usize],
        init: Init,
    ) -> Result<Tensor> {
        let tensor = match source {
            ParamSource::Loaded(map) => {
                let t = map.remove(name).ok_or_else(|| {
                    Error::Config(format!("checkpoint is missing parameter {name}"))
                })?;
                if t.dims() != shape {
                    return Err(Error::Config(format!(
                        "parameter {name} has shape {:?}, expected {shape:?}",
                        t.dims()
                    )));
                }
                t.to_dtype(self.dtype)?.to_device(&self.device)?
            }
            ParamSource::Random(rng) => {
                let n: usize = shape.iter().product();
                let values: Vec<f64> = match init {
                    Init::Zeros => vec![0.0; n],
                    Init::Ones => vec![1.0; n],
                    Init::Normal(std) => {
                        let dist = Normal::new(0.0, std).expect("std is positive");
                        (0..n).map(|_| dist.sample(rng)).collect()
                    }
                };
                Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?
            }
        };
        let var = Var::from_tensor(&tensor)?;
        let handle = var.as_tensor().clone();
        self.vars.insert(name.to_string(), var);
        Ok(handle)
    }

    /// Copies of every parameter value, detached from the graph.
    pub fn snapshot(&self) -> Result<BTreeMap<String, Tensor>> {
        self.vars
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.as_tensor().detach().copy()?)))
            .collect()
    }

    pub fn restore(&self, snapshot: &BTreeMap<String, Tensor>) -> Result<()> {
        for (name, var) in &self.vars {
            let value = snapshot
                .get(name)
                .ok_or_else(|| Error::Config(format!("snapshot is missing {name}")))?;
            var.set(value)?;
        }
        Ok(())
    }

    /// Parameter tensors whose names start with `prefix`, keyed by full name.
    pub fn tensors_with_prefix(&self, prefix: &str) -> HashMap<String, Tensor> {
        self.vars
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.clone(), v.as_tensor().detach()))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Linear {
    weight: Tensor,
    bias: Tensor,
}

impl Linear {
    pub(crate) fn new(
        store: &mut ParamStore,
        source: &mut ParamSource,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
        std: f64,
    ) -> Result<Self> {
        let weight = store.take(
            source,
            &format!("{prefix}.weight"),
            &[out_dim, in_dim],
            Init::Normal(std),
        )?;
        let bias = store.take(source, &format!("{prefix}.bias"), &[out_dim], Init::Zeros)?;
        Ok(Self { weight, bias })
    }

    pub(crate) fn forward(&self, xs: &Tensor) -> Result<Tensor> {
        Ok(xs
            .broadcast_matmul(&self.weight.t()?)?
            .broadcast_add(&self.bias)?)
    }
}

#[derive(Debug, Clone)]
struct LayerNorm {
    weight: Tensor,
    bias: Tensor,
    eps: f64,
}

impl LayerNorm {
    fn new(
        store: &mut ParamStore,
        source: &mut ParamSource,
        prefix: &str,
        dim: usize,
        eps: f64,
    ) -> Result<Self> {
        let weight = store.take(source, &format!("{prefix}.weight"), &[dim], Init::Ones)?;
        let bias = store.take(source, &format!("{prefix}.bias"), &[dim], Init::Zeros)?;
        Ok(Self { weight, bias, eps })
    }

    fn forward(&self, xs: &Tensor) -> Result<Tensor> {
        let mean = xs.mean_keepdim(D::Minus1)?;
        let centered = xs.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centered.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(normed
            .broadcast_mul(&self.weight)?
            .broadcast_add(&self.bias)?)
    }
}

#[derive(Debug, Clone)]
struct Embeddings {
    word: Tensor,
    position: Tensor,
    token_type: Tensor,
    norm: LayerNorm,
}

#[derive(Debug, Clone)]
struct Layer {
    query: Linear,
    key: Linear,
    value: Linear,
    attn_out: Linear,
    attn_norm: LayerNorm,
    intermediate: Linear,
    output: Linear,
    out_norm: LayerNorm,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    config: EncoderConfig,
    embeddings: Embeddings,
    layers: Vec<Layer>,
}

impl Encoder {
    pub(crate) fn new(
        config: &EncoderConfig,
        store: &mut ParamStore,
        source: &mut ParamSource,
    ) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_size;
        let std = config.initializer_range;
        let eps = config.layer_norm_eps;
        let embeddings = Embeddings {
            word: store.take(
                source,
                "embeddings.word_embeddings.weight",
                &[config.vocab_size, h],
                Init::Normal(std),
            )?,
            position: store.take(
                source,
                "embeddings.position_embeddings.weight",
                &[config.max_position_embeddings, h],
                Init::Normal(std),
            )?,
            token_type: store.take(
                source,
                "embeddings.token_type_embeddings.weight",
                &[config.type_vocab_size, h],
                Init::Normal(std),
            )?,
            norm: LayerNorm::new(store, source, "embeddings.LayerNorm", h, eps)?,
        };
        let layers = (0..config.num_hidden_layers)
            .map(|i| {
                let p = format!("encoder.layer.{i}");
                Ok(Layer {
                    query: Linear::new(
                        store,
                        source,
                        &format!("{p}.attention.self.query"),
                        h,
                        h,
                        std,
                    )?,
                    key: Linear::new(store, source, &format!("{p}.attention.self.key"), h, h, std)?,
                    value: Linear::new(
                        store,
                        source,
                        &format!("{p}.attention.self.value"),
                        h,
                        h,
                        std,
                    )?,
                    attn_out: Linear::new(
                        store,
                        source,
                        &format!("{p}.attention.output.dense"),
                        h,
                        h,
                        std,
                    )?,
                    attn_norm: LayerNorm::new(
                        store,
                        source,
                        &format!("{p}.attention.output.LayerNorm"),
                        h,
                        eps,
                    )?,
                    intermediate: Linear::new(
                        store,
                        source,
                        &format!("{p}.intermediate.dense"),
                        h,
                        config.intermediate_size,
                        std,
                    )?,
                    output: Linear::new(
                        store,
                        source,
                        &format!("{p}.output.dense"),
                        config.intermediate_size,
                        h,
                        std,
                    )?,
                    out_norm: LayerNorm::new(
                        store,
                        source,
                        &format!("{p}.output.LayerNorm"),
                        h,
                        eps,
                    )?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            embeddings,
            layers,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// Position ids count real tokens only, starting after the padding id,
    /// so trailing padding never shifts the positions of real tokens.
    fn position_ids(&self, mask: &[u8], batch: usize, seq_len: usize) -> Result<Vec<u32>> {
        let pad = self.config.pad_token_id;
        let mut out = Vec::with_capacity(mask.len());
        for row in mask.chunks(seq_len).take(batch) {
            let mut count = 0u32;
            for &m in row {
                if m == 1 {
                    count += 1;
                    out.push(pad + count);
                } else {
                    out.push(pad);
                }
            }
        }
        if out
            .iter()
            .any(|&p| p as usize >= self.config.max_position_embeddings)
        {
            return Err(Error::InvalidArgument(format!(
                "sequence longer than the encoder's {} positions",
                self.config.max_position_embeddings - pad as usize - 1
            )));
        }
        Ok(out)
    }

    /// Hidden states `[batch, seq_len, hidden]`.
    pub fn forward(
        &self,
        token_ids: &[u32],
        mask: &[u8],
        batch: usize,
        seq_len: usize,
    ) -> Result<Tensor> {
        let device = self.embeddings.word.device();
        let dtype = self.embeddings.word.dtype();
        let h = self.config.hidden_size;
        if let Some(&bad) = token_ids
            .iter()
            .find(|&&t| t as usize >= self.config.vocab_size)
        {
            return Err(Error::InvalidArgument(format!(
                "token id {bad} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }

        let ids = Tensor::from_slice(token_ids, batch * seq_len, device)?;
        let positions = self.position_ids(mask, batch, seq_len)?;
        let positions = Tensor::from_vec(positions, batch * seq_len, device)?;
        let emb = self
            .embeddings
            .word
            .index_select(&ids, 0)?
            .add(&self.embeddings.position.index_select(&positions, 0)?)?
            .broadcast_add(&self.embeddings.token_type.narrow(0, 0, 1)?)?
            .reshape((batch, seq_len, h))?;
        let mut xs = self.embeddings.norm.forward(&emb)?;

        let mask_f: Vec<f64> = mask
            .iter()
            .map(|&m| if m == 1 { 0.0 } else { MASK_BIAS })
            .collect();
        let bias = Tensor::from_vec(mask_f, (batch, 1, 1, seq_len), device)?.to_dtype(dtype)?;

        for layer in &self.layers {
            xs = self.layer_forward(layer, &xs, &bias, batch, seq_len)?;
        }
        Ok(xs)
    }

    fn layer_forward(
        &self,
        layer: &Layer,
        xs: &Tensor,
        bias: &Tensor,
        batch: usize,
        seq_len: usize,
    ) -> Result<Tensor> {
        let heads = self.config.num_attention_heads;
        let hd = self.config.head_dim();
        let split = |t: Tensor| -> Result<Tensor> {
            Ok(t.reshape((batch, seq_len, heads, hd))?
                .transpose(1, 2)?
                .contiguous()?)
        };
        let q = split(layer.query.forward(xs)?)?;
        let k = split(layer.key.forward(xs)?)?;
        let v = split(layer.value.forward(xs)?)?;

        let scores =
            (q.matmul(&k.t()?.contiguous()?)? / (hd as f64).sqrt())?.broadcast_add(bias)?;
        let probs = candle_nn::ops::softmax(&scores, D::Minus1)?;
        let ctx = probs.matmul(&v)?.transpose(1, 2)?.contiguous()?.reshape((
            batch,
            seq_len,
            self.config.hidden_size,
        ))?;
        let attn = layer
            .attn_norm
            .forward(&(layer.attn_out.forward(&ctx)? + xs)?)?;

        let inner = layer.intermediate.forward(&attn)?.gelu_erf()?;
        layer
            .out_norm
            .forward(&(layer.output.forward(&inner)? + attn)?)
    }
}
