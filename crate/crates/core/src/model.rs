//! Sequence classifier: pretrained encoder, first-token pooling, dropout
//! and a two-way linear head.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{Encoder, EncoderConfig, Linear, ParamSource, ParamStore};
use crate::error::{Error, Result};
use crate::label::{Label, LABEL_ENCODING};
use crate::segment::{Segmenter, TokenBatch};

/// Reserved checkpoint id for the small randomly initialized encoder.
pub const TINY_RANDOM: &str = "tiny-random";

/// Default pretrained checkpoint for real runs.
pub const DEFAULT_CHECKPOINT: &str = "xlm-roberta-base";

/// Directory searched for bare checkpoint ids (`$CACHE/<id>/`).
pub const CHECKPOINT_CACHE_ENV: &str = "PERSUASION_CHECKPOINT_CACHE";

/// The tiny encoder's weights are a fixed function of this seed, so it
/// behaves like a checkpoint: only the head depends on the run seed.
const TINY_ENCODER_SEED: u64 = 0x7417;

const NUM_LABELS: usize = 2;
const HEAD_PREFIX: &str = "classifier";
const METADATA_FILE: &str = "metadata.json";
const ENCODER_CONFIG_FILE: &str = "encoder_config.json";
const ENCODER_WEIGHTS_FILE: &str = "encoder.safetensors";
const HEAD_WEIGHTS_FILE: &str = "head.safetensors";
const FORMAT_VERSION: u32 = 1;

/// Metadata written next to fine-tuned weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetadata {
    pub format_version: u32,
    pub label_encoding: String,
    pub base_checkpoint: String,
    pub max_length: usize,
    pub dropout_rate: f64,
    pub dtype: String,
}

pub struct ClassifierModel {
    base_checkpoint: String,
    encoder: Encoder,
    head: Linear,
    params: ParamStore,
    segmenter: Segmenter,
    dropout_rate: f64,
    dropout_rng: ChaCha8Rng,
    training: bool,
}

impl std::fmt::Debug for ClassifierModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClassifierModel")
            .field("base_checkpoint", &self.base_checkpoint)
            .field("encoder", self.encoder.config())
            .field("dropout_rate", &self.dropout_rate)
            .field("training", &self.training)
            .finish()
    }
}

fn check_dropout(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "dropout_rate must lie in [0, 1), got {rate}"
        )))
    }
}

fn dtype_name(dtype: DType) -> &'static str {
    match dtype {
        DType::F64 => "f64",
        DType::F16 => "f16",
        DType::BF16 => "bf16",
        _ => "f32",
    }
}

fn parse_dtype(name: &str) -> Result<DType> {
    match name {
        "f64" => Ok(DType::F64),
        "f32" => Ok(DType::F32),
        other => Err(Error::Config(format!("unsupported dtype {other:?}"))),
    }
}

/// Finds the directory holding a pretrained encoder for `checkpoint_id`:
/// the id itself if it is a directory, otherwise `$PERSUASION_CHECKPOINT_CACHE/<id>`.
pub fn resolve_checkpoint_dir(checkpoint_id: &str) -> Result<PathBuf> {
    let direct = PathBuf::from(checkpoint_id);
    if direct.is_dir() {
        return Ok(direct);
    }
    if let Some(cache) = std::env::var_os(CHECKPOINT_CACHE_ENV) {
        let cached = Path::new(&cache).join(checkpoint_id);
        if cached.is_dir() {
            return Ok(cached);
        }
    }
    Err(Error::checkpoint(
        checkpoint_id,
        format!("not a directory and not found under ${CHECKPOINT_CACHE_ENV}"),
    ))
}

/// The segmenter bundled with `checkpoint_id`, without loading weights.
pub fn load_segmenter(checkpoint_id: &str) -> Result<Segmenter> {
    if checkpoint_id == TINY_RANDOM {
        return Ok(Segmenter::tiny());
    }
    Segmenter::load(&resolve_checkpoint_dir(checkpoint_id)?)
}

fn load_safetensors(path: &Path) -> Result<HashMap<String, Tensor>> {
    if !path.is_file() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "missing weights file"),
        ));
    }
    Ok(candle_core::safetensors::load(path, &Device::Cpu)?)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&body)?)
}

/// Assembles a classifier: encoder weights from `checkpoint_id`, a freshly
/// initialized head seeded by `seed`, model in training mode.
pub fn build_model(checkpoint_id: &str, dropout_rate: f64, seed: u64) -> Result<ClassifierModel> {
    check_dropout(dropout_rate)?;
    let (config, segmenter, mut source, dtype) = if checkpoint_id == TINY_RANDOM {
        (
            EncoderConfig::tiny(),
            Segmenter::tiny(),
            ParamSource::random(TINY_ENCODER_SEED),
            DType::F64,
        )
    } else {
        let dir = resolve_checkpoint_dir(checkpoint_id)?;
        let config: EncoderConfig = read_json(&dir.join("config.json"))
            .map_err(|e| Error::checkpoint(checkpoint_id, e.to_string()))?;
        let segmenter = Segmenter::load(&dir)?;
        let weights = load_safetensors(&dir.join("model.safetensors"))?;
        (config, segmenter, ParamSource::loaded(weights), DType::F32)
    };
    if segmenter.vocab_size() > config.vocab_size {
        return Err(Error::checkpoint(
            checkpoint_id,
            "tokenizer vocabulary larger than the embedding table",
        ));
    }
    let mut params = ParamStore::new(dtype, Device::Cpu);
    let encoder = Encoder::new(&config, &mut params, &mut source)?;
    let mut head_source = ParamSource::random(seed);
    let head = Linear::new(
        &mut params,
        &mut head_source,
        HEAD_PREFIX,
        config.hidden_size,
        NUM_LABELS,
        config.initializer_range,
    )?;
    Ok(ClassifierModel {
        base_checkpoint: checkpoint_id.to_string(),
        encoder,
        head,
        params,
        segmenter,
        dropout_rate,
        dropout_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d40f),
        training: true,
    })
}

impl ClassifierModel {
    pub fn segmenter(&self) -> &Segmenter {
        &self.segmenter
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn base_checkpoint(&self) -> &str {
        &self.base_checkpoint
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn set_training(&mut self, training: bool) {
        self.training = training;
    }

    /// The head's (weight `[2, hidden]`, bias `[2]`) parameters.
    pub fn head_vars(&self) -> (&Var, &Var) {
        let w = self
            .params
            .get("classifier.weight")
            .expect("head weight registered");
        let b = self
            .params
            .get("classifier.bias")
            .expect("head bias registered");
        (w, b)
    }

    fn pooled(&self, batch: &TokenBatch) -> Result<Tensor> {
        batch.validate()?;
        let hidden = self.encoder.forward(
            &batch.token_ids,
            &batch.attention_mask,
            batch.batch_size,
            batch.seq_len,
        )?;
        Ok(hidden.narrow(1, 0, 1)?.squeeze(1)?)
    }

    /// Logits `[batch, 2]` with dropout disabled. Deterministic.
    pub fn forward_eval(&self, batch: &TokenBatch) -> Result<Tensor> {
        let pooled = self.pooled(batch)?;
        self.head.forward(&pooled)
    }

    /// Logits `[batch, 2]`; dropout on the pooled representation when
    /// `training` is set.
    pub fn forward(&mut self, batch: &TokenBatch, training: bool) -> Result<Tensor> {
        if !training {
            return self.forward_eval(batch);
        }
        let pooled = self.pooled(batch)?;
        let pooled = self.dropout(&pooled)?;
        self.head.forward(&pooled)
    }

    fn dropout(&mut self, xs: &Tensor) -> Result<Tensor> {
        let p = self.dropout_rate;
        if p == 0.0 {
            return Ok(xs.clone());
        }
        let keep_scale = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..xs.elem_count())
            .map(|_| {
                if self.dropout_rng.random::<f64>() < p {
                    0.0
                } else {
                    keep_scale
                }
            })
            .collect();
        let mask = Tensor::from_vec(mask, xs.shape(), xs.device())?.to_dtype(xs.dtype())?;
        Ok(xs.mul(&mask)?)
    }

    /// Logits as host rows.
    pub fn logits_eval(&self, batch: &TokenBatch) -> Result<Vec<[f64; 2]>> {
        logit_rows(&self.forward_eval(batch)?)
    }

    /// Argmax label per row, ties resolved to `false`.
    pub fn predict_labels(&self, batch: &TokenBatch) -> Result<Vec<Label>> {
        Ok(labels_from_logits(&self.logits_eval(batch)?))
    }

    /// Writes encoder and head weights, vocabulary, encoder config and
    /// metadata into `dir`.
    pub fn save_checkpoint(&self, dir: &Path, max_length: usize) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut encoder_weights = self.params.tensors_with_prefix("embeddings.");
        encoder_weights.extend(self.params.tensors_with_prefix("encoder."));
        candle_core::safetensors::save(&encoder_weights, dir.join(ENCODER_WEIGHTS_FILE))?;
        let head_weights = self.params.tensors_with_prefix(&format!("{HEAD_PREFIX}."));
        candle_core::safetensors::save(&head_weights, dir.join(HEAD_WEIGHTS_FILE))?;
        self.segmenter.save(dir)?;
        write_json(&dir.join(ENCODER_CONFIG_FILE), self.encoder.config())?;
        let metadata = CheckpointMetadata {
            format_version: FORMAT_VERSION,
            label_encoding: LABEL_ENCODING.to_string(),
            base_checkpoint: self.base_checkpoint.clone(),
            max_length,
            dropout_rate: self.dropout_rate,
            dtype: dtype_name(self.params.dtype()).to_string(),
        };
        write_json(&dir.join(METADATA_FILE), &metadata)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint written by [`ClassifierModel::save_checkpoint`].
/// The model comes back in evaluation mode.
pub fn load_checkpoint(dir: &Path) -> Result<(ClassifierModel, CheckpointMetadata)> {
    let id = dir.display().to_string();
    let metadata: CheckpointMetadata = read_json(&dir.join(METADATA_FILE))
        .map_err(|e| Error::checkpoint(&id, format!("unreadable metadata: {e}")))?;
    if metadata.format_version != FORMAT_VERSION {
        return Err(Error::checkpoint(
            &id,
            format!("unsupported format version {}", metadata.format_version),
        ));
    }
    if metadata.label_encoding != LABEL_ENCODING {
        return Err(Error::checkpoint(
            &id,
            format!("unknown label encoding {:?}", metadata.label_encoding),
        ));
    }
    check_dropout(metadata.dropout_rate)?;
    let dtype = parse_dtype(&metadata.dtype)?;
    let config: EncoderConfig = read_json(&dir.join(ENCODER_CONFIG_FILE))?;
    let segmenter = Segmenter::load(dir)?;
    let mut weights = load_safetensors(&dir.join(ENCODER_WEIGHTS_FILE))?;
    weights.extend(load_safetensors(&dir.join(HEAD_WEIGHTS_FILE))?);
    let mut source = ParamSource::loaded(weights);
    let mut params = ParamStore::new(dtype, Device::Cpu);
    let encoder = Encoder::new(&config, &mut params, &mut source)?;
    let head = Linear::new(
        &mut params,
        &mut source,
        HEAD_PREFIX,
        config.hidden_size,
        NUM_LABELS,
        config.initializer_range,
    )?;
    let model = ClassifierModel {
        base_checkpoint: metadata.base_checkpoint.clone(),
        encoder,
        head,
        params,
        segmenter,
        dropout_rate: metadata.dropout_rate,
        dropout_rng: ChaCha8Rng::seed_from_u64(0),
        training: false,
    };
    Ok((model, metadata))
}

pub fn logit_rows(logits: &Tensor) -> Result<Vec<[f64; 2]>> {
    let rows: Vec<Vec<f64>> = logits.to_dtype(DType::F64)?.to_vec2()?;
    rows.into_iter()
        .map(|r| match r.as_slice() {
            [a, b] => Ok([*a, *b]),
            _ => Err(Error::InvalidArgument(format!(
                "expected 2 logits per row, got {}",
                r.len()
            ))),
        })
        .collect()
}

/// `true` only when its logit is strictly larger.
pub fn label_from_logits(row: [f64; 2]) -> Label {
    if row[Label::True.index()] > row[Label::False.index()] {
        Label::True
    } else {
        Label::False
    }
}

pub fn labels_from_logits(rows: &[[f64; 2]]) -> Vec<Label> {
    rows.iter().copied().map(label_from_logits).collect()
}
