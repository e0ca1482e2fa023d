//! Fine-tuning loop: class-weighted cross-entropy, Adam, step-decay
//! learning rate, dev-loss early stopping and best-checkpoint restore.
//!
//! A run directory holds:
//!
//! ```text
//! config.txt     resolved TrainConfig, `key = value`
//! metrics.tsv    epoch, lr, train_loss, dev_loss, dev_micro_f1 (one line per epoch)
//! best/          checkpoint with the lowest dev loss
//! report.json    TrainReport
//! ```

mod config;
mod loss;
mod schedule;
mod step;

pub use config::{parse_kv, TrainConfig};
pub use loss::weighted_cross_entropy;
pub use schedule::{early_stop_check, lr_at_epoch, EarlyStopping};
pub use step::{training_step, Adam};

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use candle_core::{DType, Tensor};
use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{class_weights, ClassWeights, LabeledCorpus};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::metrics::{confusion, micro_f1, ConfusionCounts};
use crate::model::{build_model, labels_from_logits, logit_rows, ClassifierModel};
use crate::segment::TokenBatch;

pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.tsv";
pub const BEST_DIR: &str = "best";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub dev_micro_f1: f64,
}

impl EpochRecord {
    /// Tab-separated metrics-log line, shortest round-trip decimals.
    pub fn to_log_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.epoch, self.learning_rate, self.train_loss, self.dev_loss, self.dev_micro_f1
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub checkpoint_path: PathBuf,
    pub class_weights: ClassWeights,
}

impl TrainReport {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }
}

/// A finished run: the model with its best-dev-loss weights restored (in
/// evaluation mode) and the report.
#[derive(Debug)]
pub struct TrainedRun {
    pub model: ClassifierModel,
    pub report: TrainReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Class-weighted mean cross-entropy, present when the corpus is labeled.
    pub loss: Option<f64>,
    pub predictions: Vec<Label>,
    pub confusion: Option<ConfusionCounts>,
}

impl Evaluation {
    pub fn micro_f1(&self) -> Option<f64> {
        self.confusion.as_ref().and_then(|c| micro_f1(c).ok())
    }
}

/// Token ids for every snippet, truncated to `max_length`.
fn encode_corpus(
    model: &ClassifierModel,
    corpus: &LabeledCorpus,
    max_length: usize,
) -> Result<Vec<Vec<u32>>> {
    corpus
        .snippets()
        .iter()
        .map(|s| model.segmenter().encode(&s.text, max_length))
        .collect()
}

fn make_batch(
    model: &ClassifierModel,
    encoded: &[Vec<u32>],
    corpus: &LabeledCorpus,
    indices: &[usize],
) -> Result<TokenBatch> {
    let rows: Vec<&[u32]> = indices.iter().map(|&i| encoded[i].as_slice()).collect();
    let batch = TokenBatch::from_sequences(&rows, model.segmenter().pad_id())?;
    let labels: Option<Vec<Label>> = indices
        .iter()
        .map(|&i| corpus.snippets()[i].label)
        .collect();
    match labels {
        Some(labels) => batch.with_labels(&labels),
        None => Ok(batch),
    }
}

/// Evaluation-mode pass over `corpus` in order. Loss and confusion counts
/// are computed when every snippet is labeled.
pub fn evaluate(
    model: &ClassifierModel,
    corpus: &LabeledCorpus,
    weights: Option<&ClassWeights>,
    batch_size: usize,
    max_length: usize,
) -> Result<Evaluation> {
    let labeled = corpus.is_fully_labeled() && !corpus.is_empty();
    run_eval(model, corpus, weights, batch_size, max_length, labeled)
}

/// Predicted labels for every snippet, in corpus order.
pub fn predict_corpus(
    model: &ClassifierModel,
    corpus: &LabeledCorpus,
    batch_size: usize,
    max_length: usize,
) -> Result<Vec<Label>> {
    Ok(run_eval(model, corpus, None, batch_size, max_length, false)?.predictions)
}

fn run_eval(
    model: &ClassifierModel,
    corpus: &LabeledCorpus,
    weights: Option<&ClassWeights>,
    batch_size: usize,
    max_length: usize,
    with_loss: bool,
) -> Result<Evaluation> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be positive".into()));
    }
    let encoded = encode_corpus(model, corpus, max_length)?;
    let indices: Vec<usize> = (0..corpus.len()).collect();
    let mut predictions = Vec::with_capacity(corpus.len());
    let (mut num, mut den) = (0.0, 0.0);
    for chunk in indices.chunks(batch_size) {
        let batch = make_batch(model, &encoded, corpus, chunk)?;
        let logits = model.forward_eval(&batch)?;
        if with_loss {
            let labels = step::labels_tensor(&batch, model)?;
            let (n, d) = loss::weighted_nll_terms(&logits, &labels, weights)?;
            num += scalar(&n)?;
            den += scalar(&d)?;
        }
        predictions.extend(labels_from_logits(&logit_rows(&logits)?));
    }
    let (loss, confusion) = if with_loss {
        let gold = corpus.labels().expect("fully labeled");
        (Some(num / den), Some(confusion(&predictions, &gold)?))
    } else {
        (None, None)
    };
    Ok(Evaluation {
        loss,
        predictions,
        confusion,
    })
}

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

fn sum_weights(batch: &TokenBatch, weights: &ClassWeights) -> f64 {
    let table = weights.by_index();
    batch
        .labels
        .as_ref()
        .map(|ls| ls.iter().map(|&l| table[l as usize]).sum())
        .unwrap_or(0.0)
}

fn require_labeled(corpus: &LabeledCorpus, what: &str) -> Result<()> {
    if corpus.is_empty() || !corpus.is_fully_labeled() {
        return Err(Error::InvalidArgument(format!(
            "{what} corpus must be non-empty and fully labeled"
        )));
    }
    Ok(())
}

/// Fine-tunes a classifier built from `checkpoint_id` on `train`, monitoring
/// `dev`, and writes the run directory under `out_dir`.
pub fn train(
    train: &LabeledCorpus,
    dev: &LabeledCorpus,
    config: &TrainConfig,
    checkpoint_id: &str,
    out_dir: &Path,
) -> Result<TrainedRun> {
    config.validate()?;
    require_labeled(train, "training")?;
    require_labeled(dev, "dev")?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let config_path = out_dir.join(CONFIG_FILE);
    fs::write(&config_path, config.to_kv_string()).map_err(|e| Error::io(&config_path, e))?;

    let weights = if config.use_class_weights {
        class_weights(train)?
    } else {
        ClassWeights::UNIT
    };
    info!(
        "class weights (true / false): {} / {}",
        weights.weight_true, weights.weight_false
    );

    let mut model = build_model(checkpoint_id, config.dropout_rate, config.seed)?;
    let encoded = encode_corpus(&model, train, config.max_length)?;
    let mut optimizer = Adam::new(model.params().vars(), config.learning_rate)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let metrics_path = out_dir.join(METRICS_FILE);
    let mut metrics_log = File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let best_dir = out_dir.join(BEST_DIR);
    let mut monitor = EarlyStopping::new(config.patience);
    let mut best_snapshot = None;
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        let lr = lr_at_epoch(
            config.learning_rate,
            config.scheduler_factor,
            config.scheduler_step,
            epoch - 1,
        );
        optimizer.set_learning_rate(lr);
        model.set_training(true);
        order.shuffle(&mut shuffle_rng);

        let (mut num, mut den) = (0.0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let batch = make_batch(&model, &encoded, train, chunk)?;
            let loss = training_step(&mut model, &batch, Some(&weights), &mut optimizer)?;
            let w = sum_weights(&batch, &weights);
            num += loss * w;
            den += w;
        }

        model.set_training(false);
        let eval = evaluate(
            &model,
            dev,
            Some(&weights),
            config.batch_size,
            config.max_length,
        )?;
        let dev_loss = eval.loss.expect("dev corpus is labeled");
        let record = EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss: num / den,
            dev_loss,
            dev_micro_f1: eval.micro_f1().expect("dev corpus is labeled"),
        };
        info!(
            "epoch {epoch}: lr {lr:e} train_loss {:.6} dev_loss {:.6} dev_micro_f1 {:.4}",
            record.train_loss, record.dev_loss, record.dev_micro_f1
        );
        writeln!(metrics_log, "{}", record.to_log_line())
            .map_err(|e| Error::io(&metrics_path, e))?;
        epochs.push(record);

        if monitor.record(dev_loss) {
            model.save_checkpoint(&best_dir, config.max_length)?;
            best_snapshot = Some(model.params().snapshot()?);
        }
        if monitor.should_stop() {
            stopped_early = epoch < config.max_epochs;
            if stopped_early {
                info!("early stop after epoch {epoch}");
            }
            break;
        }
    }

    let best_epoch = monitor.best_epoch().expect("at least one epoch ran");
    match &best_snapshot {
        Some(snapshot) => model.params().restore(snapshot)?,
        None => {
            // Every dev loss was NaN; keep the final weights as the checkpoint.
            model.save_checkpoint(&best_dir, config.max_length)?;
        }
    }
    model.set_training(false);

    let report = TrainReport {
        epochs,
        best_epoch,
        stopped_early,
        checkpoint_path: best_dir,
        class_weights: weights,
    };
    let report_path = out_dir.join(REPORT_FILE);
    let mut body = serde_json::to_string_pretty(&report)?;
    body.push('\n');
    fs::write(&report_path, body).map_err(|e| Error::io(&report_path, e))?;
    Ok(TrainedRun { model, report })
}
