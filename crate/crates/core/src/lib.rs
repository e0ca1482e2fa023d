//! Binary persuasion-technique detection by fine-tuning a multilingual
//! transformer encoder.
//!
//! The pipeline: [`corpus`] loads and splits JSONL snippet files,
//! [`segment`] turns text into padded token batches, [`model`] wraps the
//! [`encoder`] with a dropout + two-way head, [`trainer`] runs the
//! class-weighted fine-tuning loop and [`metrics`] scores predictions.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod label;
pub mod metrics;
pub mod model;
pub mod segment;
pub mod synthetic;
pub mod trainer;

pub use corpus::{
    class_weights, label_distribution, load_corpus, stratified_split, ClassWeights, Genre,
    LabelDistribution, LabeledCorpus, Snippet,
};
pub use error::{Error, Result};
pub use label::{Label, PerLabel};
pub use metrics::{binary_f1, confusion, micro_f1, per_class_f1, ConfusionCounts, PerClassReport};
pub use model::{build_model, load_checkpoint, load_segmenter, ClassifierModel, TINY_RANDOM};
pub use segment::{encode_batch, Segmenter, TokenBatch};
pub use trainer::{
    early_stop_check, evaluate, lr_at_epoch, predict_corpus, train, training_step,
    weighted_cross_entropy, Adam, TrainConfig, TrainReport, TrainedRun,
};
