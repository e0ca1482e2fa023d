//! The `train`, `predict`, `score`, `inspect` and `baseline` commands.
//!
//! Each command returns its printable report so callers (the binary, tests)
//! decide where it goes.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use persuasion_core::corpus::{class_weights, label_distribution, load_corpus, LabeledCorpus};
use persuasion_core::metrics::{binary_f1, confusion, micro_f1, per_class_f1};
use persuasion_core::model::load_segmenter;
use persuasion_core::{
    load_checkpoint, predict_corpus, stratified_split, train, ConfusionCounts, Label,
    PerClassReport, TrainReport,
};

use crate::error::CliError;
use crate::predictions::PredictionFile;
use crate::settings::{resolve_config, ResolvedConfig};

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub train_path: PathBuf,
    pub out_dir: PathBuf,
    pub checkpoint: String,
    pub config_file: Option<PathBuf>,
    /// `(key, value)` overrides from flags, applied after the config file.
    pub overrides: Vec<(&'static str, String)>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub resolved: ResolvedConfig,
    pub report: TrainReport,
    pub summary: String,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutcome, CliError> {
    let resolved = resolve_config(args.config_file.as_deref(), &args.overrides)?;
    for notice in &resolved.notices {
        info!("{notice}");
    }
    let config = &resolved.config;
    let corpus = load_corpus(&args.train_path, true)?;
    let (train_split, dev_split) = stratified_split(&corpus, config.dev_fraction, config.seed)?;
    info!(
        "split {}: {} train / {} dev",
        args.train_path.display(),
        train_split.len(),
        dev_split.len()
    );
    let run = train(
        &train_split,
        &dev_split,
        config,
        &args.checkpoint,
        &args.out_dir,
    )?;
    let report = run.report;
    let best = report.best();
    let summary = format!(
        "dev micro-F1: {:.4} (best epoch {} of {}{})\ncheckpoint: {}\n",
        best.dev_micro_f1,
        report.best_epoch,
        report.epochs.len(),
        if report.stopped_early {
            ", stopped early"
        } else {
            ""
        },
        report.checkpoint_path.display()
    );
    Ok(TrainOutcome {
        resolved,
        report,
        summary,
    })
}

/// Writes one prediction per snippet of `input_path`. Returns the number
/// of rows written.
pub fn cmd_predict(
    checkpoint_dir: &Path,
    input_path: &Path,
    output_path: &Path,
    batch_size: usize,
) -> Result<usize, CliError> {
    let (model, metadata) = load_checkpoint(checkpoint_dir)?;
    let corpus = load_corpus(input_path, false)?;
    let labels = if corpus.is_empty() {
        Vec::new()
    } else {
        predict_corpus(&model, &corpus, batch_size, metadata.max_length)?
    };
    write_predictions(&corpus, labels, output_path)
}

fn write_predictions(
    corpus: &LabeledCorpus,
    labels: Vec<Label>,
    output_path: &Path,
) -> Result<usize, CliError> {
    let rows: Vec<(String, Label)> = corpus
        .snippets()
        .iter()
        .map(|s| s.id.clone())
        .zip(labels)
        .collect();
    let file = PredictionFile::new(rows)?;
    file.write(output_path)?;
    Ok(file.rows.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub confusion: ConfusionCounts,
    pub micro_f1: f64,
    pub binary_f1: f64,
    pub per_class: PerClassReport,
}

impl ScoreReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "examples: {}", self.confusion.n);
        let _ = writeln!(out, "micro-F1 (both classes): {:.4}", self.micro_f1);
        let _ = writeln!(out, "binary F1 (positive = true): {:.4}", self.binary_f1);
        let _ = writeln!(out, "macro-F1: {:.4}", self.per_class.macro_f1);
        let _ = writeln!(out, "class\tprecision\trecall\tf1");
        for label in [Label::True, Label::False] {
            let s = self.per_class.per_class.get(label);
            let _ = writeln!(
                out,
                "{label}\t{:.4}\t{:.4}\t{:.4}",
                s.precision, s.recall, s.f1
            );
        }
        let cell = |gold: Label, pred: Label| {
            let c = self.confusion.class(gold);
            if gold == pred {
                c.tp
            } else {
                // Errors on a binary task: gold `gold` predicted as the other class.
                c.fn_
            }
        };
        let _ = writeln!(out, "confusion (rows gold, columns predicted)");
        let _ = writeln!(out, "\ttrue\tfalse");
        for gold in [Label::True, Label::False] {
            let _ = writeln!(
                out,
                "{gold}\t{}\t{}",
                cell(gold, Label::True),
                cell(gold, Label::False)
            );
        }
        out
    }
}

fn read_gold(path: &Path) -> Result<Vec<(String, Label)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    if PredictionFile::sniff(&text) {
        return Ok(PredictionFile::parse(&text)?.rows);
    }
    let corpus = LabeledCorpus::parse_jsonl(&text, true)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    Ok(corpus
        .snippets()
        .iter()
        .map(|s| (s.id.clone(), s.label.expect("labels required")))
        .collect())
}

fn list_ids(ids: &[&str]) -> String {
    const SHOWN: usize = 10;
    let mut out = ids
        .iter()
        .take(SHOWN)
        .copied()
        .collect::<Vec<_>>()
        .join(", ");
    if ids.len() > SHOWN {
        let _ = write!(out, " (+{} more)", ids.len() - SHOWN);
    }
    out
}

/// Joins predictions to gold labels by id and scores them. The gold file
/// may be a labeled corpus or another prediction file.
pub fn cmd_score(pred_path: &Path, gold_path: &Path) -> Result<ScoreReport, CliError> {
    let predictions = PredictionFile::read(pred_path)?;
    let gold = read_gold(gold_path)?;

    let predicted: HashMap<&str, Label> = predictions
        .rows
        .iter()
        .map(|(id, l)| (id.as_str(), *l))
        .collect();
    let gold_ids: HashSet<&str> = gold.iter().map(|(id, _)| id.as_str()).collect();
    let missing: Vec<&str> = gold
        .iter()
        .map(|(id, _)| id.as_str())
        .filter(|id| !predicted.contains_key(id))
        .collect();
    let extra: Vec<&str> = predictions
        .rows
        .iter()
        .map(|(id, _)| id.as_str())
        .filter(|id| !gold_ids.contains(id))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        let mut msg = String::from("prediction and gold ids differ");
        if !missing.is_empty() {
            let _ = write!(msg, "; missing predictions: {}", list_ids(&missing));
        }
        if !extra.is_empty() {
            let _ = write!(msg, "; ids not in gold: {}", list_ids(&extra));
        }
        return Err(CliError::validation(msg));
    }
    if gold.is_empty() {
        return Err(CliError::validation("nothing to score: gold file is empty"));
    }

    let gold_labels: Vec<Label> = gold.iter().map(|(_, l)| *l).collect();
    let pred_labels: Vec<Label> = gold.iter().map(|(id, _)| predicted[id.as_str()]).collect();
    let counts = confusion(&pred_labels, &gold_labels)?;
    Ok(ScoreReport {
        micro_f1: micro_f1(&counts)?,
        binary_f1: binary_f1(&counts)?,
        per_class: per_class_f1(&counts)?,
        confusion: counts,
    })
}

fn percent(count: usize, total: usize) -> f64 {
    100.0 * count as f64 / total as f64
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[usize], p: f64) -> usize {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Dataset report: size, label distribution, class weights and token-length
/// percentiles under the segmenter of `checkpoint`.
pub fn cmd_inspect(
    corpus_path: &Path,
    checkpoint: &str,
    max_length: usize,
) -> Result<String, CliError> {
    let corpus = load_corpus(corpus_path, false)?;
    let dist = label_distribution(&corpus);
    let mut out = String::new();

    match dist.fractions {
        None => {
            let _ = writeln!(out, "{} snippets; no labels present", dist.total);
        }
        Some(_) => {
            let unlabeled = dist.total - dist.labeled;
            let _ = write!(out, "{} snippets", dist.total);
            if unlabeled > 0 {
                let _ = write!(out, " ({unlabeled} unlabeled)");
            }
            let _ = writeln!(
                out,
                "; true: {} ({:.1}%); false: {} ({:.1}%)",
                dist.counts.true_,
                percent(dist.counts.true_, dist.labeled),
                dist.counts.false_,
                percent(dist.counts.false_, dist.labeled)
            );
            match class_weights(&corpus) {
                Ok(w) => {
                    let _ = writeln!(
                        out,
                        "class weights (true / false): {:.4} / {:.4}",
                        w.weight_true, w.weight_false
                    );
                }
                Err(_) => {
                    let _ = writeln!(out, "class weights: undefined (a class is empty)");
                }
            }
        }
    }

    if corpus.is_empty() {
        let _ = writeln!(out, "no snippets to measure");
        return Ok(out);
    }
    let segmenter = load_segmenter(checkpoint)?;
    let mut lengths = corpus
        .snippets()
        .iter()
        .map(|s| segmenter.sequence_len(&s.text))
        .collect::<persuasion_core::Result<Vec<_>>>()?;
    lengths.sort_unstable();
    let over = lengths.iter().filter(|&&l| l > max_length).count();
    let _ = writeln!(
        out,
        "subword tokens ({checkpoint}): p50 {} / p90 {} / p95 {} / p99 {} / max {}; {over} over max_length {max_length}",
        percentile(&lengths, 50.0),
        percentile(&lengths, 90.0),
        percentile(&lengths, 95.0),
        percentile(&lengths, 99.0),
        lengths[lengths.len() - 1],
    );
    Ok(out)
}

/// Majority label of a labeled corpus; a tie goes to `false`.
pub fn majority_label(corpus: &LabeledCorpus) -> Label {
    if corpus.count(Label::True) > corpus.count(Label::False) {
        Label::True
    } else {
        Label::False
    }
}

/// Predicts the training-majority label for every snippet of `input_path`.
pub fn cmd_baseline(
    train_path: &Path,
    input_path: &Path,
    output_path: &Path,
) -> Result<(Label, usize), CliError> {
    let train_corpus = load_corpus(train_path, true)?;
    let label = majority_label(&train_corpus);
    let input = load_corpus(input_path, false)?;
    let rows = write_predictions(&input, vec![label; input.len()], output_path)?;
    Ok((label, rows))
}
