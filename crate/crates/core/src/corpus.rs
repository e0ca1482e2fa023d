//! Labeled snippet corpora: JSONL ingestion, validation, stratified
//! hold-out splitting and class statistics.
//!
//! The canonical file format is one JSON object per line:
//!
//! ```text
//! {"id": "t-001", "text": "...", "label": "true", "type": "tweet"}
//! ```
//!
//! `label` and `type` are optional. Record order is preserved everywhere.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::label::{Label, PerLabel};

/// Text genre tag carried through from the source file. Informational only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Genre {
    Tweet,
    #[serde(alias = "paragraph")]
    News,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snippet {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
    pub genre: Option<Genre>,
}

impl Snippet {
    /// Builds a snippet, applying NFC normalization and whitespace trimming
    /// to the text. Fails on an empty id or empty (post-trim) text.
    pub fn new(
        id: impl Into<String>,
        text: &str,
        label: Option<Label>,
        genre: Option<Genre>,
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidArgument(
                "snippet id must be non-empty".into(),
            ));
        }
        let text = normalize_text(text);
        if text.is_empty() {
            return Err(Error::EmptyText { id, line: 0 });
        }
        Ok(Self {
            id,
            text,
            label,
            genre,
        })
    }
}

pub fn normalize_text(text: &str) -> String {
    text.nfc().collect::<String>().trim().to_string()
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    genre: Option<Genre>,
}

/// An ordered, id-unique collection of snippets. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCorpus {
    snippets: Vec<Snippet>,
    counts: PerLabel<usize>,
}

impl LabeledCorpus {
    pub fn new(snippets: Vec<Snippet>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(snippets.len());
        let mut counts = PerLabel::default();
        for (i, snippet) in snippets.iter().enumerate() {
            if !seen.insert(snippet.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: snippet.id.clone(),
                    line: i + 1,
                });
            }
            if let Some(label) = snippet.label {
                *counts.get_mut(label) += 1;
            }
        }
        Ok(Self { snippets, counts })
    }

    pub fn empty() -> Self {
        Self {
            snippets: Vec::new(),
            counts: PerLabel::default(),
        }
    }

    pub fn snippets(&self) -> &[Snippet] {
        &self.snippets
    }

    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    pub fn counts(&self) -> PerLabel<usize> {
        self.counts
    }

    pub fn count(&self, label: Label) -> usize {
        *self.counts.get(label)
    }

    pub fn labeled_len(&self) -> usize {
        self.counts.false_ + self.counts.true_
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labeled_len() == self.len()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.snippets.iter().map(|s| s.text.as_str()).collect()
    }

    /// Gold labels in corpus order, or `None` if any snippet is unlabeled.
    pub fn labels(&self) -> Option<Vec<Label>> {
        self.snippets.iter().map(|s| s.label).collect()
    }

    /// Serializes to the canonical JSONL format (one record per line,
    /// trailing newline after every record).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.snippets {
            let record = Record {
                id: s.id.clone(),
                text: s.text.clone(),
                label: s.label.map(|l| l.as_str().to_string()),
                genre: s.genre,
            };
            // Record only holds strings, so serialization cannot fail.
            let line = serde_json::to_string(&record).expect("record serializes");
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// Parses canonical JSONL text. Line numbers in errors are 1-based.
    pub fn parse_jsonl(input: &str, require_labels: bool) -> Result<Self> {
        let mut snippets = Vec::new();
        let mut seen = HashSet::new();
        for (idx, raw) in input.lines().enumerate() {
            let line = idx + 1;
            let malformed = |message: String| Error::MalformedRecord { line, message };
            if raw.trim().is_empty() {
                return Err(malformed("empty line".into()));
            }
            if raw.starts_with('#') {
                return Err(malformed("comment lines are not supported".into()));
            }
            let record: Record = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
            if record.id.is_empty() {
                return Err(malformed("empty id".into()));
            }
            let label = match record.label.as_deref() {
                Some(l) => Some(l.parse::<Label>().map_err(|e| malformed(e.to_string()))?),
                None => None,
            };
            if label.is_none() && require_labels {
                return Err(Error::MissingLabel {
                    id: record.id,
                    line,
                });
            }
            if !seen.insert(record.id.clone()) {
                return Err(Error::DuplicateId {
                    id: record.id,
                    line,
                });
            }
            let text = normalize_text(&record.text);
            if text.is_empty() {
                return Err(Error::EmptyText {
                    id: record.id,
                    line,
                });
            }
            snippets.push(Snippet {
                id: record.id,
                text,
                label,
                genre: record.genre,
            });
        }
        Self::new(snippets)
    }
}

/// Reads a corpus file. With `require_labels`, every record must carry a
/// label.
pub fn load_corpus(path: impl AsRef<Path>, require_labels: bool) -> Result<LabeledCorpus> {
    let path = path.as_ref();
    let input = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LabeledCorpus::parse_jsonl(&input, require_labels)
}

/// Number of members of a class of size `n` that go to the dev side.
///
/// `floor(n * fraction)`, at least 1. The small epsilon absorbs binary
/// representation error (`0.29 * 100 = 28.999...`).
pub fn dev_share(n: usize, fraction: f64) -> usize {
    (((n as f64) * fraction + 1e-9).floor() as usize).max(1)
}

/// Splits a fully labeled corpus into (train, dev), stratified by label.
///
/// Each class contributes [`dev_share`] members to dev, chosen by a seeded
/// shuffle. Both outputs keep the input order.
pub fn stratified_split(
    corpus: &LabeledCorpus,
    dev_fraction: f64,
    seed: u64,
) -> Result<(LabeledCorpus, LabeledCorpus)> {
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "dev_fraction must lie in (0, 1), got {dev_fraction}"
        )));
    }
    if !corpus.is_fully_labeled() {
        return Err(Error::InvalidArgument(
            "stratified split needs a fully labeled corpus".into(),
        ));
    }
    for label in Label::ALL {
        let count = corpus.count(label);
        if count < 2 {
            return Err(Error::ClassTooSmall {
                label,
                count,
                needed: 2,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_dev = vec![false; corpus.len()];
    for label in Label::ALL {
        let mut members: Vec<usize> = corpus
            .snippets
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == Some(label))
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        let take = dev_share(members.len(), dev_fraction);
        for &i in &members[..take] {
            in_dev[i] = true;
        }
    }

    let (dev, train): (Vec<_>, Vec<_>) = corpus
        .snippets
        .iter()
        .cloned()
        .zip(in_dev)
        .partition(|(_, dev)| *dev);
    let train = LabeledCorpus::new(train.into_iter().map(|(s, _)| s).collect())?;
    let dev = LabeledCorpus::new(dev.into_iter().map(|(s, _)| s).collect())?;
    Ok((train, dev))
}

/// Inverse-frequency class weights, `N / (2 * n_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weight_true: f64,
    pub weight_false: f64,
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights {
        weight_true: 1.0,
        weight_false: 1.0,
    };

    pub fn new(weight_true: f64, weight_false: f64) -> Result<Self> {
        for w in [weight_true, weight_false] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "class weights must be finite and positive, got {w}"
                )));
            }
        }
        Ok(Self {
            weight_true,
            weight_false,
        })
    }

    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::True => self.weight_true,
            Label::False => self.weight_false,
        }
    }

    /// Weights in label-index order (`[false, true]`).
    pub fn by_index(&self) -> [f64; 2] {
        [self.weight_false, self.weight_true]
    }
}

impl Default for ClassWeights {
    fn default() -> Self {
        Self::UNIT
    }
}

pub fn class_weights(corpus: &LabeledCorpus) -> Result<ClassWeights> {
    class_weights_from_counts(corpus.counts())
}

pub fn class_weights_from_counts(counts: PerLabel<usize>) -> Result<ClassWeights> {
    for label in Label::ALL {
        if *counts.get(label) == 0 {
            return Err(Error::ClassTooSmall {
                label,
                count: 0,
                needed: 1,
            });
        }
    }
    let total = (counts.true_ + counts.false_) as f64;
    let weight = |n: usize| total / (2.0 * n as f64);
    ClassWeights::new(weight(counts.true_), weight(counts.false_))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelDistribution {
    pub total: usize,
    pub labeled: usize,
    pub counts: PerLabel<usize>,
    /// Share of each class among labeled snippets; `None` when nothing is
    /// labeled.
    pub fractions: Option<PerLabel<f64>>,
}

pub fn label_distribution(corpus: &LabeledCorpus) -> LabelDistribution {
    let counts = corpus.counts();
    let labeled = corpus.labeled_len();
    let fractions = (labeled > 0).then(|| {
        PerLabel::new(
            counts.false_ as f64 / labeled as f64,
            counts.true_ as f64 / labeled as f64,
        )
    });
    LabelDistribution {
        total: corpus.len(),
        labeled,
        counts,
        fractions,
    }
}
