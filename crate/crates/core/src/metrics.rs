//! Confusion counts and F1 scores for single-label binary predictions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::label::{Label, PerLabel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub per_class: PerLabel<ClassCounts>,
    pub n: usize,
}

impl ConfusionCounts {
    pub fn class(&self, label: Label) -> ClassCounts {
        *self.per_class.get(label)
    }

    pub fn total_tp(&self) -> usize {
        Label::ALL.iter().map(|&l| self.class(l).tp).sum()
    }

    pub fn total_fp(&self) -> usize {
        Label::ALL.iter().map(|&l| self.class(l).fp).sum()
    }

    pub fn total_fn(&self) -> usize {
        Label::ALL.iter().map(|&l| self.class(l).fn_).sum()
    }

    /// Fraction of correct predictions.
    pub fn accuracy(&self) -> Result<f64> {
        self.require_examples()?;
        Ok(self.total_tp() as f64 / self.n as f64)
    }

    fn require_examples(&self) -> Result<()> {
        if self.n == 0 {
            Err(Error::InvalidArgument("no examples to score".into()))
        } else {
            Ok(())
        }
    }
}

pub fn confusion(predictions: &[Label], gold: &[Label]) -> Result<ConfusionCounts> {
    if predictions.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    let mut counts = ConfusionCounts {
        n: gold.len(),
        ..Default::default()
    };
    for (&pred, &truth) in predictions.iter().zip(gold) {
        if pred == truth {
            counts.per_class.get_mut(truth).tp += 1;
        } else {
            counts.per_class.get_mut(pred).fp += 1;
            counts.per_class.get_mut(truth).fn_ += 1;
        }
    }
    Ok(counts)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `2TP / (2TP + FP + FN)`, the count form of `2PR / (P + R)`. A single
/// rounding step, so micro-F1 over both classes is bitwise equal to accuracy.
fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

/// Micro-averaged F1 over both classes. For single-label binary data this
/// coincides with accuracy.
pub fn micro_f1(counts: &ConfusionCounts) -> Result<f64> {
    counts.require_examples()?;
    Ok(f1(counts.total_tp(), counts.total_fp(), counts.total_fn()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerClassReport {
    pub per_class: PerLabel<ClassScores>,
    pub macro_f1: f64,
}

pub fn per_class_f1(counts: &ConfusionCounts) -> Result<PerClassReport> {
    counts.require_examples()?;
    let scores = |label: Label| {
        let c = counts.class(label);
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        ClassScores {
            precision,
            recall,
            f1: f1(c.tp, c.fp, c.fn_),
        }
    };
    let per_class = PerLabel::new(scores(Label::False), scores(Label::True));
    let macro_f1 = (per_class.false_.f1 + per_class.true_.f1) / 2.0;
    Ok(PerClassReport {
        per_class,
        macro_f1,
    })
}

/// F1 of the `true` class alone (positive-class binary F1).
pub fn binary_f1(counts: &ConfusionCounts) -> Result<f64> {
    Ok(per_class_f1(counts)?.per_class.true_.f1)
}
