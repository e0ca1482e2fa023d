//! Seeded synthetic corpora over the tiny-random vocabulary, for smoke
//! tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{LabeledCorpus, Snippet};
use crate::label::Label;

/// Word-token ranges of the tiny vocabulary (`tok0` .. `tok739`).
const TRUE_POOL: std::ops::Range<usize> = 0..40;
const FALSE_POOL: std::ops::Range<usize> = 40..80;
const NOISE_POOL: std::ops::Range<usize> = 80..740;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSpec {
    pub n_true: usize,
    pub n_false: usize,
    /// Probability that a token comes from the label's own pool rather than
    /// the shared noise pool.
    pub signal: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub seed: u64,
}

impl PatternSpec {
    pub fn new(n_true: usize, n_false: usize, seed: u64) -> Self {
        Self {
            n_true,
            n_false,
            signal: 0.5,
            min_tokens: 6,
            max_tokens: 14,
            seed,
        }
    }

    pub fn with_signal(mut self, signal: f64) -> Self {
        self.signal = signal;
        self
    }
}

fn snippet_text(rng: &mut ChaCha8Rng, label: Label, spec: &PatternSpec) -> String {
    let pool = match label {
        Label::True => TRUE_POOL,
        Label::False => FALSE_POOL,
    };
    let n = rng.random_range(spec.min_tokens..=spec.max_tokens);
    (0..n)
        .map(|_| {
            let id = if rng.random::<f64>() < spec.signal {
                rng.random_range(pool.clone())
            } else {
                rng.random_range(NOISE_POOL)
            };
            format!("tok{id}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Labeled corpus whose texts mix class-specific and shared tokens. Labels
/// are interleaved in a seeded order; ids are `syn-0000`, `syn-0001`, ...
pub fn pattern_corpus(spec: &PatternSpec) -> LabeledCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut labels: Vec<Label> = std::iter::repeat(Label::True)
        .take(spec.n_true)
        .chain(std::iter::repeat(Label::False).take(spec.n_false))
        .collect();
    labels.shuffle(&mut rng);
    let snippets = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let text = snippet_text(&mut rng, label, spec);
            Snippet::new(format!("syn-{i:04}"), &text, Some(label), None)
                .expect("synthetic snippets are valid")
        })
        .collect();
    LabeledCorpus::new(snippets).expect("synthetic ids are unique")
}

/// The same texts without labels.
pub fn unlabeled(corpus: &LabeledCorpus) -> LabeledCorpus {
    let snippets = corpus
        .snippets()
        .iter()
        .map(|s| Snippet {
            label: None,
            ..s.clone()
        })
        .collect();
    LabeledCorpus::new(snippets).expect("ids unchanged")
}
