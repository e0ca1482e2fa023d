//! Subword segmentation and padded batch construction.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::label::Label;

pub const BOS_TOKEN: &str = "<s>";
pub const PAD_TOKEN: &str = "<pad>";
pub const EOS_TOKEN: &str = "</s>";
pub const UNK_TOKEN: &str = "<unk>";

const BYTE_OFFSET: u32 = 4;
const BYTE_VOCAB_FILE: &str = "vocab.txt";
const HF_TOKENIZER_FILE: &str = "tokenizer.json";

/// Whitespace segmentation with a byte-level fallback for out-of-vocabulary
/// words. Ids 0..4 are `<s> <pad> </s> <unk>`, ids 4..260 are the raw bytes,
/// everything after that is a whole-word entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteFallbackVocab {
    tokens: Vec<String>,
    words: HashMap<String, u32>,
}

impl ByteFallbackVocab {
    /// The 1,000-entry vocabulary used by the `tiny-random` checkpoint:
    /// specials, 256 bytes and the word entries `tok0` .. `tok739`.
    pub fn tiny() -> Self {
        Self::with_words((0..740).map(|i| format!("tok{i}")))
    }

    pub fn with_words(words: impl IntoIterator<Item = String>) -> Self {
        let mut tokens: Vec<String> = [BOS_TOKEN, PAD_TOKEN, EOS_TOKEN, UNK_TOKEN]
            .iter()
            .map(|s| s.to_string())
            .collect();
        tokens.extend((0..=255u8).map(|b| format!("<0x{b:02X}>")));
        tokens.extend(words);
        Self::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let words = tokens
            .iter()
            .enumerate()
            .skip((BYTE_OFFSET + 256) as usize)
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, words }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn segment_into(&self, text: &str, out: &mut Vec<u32>) {
        for word in text.split_whitespace() {
            match self.words.get(word) {
                Some(&id) => out.push(id),
                None => out.extend(word.bytes().map(|b| BYTE_OFFSET + u32::from(b))),
            }
        }
    }

    fn save(&self, path: &Path) -> Result<()> {
        let mut body = self.tokens.join("\n");
        body.push('\n');
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tokens: Vec<String> = body.lines().map(str::to_string).collect();
        let expected_head = [BOS_TOKEN, PAD_TOKEN, EOS_TOKEN, UNK_TOKEN];
        if tokens.len() < (BYTE_OFFSET + 256) as usize
            || tokens[..4].iter().map(String::as_str).ne(expected_head)
        {
            return Err(Error::Tokenizer(format!(
                "{} is not a byte-fallback vocabulary",
                path.display()
            )));
        }
        Ok(Self::from_tokens(tokens))
    }
}

/// Text-to-id segmentation bundled with an encoder checkpoint.
#[derive(Clone)]
pub enum Segmenter {
    ByteFallback(ByteFallbackVocab),
    Pretrained(Box<tokenizers::Tokenizer>),
}

impl std::fmt::Debug for Segmenter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ByteFallback(v) => write!(f, "ByteFallback({} entries)", v.len()),
            Self::Pretrained(t) => write!(f, "Pretrained({} entries)", t.get_vocab_size(true)),
        }
    }
}

impl Segmenter {
    pub fn tiny() -> Self {
        Self::ByteFallback(ByteFallbackVocab::tiny())
    }

    pub fn bos_id(&self) -> u32 {
        self.special_id(BOS_TOKEN, 0)
    }

    pub fn pad_id(&self) -> u32 {
        self.special_id(PAD_TOKEN, 1)
    }

    pub fn eos_id(&self) -> u32 {
        self.special_id(EOS_TOKEN, 2)
    }

    fn special_id(&self, token: &str, fallback: u32) -> u32 {
        match self {
            Self::ByteFallback(_) => fallback,
            Self::Pretrained(t) => t.token_to_id(token).unwrap_or(fallback),
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            Self::ByteFallback(v) => v.len(),
            Self::Pretrained(t) => t.get_vocab_size(true),
        }
    }

    /// Content token ids of `text`, without sentence boundary tokens.
    pub fn content_ids(&self, text: &str) -> Result<Vec<u32>> {
        match self {
            Self::ByteFallback(v) => {
                let mut ids = Vec::new();
                v.segment_into(text, &mut ids);
                Ok(ids)
            }
            Self::Pretrained(t) => {
                let enc = t
                    .encode(text, false)
                    .map_err(|e| Error::Tokenizer(e.to_string()))?;
                Ok(enc.get_ids().to_vec())
            }
        }
    }

    /// Full untruncated sequence length of `text`, boundary tokens included.
    pub fn sequence_len(&self, text: &str) -> Result<usize> {
        Ok(self.content_ids(text)?.len() + 2)
    }

    /// `<s> content </s>`, with content cut so the total fits `max_length`.
    pub fn encode(&self, text: &str, max_length: usize) -> Result<Vec<u32>> {
        let content = self.content_ids(text)?;
        if content.is_empty() {
            return Err(Error::Tokenizer(format!(
                "text {text:?} produced no tokens"
            )));
        }
        let keep = content.len().min(max_length - 2);
        let mut ids = Vec::with_capacity(keep + 2);
        ids.push(self.bos_id());
        ids.extend_from_slice(&content[..keep]);
        ids.push(self.eos_id());
        Ok(ids)
    }

    /// Writes the vocabulary into a checkpoint directory.
    pub fn save(&self, dir: &Path) -> Result<()> {
        match self {
            Self::ByteFallback(v) => v.save(&dir.join(BYTE_VOCAB_FILE)),
            Self::Pretrained(t) => {
                let path = dir.join(HF_TOKENIZER_FILE);
                t.save(&path, false)
                    .map_err(|e| Error::Tokenizer(format!("{}: {e}", path.display())))
            }
        }
    }

    /// Loads whichever vocabulary a checkpoint directory carries.
    pub fn load(dir: &Path) -> Result<Self> {
        let byte_vocab = dir.join(BYTE_VOCAB_FILE);
        if byte_vocab.is_file() {
            return ByteFallbackVocab::load(&byte_vocab).map(Self::ByteFallback);
        }
        let hf = dir.join(HF_TOKENIZER_FILE);
        if hf.is_file() {
            let tokenizer = tokenizers::Tokenizer::from_file(&hf)
                .map_err(|e| Error::Tokenizer(format!("{}: {e}", hf.display())))?;
            return Ok(Self::Pretrained(Box::new(tokenizer)));
        }
        Err(Error::Tokenizer(format!(
            "no {BYTE_VOCAB_FILE} or {HF_TOKENIZER_FILE} in {}",
            dir.display()
        )))
    }
}

/// A padded, row-major batch of token ids with its attention mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenBatch {
    pub token_ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    pub labels: Option<Vec<u32>>,
    pub batch_size: usize,
    pub seq_len: usize,
}

impl TokenBatch {
    pub fn row_ids(&self, row: usize) -> &[u32] {
        &self.token_ids[row * self.seq_len..(row + 1) * self.seq_len]
    }

    pub fn row_mask(&self, row: usize) -> &[u8] {
        &self.attention_mask[row * self.seq_len..(row + 1) * self.seq_len]
    }

    pub fn with_labels(mut self, labels: &[Label]) -> Result<Self> {
        if labels.len() != self.batch_size {
            return Err(Error::InvalidArgument(format!(
                "{} labels for a batch of {}",
                labels.len(),
                self.batch_size
            )));
        }
        self.labels = Some(labels.iter().map(|l| l.index() as u32).collect());
        Ok(self)
    }

    /// Appends `extra` all-padding columns. Used to check padding invariance.
    pub fn pad_columns(&self, extra: usize, pad_id: u32) -> Self {
        let seq_len = self.seq_len + extra;
        let mut token_ids = Vec::with_capacity(self.batch_size * seq_len);
        let mut attention_mask = Vec::with_capacity(self.batch_size * seq_len);
        for row in 0..self.batch_size {
            token_ids.extend_from_slice(self.row_ids(row));
            token_ids.extend(std::iter::repeat(pad_id).take(extra));
            attention_mask.extend_from_slice(self.row_mask(row));
            attention_mask.extend(std::iter::repeat(0).take(extra));
        }
        Self {
            token_ids,
            attention_mask,
            labels: self.labels.clone(),
            batch_size: self.batch_size,
            seq_len,
        }
    }

    /// Checks shape consistency and that every row has a real token.
    pub fn validate(&self) -> Result<()> {
        let cells = self.batch_size * self.seq_len;
        if self.batch_size == 0 || self.seq_len == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if self.token_ids.len() != cells || self.attention_mask.len() != cells {
            return Err(Error::InvalidArgument(format!(
                "batch shape mismatch: {} ids, {} mask cells, expected {cells}",
                self.token_ids.len(),
                self.attention_mask.len()
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.batch_size || labels.iter().any(|&l| l > 1) {
                return Err(Error::InvalidArgument(
                    "labels must be 0/1, one per row".into(),
                ));
            }
        }
        for row in 0..self.batch_size {
            let mask = self.row_mask(row);
            if mask.iter().any(|&m| m > 1) || !mask.contains(&1) {
                return Err(Error::InvalidArgument(format!(
                    "row {row} has an invalid attention mask"
                )));
            }
        }
        Ok(())
    }
}

/// Segments `texts`, truncates each to `max_length` and pads to the
/// longest row.
pub fn encode_batch<S: AsRef<str>>(
    segmenter: &Segmenter,
    texts: &[S],
    max_length: usize,
) -> Result<TokenBatch> {
    if texts.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot encode an empty text list".into(),
        ));
    }
    if max_length < 2 {
        return Err(Error::InvalidArgument(format!(
            "max_length must be at least 2, got {max_length}"
        )));
    }
    let rows = texts
        .iter()
        .map(|t| segmenter.encode(t.as_ref(), max_length))
        .collect::<Result<Vec<_>>>()?;
    TokenBatch::from_sequences(&rows, segmenter.pad_id())
}

impl TokenBatch {
    /// Pads already-encoded sequences to the longest one.
    pub fn from_sequences<R: AsRef<[u32]>>(rows: &[R], pad_id: u32) -> Result<Self> {
        if rows.is_empty() || rows.iter().any(|r| r.as_ref().is_empty()) {
            return Err(Error::InvalidArgument(
                "cannot batch empty sequences".into(),
            ));
        }
        let seq_len = rows.iter().map(|r| r.as_ref().len()).max().unwrap_or(0);
        let mut token_ids = Vec::with_capacity(rows.len() * seq_len);
        let mut attention_mask = Vec::with_capacity(rows.len() * seq_len);
        for row in rows {
            let row = row.as_ref();
            token_ids.extend_from_slice(row);
            token_ids.extend(std::iter::repeat(pad_id).take(seq_len - row.len()));
            attention_mask.extend(std::iter::repeat(1u8).take(row.len()));
            attention_mask.extend(std::iter::repeat(0u8).take(seq_len - row.len()));
        }
        Ok(Self {
            token_ids,
            attention_mask,
            labels: None,
            batch_size: rows.len(),
            seq_len,
        })
    }
}
