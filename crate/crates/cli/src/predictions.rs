//! Prediction files: UTF-8, tab-separated, header `id\tlabel`, one row per
//! snippet in input order, lowercase `true`/`false` labels.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use persuasion_core::Label;

use crate::error::CliError;

pub const HEADER: &str = "id\tlabel";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionFile {
    pub rows: Vec<(String, Label)>,
}

impl PredictionFile {
    pub fn new(rows: Vec<(String, Label)>) -> Result<Self, CliError> {
        let mut seen = HashSet::new();
        for (id, _) in &rows {
            if id.is_empty() || id.contains(['\t', '\n', '\r']) {
                return Err(CliError::validation(format!(
                    "id {id:?} cannot be written to a prediction file"
                )));
            }
            if !seen.insert(id.as_str()) {
                return Err(CliError::validation(format!("duplicate id {id:?}")));
            }
        }
        Ok(Self { rows })
    }

    pub fn render(&self) -> String {
        let mut out = String::with_capacity(16 * (self.rows.len() + 1));
        out.push_str(HEADER);
        out.push('\n');
        for (id, label) in &self.rows {
            let _ = writeln!(out, "{id}\t{label}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.render())
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines();
        match lines.next() {
            Some(HEADER) => {}
            other => {
                return Err(CliError::validation(format!(
                    "expected header {HEADER:?}, found {:?}",
                    other.unwrap_or("")
                )))
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let (id, label) = line.split_once('\t').ok_or_else(|| {
                CliError::validation(format!("line {line_no}: expected `id<TAB>label`"))
            })?;
            let label = label
                .parse::<Label>()
                .map_err(|e| CliError::validation(format!("line {line_no}: {e}")))?;
            rows.push((id.to_string(), label));
        }
        Self::new(rows)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// True when `text` looks like a prediction file rather than a corpus.
    pub fn sniff(text: &str) -> bool {
        text.lines().next() == Some(HEADER)
    }
}
