use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of a fine-tuning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub scheduler_factor: f64,
    /// Epochs between learning-rate decays.
    pub scheduler_step: usize,
    pub patience: usize,
    pub dropout_rate: f64,
    pub max_length: usize,
    pub dev_fraction: f64,
    pub seed: u64,
    pub use_class_weights: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-5,
            batch_size: 16,
            max_epochs: 6,
            scheduler_factor: 0.85,
            scheduler_step: 2,
            patience: 2,
            dropout_rate: 0.1,
            max_length: 128,
            dev_fraction: 0.1,
            seed: 42,
            use_class_weights: true,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    pub const KEYS: [&'static str; 11] = [
        "learning_rate",
        "batch_size",
        "max_epochs",
        "scheduler_factor",
        "scheduler_step",
        "patience",
        "dropout_rate",
        "max_length",
        "dev_fraction",
        "seed",
        "use_class_weights",
    ];

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "scheduler_factor" => self.scheduler_factor = parse(key, value)?,
            "scheduler_step" => self.scheduler_step = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "dropout_rate" => self.dropout_rate = parse(key, value)?,
            "max_length" => self.max_length = parse(key, value)?,
            "dev_fraction" => self.dev_fraction = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "use_class_weights" => self.use_class_weights = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "learning_rate" => self.learning_rate.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "scheduler_factor" => self.scheduler_factor.to_string(),
            "scheduler_step" => self.scheduler_step.to_string(),
            "patience" => self.patience.to_string(),
            "dropout_rate" => self.dropout_rate.to_string(),
            "max_length" => self.max_length.to_string(),
            "dev_fraction" => self.dev_fraction.to_string(),
            "seed" => self.seed.to_string(),
            "use_class_weights" => self.use_class_weights.to_string(),
            _ => return None,
        })
    }

    /// `key = value` lines, one per field, in declaration order.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.batch_size == 0
            || self.max_epochs == 0
            || self.scheduler_step == 0
            || self.patience == 0
        {
            return fail(
                "batch_size, max_epochs, scheduler_step and patience must be positive".into(),
            );
        }
        if !(self.scheduler_factor > 0.0 && self.scheduler_factor <= 1.0) {
            return fail(format!(
                "scheduler_factor must lie in (0, 1], got {}",
                self.scheduler_factor
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            ));
        }
        if self.max_length < 2 {
            return fail(format!(
                "max_length must be at least 2, got {}",
                self.max_length
            ));
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return fail(format!(
                "dev_fraction must lie in (0, 1), got {}",
                self.dev_fraction
            ));
        }
        Ok(())
    }
}

/// Parses flat `key = value` text. `#` starts a comment; blank lines are
/// ignored. Returns pairs in file order; keys are not checked here.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", i + 1)));
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reported_hyperparameters() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate, 5e-5);
        assert_eq!(c.batch_size, 16);
        assert_eq!(c.max_epochs, 6);
        assert_eq!(c.scheduler_factor, 0.85);
        assert_eq!(c.scheduler_step, 2);
        c.validate().unwrap();
    }

    #[test]
    fn kv_round_trip() {
        let c = TrainConfig {
            learning_rate: 1e-3,
            use_class_weights: false,
            seed: 7,
            ..TrainConfig::default()
        };
        let mut back = TrainConfig::default();
        for (k, v) in parse_kv(&c.to_kv_string()).unwrap() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, c);
    }

    #[test]
    fn parse_kv_comments_and_errors() {
        let pairs = parse_kv("# run config\n\nbatch_size = 8  # small\nseed=3\n").unwrap();
        assert_eq!(
            pairs,
            [
                ("batch_size".into(), "8".into()),
                ("seed".into(), "3".into())
            ]
        );
        assert!(parse_kv("batch_size 8\n").is_err());
        assert!(parse_kv("batch_size =\n").is_err());
    }

    #[test]
    fn set_rejects_unknown_and_bad_values() {
        let mut c = TrainConfig::default();
        assert!(c.set("momentum", "0.9").is_err());
        assert!(c.set("batch_size", "-1").is_err());
        assert!(c.set("use_class_weights", "yes").is_err());
    }

    #[test]
    fn validate_ranges() {
        for (key, value) in [
            ("learning_rate", "0"),
            ("batch_size", "0"),
            ("scheduler_factor", "1.5"),
            ("dropout_rate", "1"),
            ("max_length", "1"),
            ("dev_fraction", "1"),
            ("patience", "0"),
        ] {
            let mut c = TrainConfig::default();
            c.set(key, value).unwrap();
            assert!(c.validate().is_err(), "{key} = {value}");
        }
    }
}
