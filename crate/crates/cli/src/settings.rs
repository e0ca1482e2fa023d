//! Training configuration resolution: defaults, then the config file, then
//! command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use persuasion_core::trainer::parse_kv;
use persuasion_core::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub config: TrainConfig,
    /// One message per flag that overrode a different config-file value.
    pub notices: Vec<String>,
}

/// Applies `file` (flat `key = value` text) and then `flags` on top of the
/// defaults.
pub fn resolve_config(
    file: Option<&Path>,
    flags: &[(&str, String)],
) -> Result<ResolvedConfig, CliError> {
    let mut config = TrainConfig::default();
    let mut from_file = BTreeMap::new();
    if let Some(path) = file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        let pairs = parse_kv(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        for (key, value) in pairs {
            config
                .set(&key, &value)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            from_file.insert(key, value);
        }
    }

    let mut notices = Vec::new();
    for (key, value) in flags {
        config.set(key, value)?;
        if let Some(file_value) = from_file.get(*key) {
            let mut probe = TrainConfig::default();
            probe.set(key, file_value)?;
            if probe.get(key) != config.get(key) {
                notices.push(format!(
                    "--{} = {value} overrides config file value {file_value}",
                    key.replace('_', "-")
                ));
            }
        }
    }
    config.validate()?;
    Ok(ResolvedConfig { config, notices })
}
