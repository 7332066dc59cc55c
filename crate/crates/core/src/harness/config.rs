use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SweepSpec;
use crate::fp::FpConfig;
use crate::scenario::ScenarioConfig;
use crate::{Error, Result};

/// Top-level layout of a JSON config file. Every section and field is
/// optional; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub scenario: ScenarioConfig,
    pub sweep: SweepSpec,
    pub fp: FpConfig,
}

/// Parse and validate config text. Blank text yields all defaults.
pub fn parse_scenario(text: &str) -> Result<(ScenarioConfig, SweepSpec, FpConfig)> {
    let file: ConfigFile = if text.trim().is_empty() {
        ConfigFile::default()
    } else {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?
    };
    file.scenario.validate()?;
    file.sweep.validate()?;
    file.fp.validate()?;
    Ok((file.scenario, file.sweep, file.fp))
}

pub fn load_scenario(path: &Path) -> Result<(ScenarioConfig, SweepSpec, FpConfig)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}
