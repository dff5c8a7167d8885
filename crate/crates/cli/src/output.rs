//! JSON envelopes and CSV files stamped with the version and config hash.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use nlslab::io::{write_csv, Provenance};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

pub const TOOL: &str = "nlslab";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    pub fn new(cfg: &RunConfig) -> Self {
        Stamp {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
        }
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            version: self.version.clone(),
            config_hash: self.config_hash.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub provenance: Stamp,
    pub config: RunConfig,
    pub result: T,
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, cfg: &RunConfig, result: &T) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let env = Envelope {
        provenance: Stamp::new(cfg),
        config: cfg.clone(),
        result,
    };
    let text = serde_json::to_string_pretty(&env)?;
    std::fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Envelope<T>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_rows<T: Serialize>(dir: &Path, name: &str, cfg: &RunConfig, rows: &[T]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let prov = Stamp::new(cfg).provenance();
    write_csv(BufWriter::new(File::create(dir.join(name))?), rows, Some(&prov))?;
    Ok(())
}
