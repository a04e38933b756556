//! JSON summaries. Timestamps live only in the `metadata` block so every
//! other output is byte-identical across runs with the same inputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use lmsbart::{Error, Result};

#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    version: &'a str,
    created_at: String,
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    metadata: Metadata<'a>,
    config: &'a RunConfig,
    result: &'a T,
}

pub fn write_summary<T: Serialize>(path: &Path, command: &str, cfg: &RunConfig, result: &T) -> Result<PathBuf> {
    let summary = Summary {
        metadata: Metadata {
            command,
            version: env!("CARGO_PKG_VERSION"),
            created_at: chrono::Utc::now().to_rfc3339(),
        },
        config: cfg,
        result,
    };
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(path.to_path_buf())
}

pub fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(path.to_path_buf())
}
