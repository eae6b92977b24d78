use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;

pub mod analyze;
pub mod evaluate;
pub mod optimize;
pub mod report;
pub mod sample;

pub const SAMPLE_DIR: &str = "sample";
pub const SALTELLI_DIR: &str = "saltelli";
pub const EVALUATE_DIR: &str = "evaluate";
pub const ANALYZE_DIR: &str = "analyze";
pub const OPTIMIZE_DIR: &str = "optimize";
pub const RESPONSES_FILE: &str = "responses.csv";
pub const HISTORY_FILE: &str = "history.jsonl";

/// Creates `<out>/<name>` and returns it.
fn command_dir(out: &Path, name: &str) -> Result<PathBuf> {
    let dir = out.join(name);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Default evaluation cache of an experiment.
pub fn default_cache(out: &Path) -> PathBuf {
    out.join("cache").join("evaluations.jsonl")
}

fn cache_path(cfg: &crate::LoadedConfig, out: &Path) -> PathBuf {
    match &cfg.config.objective.cache {
        Some(p) => cfg.resolve(p),
        None => default_cache(out),
    }
}
