//! Command-line driver for `tbg-core`: run configurations, JSON/CSV reports, caching and
//! sweep checkpoints.

pub mod cache;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod schema;

use std::fs;

use cache::Cache;
use commands::{execute, Outputs, CHECKPOINT_FILE};
use config::RunConfig;
use error::CliError;

pub fn pretty(v: &impl serde::Serialize) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Executes `cfg` (or replays a validated cache entry) and writes `report.json`,
/// `config.json` and the auxiliary files into the output directory, if any.
pub fn run(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let cache = cfg.cache.then(Cache::from_env);
    let cached = cache.as_ref().and_then(|c| c.load(cfg));
    let hit = cached.is_some();
    if let Some(d) = &cfg.output {
        fs::create_dir_all(d)?;
    }
    let out = match cached {
        Some(o) => o,
        None => execute(cfg, cfg.output.as_deref())?,
    };
    if let Some(d) = &cfg.output {
        fs::write(d.join("report.json"), pretty(&out.report)?)?;
        fs::write(d.join("config.json"), pretty(&cfg.result_part())?)?;
        for (name, text) in &out.files {
            fs::write(d.join(name), text)?;
        }
        let _ = fs::remove_file(d.join(CHECKPOINT_FILE));
    }
    if let (Some(c), false) = (&cache, hit) {
        c.store(cfg, &out)?;
    }
    Ok(out)
}
