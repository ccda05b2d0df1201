use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::commands::Outputs;
use crate::config::RunConfig;
use crate::error::CliError;

pub const CACHE_ENV: &str = "TBG_CACHE_DIR";

#[derive(Serialize, Deserialize)]
struct Entry {
    hash: String,
    config: RunConfig,
    report: serde_json::Value,
    files: Vec<(String, String)>,
}

/// Results keyed by [`RunConfig::hash`]; an entry is used only when its stored configuration
/// hashes to the same key and equals the requested one.
pub struct Cache {
    pub dir: PathBuf,
}

impl Cache {
    /// `$TBG_CACHE_DIR`, else `.tbg-cache` in the working directory.
    pub fn from_env() -> Self {
        let dir = std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".tbg-cache"));
        Self { dir }
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn load(&self, cfg: &RunConfig) -> Option<Outputs> {
        let hash = cfg.hash();
        let text = fs::read_to_string(self.path(&hash)).ok()?;
        let e: Entry = serde_json::from_str(&text).ok()?;
        let wanted = cfg.result_part();
        (e.hash == hash && e.config.hash() == hash && e.config == wanted).then_some(Outputs { report: e.report, files: e.files })
    }

    pub fn store(&self, cfg: &RunConfig, out: &Outputs) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir)?;
        let hash = cfg.hash();
        let e = Entry { hash: hash.clone(), config: cfg.result_part(), report: out.report.clone(), files: out.files.clone() };
        let tmp = self.dir.join(format!("{hash}.tmp"));
        fs::write(&tmp, serde_json::to_vec(&e)?)?;
        fs::rename(tmp, self.path(&hash))?;
        Ok(())
    }
}
