//! Batch driver for the bound-verification laboratory: scenario registry,
//! convergence studies, and report emission.

pub mod manifest;
pub mod scenario;

use serde::{Deserialize, Serialize};

use hmbounds_core::error::{Error, Result};
use scenario::Scenario;

pub const CONFIG_VERSION: u32 = 1;

/// Versioned run configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: u32,
    pub scenarios: Vec<Scenario>,
}

impl RunConfig {
    pub fn builtin() -> Self {
        Self {
            version: CONFIG_VERSION,
            scenarios: scenario::builtin_registry(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported config version {}",
                cfg.version
            )));
        }
        for s in &cfg.scenarios {
            s.validate()?;
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Thread-count override: the HMBOUNDS_THREADS environment variable, else
/// the available parallelism.
pub fn thread_count() -> usize {
    std::env::var("HMBOUNDS_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}
