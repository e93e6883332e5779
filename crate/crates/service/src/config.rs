use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;
use vizagent_core::agents::{DEFAULT_MAX_ITERS, MAX_SHOTS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("data root {0} does not exist")]
    MissingDataRoot(PathBuf),
    #[error("shot_count must be in 1..={MAX_SHOTS}, got {0}")]
    ShotCount(usize),
    #[error("max_in_flight must be at least 1")]
    InFlight,
}

/// Settings for the live completion endpoint. Unset fields fall back to
/// the `VIZAGENT_*` environment variables.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSettings {
    pub base_url: Option<String>,
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub timeout_secs: Option<u64>,
    pub retries: Option<u32>,
    /// Replay this digest transcript instead of calling a model.
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    pub data_root: PathBuf,
    #[serde(default)]
    pub model: ModelSettings,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_shots")]
    pub shot_count: usize,
    /// Runtime worker threads; 0 means one per core.
    #[serde(default)]
    pub workers: usize,
    /// Global cap on concurrently running queries.
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

fn default_shots() -> usize {
    MAX_SHOTS
}

fn default_in_flight() -> usize {
    8
}

impl ServiceConfig {
    pub fn new(data_root: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            listen: default_listen(),
            data_root: data_root.into(),
            model: ModelSettings::default(),
            max_iters: default_max_iters(),
            shot_count: default_shots(),
            workers: 0,
            max_in_flight: default_in_flight(),
        }
    }

    /// Reads a TOML file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: ServiceConfig = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data_root = base.join(&cfg.data_root);
        if let Some(t) = &cfg.model.transcript {
            cfg.model.transcript = Some(base.join(t));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.data_root.is_dir() {
            return Err(ConfigError::MissingDataRoot(self.data_root.clone()));
        }
        if !(1..=MAX_SHOTS).contains(&self.shot_count) {
            return Err(ConfigError::ShotCount(self.shot_count));
        }
        if self.max_in_flight == 0 {
            return Err(ConfigError::InFlight);
        }
        Ok(())
    }

    pub fn databases_dir(&self) -> PathBuf {
        self.data_root.join("databases")
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.data_root.join("sessions")
    }
}
