use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("environment variable {name}={value:?} is invalid")]
    Env { name: &'static str, value: String },
    #[error("quorum must be at least 1")]
    Quorum,
}

/// Service settings. Read from a TOML file, then overridden by `SCENEQA_REVIEW_*` variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// Append-only verdict log.
    pub log_path: PathBuf,
    /// QA corpus, one item per line.
    pub corpus_path: PathBuf,
    /// Canonical scenes, one document per line.
    pub scenes_path: PathBuf,
    /// Directory holding rendered assets; review renders go under `review/`.
    pub asset_root: PathBuf,
    /// Accept (or edit) verdicts needed before an item is exported.
    pub quorum: usize,
    /// Whether edited items count as passing for export.
    pub edits_pass: bool,
    pub page_size: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            log_path: "review/verdicts.jsonl".into(),
            corpus_path: "corpus.jsonl".into(),
            scenes_path: "scenes.jsonl".into(),
            asset_root: "assets".into(),
            quorum: 1,
            edits_pass: true,
            page_size: 50,
        }
    }
}

impl ServiceConfig {
    /// Loads `path` if given, then applies environment overrides from `env`.
    pub fn load(
        path: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                toml::from_str(&text).map_err(|e| ConfigError::Parse {
                    path: p.to_path_buf(),
                    message: e.to_string(),
                })?
            }
            None => ServiceConfig::default(),
        };
        cfg.apply_env(env)?;
        if cfg.quorum == 0 {
            return Err(ConfigError::Quorum);
        }
        Ok(cfg)
    }

    /// [`load`](Self::load) with the process environment.
    pub fn from_env(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load(path, |k| std::env::var(k).ok())
    }

    fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(name: &'static str, v: String) -> Result<T, ConfigError> {
            v.parse().map_err(|_| ConfigError::Env { name, value: v })
        }
        if let Some(v) = env("SCENEQA_REVIEW_HOST") {
            self.host = v;
        }
        if let Some(v) = env("SCENEQA_REVIEW_PORT") {
            self.port = num("SCENEQA_REVIEW_PORT", v)?;
        }
        if let Some(v) = env("SCENEQA_REVIEW_LOG") {
            self.log_path = v.into();
        }
        if let Some(v) = env("SCENEQA_REVIEW_CORPUS") {
            self.corpus_path = v.into();
        }
        if let Some(v) = env("SCENEQA_REVIEW_SCENES") {
            self.scenes_path = v.into();
        }
        if let Some(v) = env("SCENEQA_REVIEW_ASSETS") {
            self.asset_root = v.into();
        }
        if let Some(v) = env("SCENEQA_REVIEW_QUORUM") {
            self.quorum = num("SCENEQA_REVIEW_QUORUM", v)?;
        }
        if let Some(v) = env("SCENEQA_REVIEW_EDITS_PASS") {
            self.edits_pass = num("SCENEQA_REVIEW_EDITS_PASS", v)?;
        }
        Ok(())
    }
}
