//! Service configuration: a flat `key = value` file, overridable by
//! `MECO_`-prefixed environment variables.
//!
//! ```text
//! # comments and blank lines are ignored
//! listen_address = 127.0.0.1:8080
//! data_dir = ./data
//! similarity.weight.keywords = 2/5
//! similarity.threshold = 0.2
//! fetch.timeout = 15s
//! ```
//!
//! The environment variable for a key is `MECO_` followed by the key in
//! upper case with dots replaced by underscores, e.g.
//! `MECO_SIMILARITY_WEIGHT_TEXT`. Environment values win over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use collab_ir_core::fetcher::FetchConfig;
use collab_ir_core::repository::{RepositoryConfig, WeightsError};
use collab_ir_core::session::SessionConfig;
use num_rational::Ratio;
use thiserror::Error;

pub const ENV_PREFIX: &str = "MECO_";

/// Every recognized key, in documentation order.
pub const KEYS: &[&str] = &[
    "listen_address",
    "data_dir",
    "similarity.weight.keywords",
    "similarity.weight.domains",
    "similarity.weight.indicators",
    "similarity.weight.text",
    "similarity.threshold",
    "fetch.timeout",
    "fetch.max_bytes",
    "fetch.max_inflight",
    "session.heartbeat_timeout",
    "session.recent_queries",
    "storage.snapshot_interval",
    "storage.fsync",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: `{value}` ({reason})")]
    BadValue { key: String, value: String, reason: String },
    #[error(transparent)]
    Weights(#[from] WeightsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub listen_address: String,
    pub data_dir: PathBuf,
    pub repository: RepositoryConfig,
    pub fetch: FetchConfig,
    pub session: SessionConfig,
    pub fsync: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen_address: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            repository: RepositoryConfig::default(),
            fetch: FetchConfig::default(),
            session: SessionConfig::default(),
            fsync: true,
        }
    }
}

/// Environment variable name for a config key.
pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "_").to_ascii_uppercase())
}

/// Parses the flat `key = value` format. Later lines override earlier ones.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut pairs = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        pairs.insert(key.to_string(), value.trim().to_string());
    }
    Ok(pairs)
}

fn bad(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::BadValue { key: key.into(), value: value.into(), reason: reason.to_string() }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

/// Accepts `p/q` fractions as well as decimals.
fn parse_real(key: &str, value: &str) -> Result<f64, ConfigError> {
    if value.contains('/') {
        let r: Ratio<i64> = parse(key, value)?;
        Ok(*r.numer() as f64 / *r.denom() as f64)
    } else {
        let x: f64 = parse(key, value)?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(bad(key, value, "not a finite number"))
        }
    }
}

/// Accepts `15s`, `500ms`, `2m` and bare seconds.
fn parse_duration(key: &str, value: &str) -> Result<Duration, ConfigError> {
    if let Ok(secs) = value.parse::<f64>() {
        return Duration::try_from_secs_f64(secs).map_err(|e| bad(key, value, e));
    }
    humantime::parse_duration(value).map_err(|e| bad(key, value, e))
}

impl ServiceConfig {
    /// Applies `pairs` on top of `self` and validates the result.
    pub fn with_pairs(mut self, pairs: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        for (key, value) in pairs {
            let v = value.as_str();
            let k = key.as_str();
            match k {
                "listen_address" => self.listen_address = v.to_string(),
                "data_dir" => self.data_dir = PathBuf::from(v),
                "similarity.weight.keywords" => self.repository.weights.keywords = parse_real(k, v)?,
                "similarity.weight.domains" => self.repository.weights.domains = parse_real(k, v)?,
                "similarity.weight.indicators" => self.repository.weights.indicators = parse_real(k, v)?,
                "similarity.weight.text" => self.repository.weights.text = parse_real(k, v)?,
                "similarity.threshold" => self.repository.threshold = parse_real(k, v)?,
                "fetch.timeout" => self.fetch.timeout = parse_duration(k, v)?,
                "fetch.max_bytes" => self.fetch.max_bytes = parse(k, v)?,
                "fetch.max_inflight" => self.fetch.max_inflight = parse(k, v)?,
                "session.heartbeat_timeout" => self.session.heartbeat_timeout = parse_duration(k, v)?,
                "session.recent_queries" => self.session.recent_queries = parse(k, v)?,
                "storage.snapshot_interval" => self.repository.snapshot_interval = parse(k, v)?,
                "storage.fsync" => self.fsync = parse(k, v)?,
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.repository.validate()?;
        if self.fetch.max_inflight == 0 {
            return Err(bad("fetch.max_inflight", "0", "must be at least 1"));
        }
        if self.session.recent_queries == 0 {
            return Err(bad("session.recent_queries", "0", "must be at least 1"));
        }
        if self.session.heartbeat_timeout.is_zero() {
            return Err(bad("session.heartbeat_timeout", "0", "must be positive"));
        }
        Ok(())
    }

    /// File contents, then environment overrides, over the defaults.
    pub fn from_sources(
        file: Option<&str>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut pairs = match file {
            Some(text) => parse_pairs(text)?,
            None => BTreeMap::new(),
        };
        let env: BTreeMap<String, String> = env.into_iter().collect();
        for key in KEYS {
            if let Some(value) = env.get(&env_name(key)) {
                pairs.insert(key.to_string(), value.trim().to_string());
            }
        }
        Self::default().with_pairs(&pairs)
    }

    /// Reads `path` (if given) and the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.into(), source })?),
            None => None,
        };
        Self::from_sources(text.as_deref(), std::env::vars())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ServiceConfig::from_sources(None, []).unwrap();
        assert_eq!(c, ServiceConfig::default());
        assert_eq!(c.fetch.max_bytes, 5 * 1024 * 1024);
        assert_eq!(c.repository.threshold, 0.2);
    }

    #[test]
    fn file_and_env_layering() {
        let file = "\
# demo
listen_address = 0.0.0.0:9000
similarity.weight.keywords = 1/4
similarity.weight.text = 0.35
fetch.timeout = 500ms
session.heartbeat_timeout = 10
";
        let env = [(env_name("similarity.weight.keywords"), "0.25".to_string()), ("HOME".into(), "/x".into())];
        let c = ServiceConfig::from_sources(Some(file), env).unwrap();
        assert_eq!(c.listen_address, "0.0.0.0:9000");
        assert_eq!(c.repository.weights.keywords, 0.25);
        assert_eq!(c.fetch.timeout, Duration::from_millis(500));
        assert_eq!(c.session.heartbeat_timeout, Duration::from_secs(10));
    }

    #[test]
    fn env_names() {
        assert_eq!(env_name("fetch.max_bytes"), "MECO_FETCH_MAX_BYTES");
        assert_eq!(env_name("listen_address"), "MECO_LISTEN_ADDRESS");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ServiceConfig::from_sources(Some("nonsense"), []), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(ServiceConfig::from_sources(Some("colour = red"), []), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(
            ServiceConfig::from_sources(Some("similarity.weight.keywords = 0.5"), []),
            Err(ConfigError::Weights(WeightsError::BadSum(_)))
        ));
        assert!(matches!(
            ServiceConfig::from_sources(Some("similarity.threshold = 1.5"), []),
            Err(ConfigError::Weights(WeightsError::BadThreshold(_)))
        ));
        assert!(matches!(
            ServiceConfig::from_sources(Some("fetch.max_bytes = lots"), []),
            Err(ConfigError::BadValue { .. })
        ));
        let env = [(env_name("storage.fsync"), "maybe".to_string())];
        assert!(ServiceConfig::from_sources(None, env).is_err());
    }

    #[test]
    fn weights_within_tolerance() {
        let file = "similarity.weight.keywords = 0.4000000000001";
        assert!(ServiceConfig::from_sources(Some(file), []).is_ok());
        let file = "similarity.weight.keywords = 0.40001";
        assert!(ServiceConfig::from_sources(Some(file), []).is_err());
    }
}
