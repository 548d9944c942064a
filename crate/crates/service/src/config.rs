//! Service configuration: a TOML file, then `SWITCHLENS_*` environment overrides.
//!
//! ```toml
//! bind = "127.0.0.1"
//! port = 7878
//! store = "switchlens.db"
//! trap_horizon_secs = 604800
//! discretization = "median"        # or "fixed:<d1>,<d2>,<d3>"
//! timezone = "+02:00"
//! lexicon = "phrases.toml"         # optional; the built-in lexicon otherwise
//! min_support = "0.5"
//! min_confidence = "0.5"
//! cue_min_support = "0.5"
//! cue_max_len = 4
//! default_resumption_lag_secs = 300
//! ```

use std::path::{Path, PathBuf};

use chrono::FixedOffset;
use serde::Deserialize;
use switchlens_core::cues::DEFAULT_MAX_LEN;
use switchlens_core::{Discretization, Threshold, TrapHorizon};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Syntax(String),
    #[error("invalid value for {key}: {message}")]
    Value { key: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub bind: String,
    pub port: u16,
    pub store: PathBuf,
    pub trap_horizon: TrapHorizon,
    pub discretization: Discretization,
    pub timezone: FixedOffset,
    pub lexicon: Option<PathBuf>,
    pub min_support: Threshold,
    pub min_confidence: Threshold,
    pub cue_min_support: Threshold,
    pub cue_max_len: usize,
    pub default_resumption_lag_secs: u64,
}

impl Default for Config {
    fn default() -> Self {
        let half = Threshold::ratio(1, 2).expect("1/2 is a valid threshold");
        Config {
            bind: "127.0.0.1".into(),
            port: 7878,
            store: PathBuf::from("switchlens.db"),
            trap_horizon: TrapHorizon::default(),
            discretization: Discretization::median(),
            timezone: FixedOffset::east_opt(0).expect("UTC"),
            lexicon: None,
            min_support: half,
            min_confidence: half,
            cue_min_support: half,
            cue_max_len: DEFAULT_MAX_LEN,
            default_resumption_lag_secs: 300,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    bind: Option<String>,
    port: Option<u16>,
    store: Option<PathBuf>,
    trap_horizon_secs: Option<u64>,
    discretization: Option<String>,
    timezone: Option<String>,
    lexicon: Option<PathBuf>,
    min_support: Option<Threshold>,
    min_confidence: Option<Threshold>,
    cue_min_support: Option<Threshold>,
    cue_max_len: Option<usize>,
    default_resumption_lag_secs: Option<u64>,
}

/// Parses `Z`, `UTC` or a `+HH:MM` / `-HH:MM` offset.
pub fn parse_timezone(s: &str) -> Result<FixedOffset, String> {
    match s.trim() {
        "Z" | "UTC" | "utc" => Ok(FixedOffset::east_opt(0).expect("UTC")),
        other => other
            .parse::<FixedOffset>()
            .map_err(|_| format!("`{other}` is not an offset like +02:00")),
    }
}

fn value_err(key: &'static str) -> impl Fn(String) -> ConfigError {
    move |message| ConfigError::Value { key, message }
}

impl Config {
    /// Parses a TOML document on top of the defaults.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut c = Config::default();
        if let Some(v) = file.bind {
            c.bind = v;
        }
        if let Some(v) = file.port {
            c.port = v;
        }
        if let Some(v) = file.store {
            c.store = v;
        }
        if let Some(v) = file.trap_horizon_secs {
            c.set("trap_horizon_secs", &v.to_string())?;
        }
        if let Some(v) = file.discretization {
            c.set("discretization", &v)?;
        }
        if let Some(v) = file.timezone {
            c.set("timezone", &v)?;
        }
        c.lexicon = file.lexicon.or(c.lexicon);
        c.min_support = file.min_support.unwrap_or(c.min_support);
        c.min_confidence = file.min_confidence.unwrap_or(c.min_confidence);
        c.cue_min_support = file.cue_min_support.unwrap_or(c.cue_min_support);
        if let Some(v) = file.cue_max_len {
            c.set("cue_max_len", &v.to_string())?;
        }
        if let Some(v) = file.default_resumption_lag_secs {
            c.set("default_resumption_lag_secs", &v.to_string())?;
        }
        Ok(c)
    }

    /// Reads `path` if given, then applies environment overrides from `env`.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut c = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                Config::from_toml(&text)?
            }
            None => Config::default(),
        };
        c.apply_env(env)?;
        Ok(c)
    }

    /// Applies `SWITCHLENS_<KEY>` variables; unrelated variables are ignored.
    pub fn apply_env(&mut self, env: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (k, v) in env {
            if let Some(key) = k.strip_prefix("SWITCHLENS_") {
                let key = key.to_ascii_lowercase();
                if let Some(&known) = KEYS.iter().find(|k| **k == key) {
                    self.set(known, &v)?;
                }
            }
        }
        Ok(())
    }

    /// Sets one key from its string form.
    pub fn set(&mut self, key: &'static str, value: &str) -> Result<(), ConfigError> {
        let err = value_err(key);
        match key {
            "bind" => self.bind = value.to_string(),
            "port" => self.port = value.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?,
            "store" => self.store = PathBuf::from(value),
            "trap_horizon_secs" => {
                let secs: u64 = value.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
                self.trap_horizon = TrapHorizon::from_secs(secs).ok_or_else(|| err("must be positive".into()))?;
            }
            "discretization" => self.discretization = value.parse().map_err(|e| err(format!("{e}")))?,
            "timezone" => self.timezone = parse_timezone(value).map_err(&err)?,
            "lexicon" => self.lexicon = Some(PathBuf::from(value)),
            "min_support" => self.min_support = value.parse().map_err(|e| err(format!("{e}")))?,
            "min_confidence" => self.min_confidence = value.parse().map_err(|e| err(format!("{e}")))?,
            "cue_min_support" => self.cue_min_support = value.parse().map_err(|e| err(format!("{e}")))?,
            "cue_max_len" => {
                let n: usize = value.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
                if n < 2 {
                    return Err(err("must be at least 2".into()));
                }
                self.cue_max_len = n;
            }
            "default_resumption_lag_secs" => {
                let n: u64 = value.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
                if n == 0 {
                    return Err(err("must be positive".into()));
                }
                self.default_resumption_lag_secs = n;
            }
            _ => return Err(err("unknown key".into())),
        }
        Ok(())
    }
}

const KEYS: &[&str] = &[
    "bind",
    "port",
    "store",
    "trap_horizon_secs",
    "discretization",
    "timezone",
    "lexicon",
    "min_support",
    "min_confidence",
    "cue_min_support",
    "cue_max_len",
    "default_resumption_lag_secs",
];
