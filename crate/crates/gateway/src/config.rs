//! Service configuration.
//!
//! Values come from three layers: command-line flags, `RFID_*` environment
//! variables and an optional TOML file. Flags win over the environment,
//! which wins over the file. The reader source is taken as a unit from the
//! highest layer that names one.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rfid_attendance::{AttendanceConfig, ReaderConfig};
use serde::Deserialize;
use thiserror::Error;

use crate::api::Tokens;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_STORE: &str = "rfid-store";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid value {value:?} for {var}")]
    Env { var: &'static str, value: String },
    #[error("invalid listen address {0:?}")]
    Listen(String),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("exactly one reader source is required, got {0}")]
    ReaderSource(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReaderSource {
    /// Play a scenario file through the simulator.
    Scenario(PathBuf),
    /// Connect to a TCP endpoint that streams reader frames.
    Socket(String),
    /// Read frames from a serial device or pipe.
    Device(PathBuf),
}

/// One configuration layer: flags, environment or file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub listen: Option<String>,
    pub store: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub socket: Option<String>,
    pub device: Option<PathBuf>,
    pub debounce_s: Option<f64>,
    pub per_read_s: Option<f64>,
    pub anti_collision: Option<bool>,
    /// Scenario playback rate; 0 plays without pauses.
    pub speed: Option<f64>,
    pub retry_max_s: Option<f64>,
    pub admin_token: Option<String>,
    pub operator_token: Option<String>,
}

impl Layer {
    pub fn from_file(path: &Path) -> Result<Layer, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    /// Reads the `RFID_*` variables through `get`.
    pub fn from_env<F>(get: F) -> Result<Layer, ConfigError>
    where
        F: Fn(&str) -> Option<String>,
    {
        fn num(var: &'static str, v: Option<String>) -> Result<Option<f64>, ConfigError> {
            v.map(|value| value.trim().parse().map_err(|_| ConfigError::Env { var, value })).transpose()
        }
        let anti_collision = match get("RFID_ANTI_COLLISION") {
            None => None,
            Some(v) => Some(parse_switch(&v).ok_or(ConfigError::Env { var: "RFID_ANTI_COLLISION", value: v })?),
        };
        Ok(Layer {
            listen: get("RFID_LISTEN"),
            store: get("RFID_STORE").map(PathBuf::from),
            scenario: get("RFID_SCENARIO").map(PathBuf::from),
            socket: get("RFID_SOCKET"),
            device: get("RFID_DEVICE").map(PathBuf::from),
            debounce_s: num("RFID_DEBOUNCE_S", get("RFID_DEBOUNCE_S"))?,
            per_read_s: num("RFID_PER_READ_S", get("RFID_PER_READ_S"))?,
            anti_collision,
            speed: num("RFID_SPEED", get("RFID_SPEED"))?,
            retry_max_s: num("RFID_RETRY_MAX_S", get("RFID_RETRY_MAX_S"))?,
            admin_token: get("RFID_ADMIN_TOKEN"),
            operator_token: get("RFID_OPERATOR_TOKEN"),
        })
    }

    /// Flags over environment over file.
    pub fn layered(flags: Layer, config_file: Option<&Path>) -> Result<Layer, ConfigError> {
        let env = Layer::from_env(|k| std::env::var(k).ok())?;
        let file = match config_file {
            Some(p) => Layer::from_file(p)?,
            None => Layer::default(),
        };
        Ok(flags.over(env.over(file)))
    }

    fn sources(&self) -> Vec<ReaderSource> {
        let mut out = Vec::new();
        if let Some(p) = &self.scenario {
            out.push(ReaderSource::Scenario(p.clone()));
        }
        if let Some(a) = &self.socket {
            out.push(ReaderSource::Socket(a.clone()));
        }
        if let Some(p) = &self.device {
            out.push(ReaderSource::Device(p.clone()));
        }
        out
    }

    /// `self` over `lower`, field by field, except the reader source.
    pub fn over(self, lower: Layer) -> Layer {
        let has_source = !self.sources().is_empty();
        let (scenario, socket, device) = if has_source {
            (self.scenario, self.socket, self.device)
        } else {
            (lower.scenario, lower.socket, lower.device)
        };
        Layer {
            listen: self.listen.or(lower.listen),
            store: self.store.or(lower.store),
            scenario,
            socket,
            device,
            debounce_s: self.debounce_s.or(lower.debounce_s),
            per_read_s: self.per_read_s.or(lower.per_read_s),
            anti_collision: self.anti_collision.or(lower.anti_collision),
            speed: self.speed.or(lower.speed),
            retry_max_s: self.retry_max_s.or(lower.retry_max_s),
            admin_token: self.admin_token.or(lower.admin_token),
            operator_token: self.operator_token.or(lower.operator_token),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub listen: SocketAddr,
    pub store_dir: PathBuf,
    pub source: ReaderSource,
    pub attendance: AttendanceConfig,
    pub reader: ReaderConfig,
    pub speed: f64,
    pub retry_max: Duration,
    pub tokens: Tokens,
}

impl GatewayConfig {
    pub fn resolve(layer: Layer) -> Result<GatewayConfig, ConfigError> {
        let mut sources = layer.sources();
        if sources.len() != 1 {
            return Err(ConfigError::ReaderSource(sources.len()));
        }
        let listen_text = layer.listen.unwrap_or_else(|| DEFAULT_LISTEN.to_string());
        let listen = listen_text.parse().map_err(|_| ConfigError::Listen(listen_text))?;

        let debounce_s = positive("debounce_s", layer.debounce_s.unwrap_or(2.0))?;
        let per_read_s = positive("per_read_s", layer.per_read_s.unwrap_or(0.2))?;
        let retry_max_s = positive("retry_max_s", layer.retry_max_s.unwrap_or(5.0))?;
        let speed = layer.speed.unwrap_or(1.0);
        if !speed.is_finite() || speed < 0.0 {
            return Err(ConfigError::NonPositive("speed"));
        }
        let reader = ReaderConfig {
            per_read_seconds: per_read_s,
            anti_collision: layer.anti_collision.unwrap_or(true),
            ..ReaderConfig::default()
        };
        Ok(GatewayConfig {
            listen,
            store_dir: layer.store.unwrap_or_else(|| PathBuf::from(DEFAULT_STORE)),
            source: sources.remove(0),
            attendance: AttendanceConfig { debounce_s },
            reader,
            speed,
            retry_max: Duration::from_secs_f64(retry_max_s),
            tokens: Tokens { admin: layer.admin_token, operator: layer.operator_token },
        })
    }
}

/// Accepts on/off, true/false, yes/no and 1/0.
pub fn parse_switch(v: &str) -> Option<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Some(true),
        "off" | "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn positive(name: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::NonPositive(name))
    }
}
