use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use matec_core::gateway::FaultInjection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Scripted offline backend.
    Mock {
        #[serde(default)]
        seed: u64,
        /// Fault spec such as `timeout@CriticalCare`.
        #[serde(default)]
        fault: Option<String>,
        /// Sleep for the reported latency of each call.
        #[serde(default)]
        simulate_latency: bool,
    },
    /// An OpenAI-compatible chat completions endpoint. The key comes from
    /// `MATEC_LLM_API_KEY`.
    Live { endpoint: String, model: String },
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Mock { seed: 0, fault: None, simulate_latency: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    #[serde(default)]
    pub backend: BackendConfig,
    /// Roster JSON; the bundled roster when absent.
    #[serde(default)]
    pub roster: Option<PathBuf>,
    pub store_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_timeout_ms")]
    pub agent_timeout_ms: u64,
    #[serde(default = "default_monitor_secs")]
    pub monitor_interval_secs: u64,
    /// Feed the senior physician every Ok answer, not only the physicians'.
    #[serde(default = "default_true")]
    pub synthesis_sees_all_roles: bool,
    /// Who a unit's gap digest is addressed to. Routing only; nothing is sent.
    #[serde(default = "default_recipients")]
    pub digest_recipients: Vec<String>,
}

fn default_parallelism() -> usize {
    5
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_monitor_secs() -> u64 {
    60
}

fn default_true() -> bool {
    true
}

fn default_recipients() -> Vec<String> {
    ["Medical director", "Nurse manager", "Patient safety officer"].map(String::from).to_vec()
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ServiceConfig {
    /// Reads and validates a TOML config. Relative paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<ServiceConfig, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut config: ServiceConfig =
            toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.store_dir = base.join(&config.store_dir);
        config.roster = config.roster.map(|r| base.join(r));
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.parallelism == 0 {
            return invalid("parallelism must be at least 1".into());
        }
        if self.agent_timeout_ms == 0 {
            return invalid("agent_timeout_ms must be positive".into());
        }
        if self.monitor_interval_secs == 0 {
            return invalid("monitor_interval_secs must be positive".into());
        }
        if !self.store_dir.is_dir() {
            return invalid(format!("store_dir {} is not an existing directory", self.store_dir.display()));
        }
        if let Some(r) = &self.roster {
            if !r.is_file() {
                return invalid(format!("roster {} does not exist", r.display()));
            }
        }
        match &self.backend {
            BackendConfig::Mock { fault: Some(f), .. } => {
                f.parse::<FaultInjection>().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
            BackendConfig::Live { endpoint, model } if endpoint.trim().is_empty() || model.trim().is_empty() => {
                return invalid("live backend needs an endpoint and a model".into());
            }
            _ => {}
        }
        Ok(())
    }

    pub fn log_path(&self) -> PathBuf {
        self.store_dir.join("records.log")
    }

    pub fn reference_path(&self) -> PathBuf {
        self.store_dir.join("reference.vec")
    }
}
