//! Runtime configuration: a TOML file with per-section overrides, plus the
//! assembly of live/record/replay dependencies from it.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentDeps;
use crate::browser::{
    BrowserConfig, ConverterRegistry, FixtureFetcher, HttpFetcher, HttpSearchProvider, PageFetcher,
    SearchHit, SearchProvider, StubSearchProvider,
};
use crate::gateway::{Gateway, HttpProvider, RetryPolicy, Transcript};
use crate::terminal::Terminal;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewaySection {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub max_tokens: u32,
}

impl Default for GatewaySection {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            retries: 3,
            backoff_ms: 250,
            timeout_secs: 120,
            max_tokens: 4096,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BrowserSection {
    pub viewport_size: usize,
    pub user_agent: String,
    pub timeout_secs: u64,
    pub cache_dir: Option<PathBuf>,
    /// Serve pages from a fixture manifest instead of the network.
    pub fixture_pages: Option<PathBuf>,
}

impl Default for BrowserSection {
    fn default() -> Self {
        let defaults = BrowserConfig::default();
        Self {
            viewport_size: defaults.viewport_size,
            user_agent: defaults.user_agent,
            timeout_secs: 30,
            cache_dir: None,
            fixture_pages: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSection {
    /// "stub" or "http".
    pub provider: String,
    pub endpoint: String,
    pub api_key_env: String,
    /// JSON file of stub hits: either a list, or a map from query to list.
    pub stub_results: Option<PathBuf>,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            provider: "stub".into(),
            endpoint: String::new(),
            api_key_env: "SEARCH_API_KEY".into(),
            stub_results: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TerminalSection {
    pub interpreter: Vec<String>,
    pub timeout_secs: u64,
    pub output_cap: usize,
    pub deny_network: bool,
}

impl Default for TerminalSection {
    fn default() -> Self {
        Self {
            interpreter: vec!["python3".into()],
            timeout_secs: 60,
            output_cap: 10_000,
            deny_network: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub max_steps: usize,
    pub digest_cap: usize,
    pub ensemble: usize,
    pub jury: bool,
    pub jury_rounds: usize,
    pub task_timeout_secs: u64,
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            max_steps: 20,
            digest_cap: 8000,
            ensemble: 3,
            jury: true,
            jury_rounds: 2,
            task_timeout_secs: 900,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct TemperatureSection {
    pub planner: f64,
    pub channel: f64,
    pub jury: f64,
    pub formatter: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Config {
    pub gateway: GatewaySection,
    pub browser: BrowserSection,
    pub search: SearchSection,
    pub terminal: TerminalSection,
    pub run: RunSection,
    pub temperature: TemperatureSection,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&raw)?)
    }

    pub fn browser_config(&self) -> BrowserConfig {
        BrowserConfig {
            viewport_size: self.browser.viewport_size,
            user_agent: self.browser.user_agent.clone(),
            timeout: Duration::from_secs(self.browser.timeout_secs),
            cache_dir: self.browser.cache_dir.clone(),
        }
    }

    pub fn terminal(&self) -> Terminal {
        Terminal {
            interpreter: self.terminal.interpreter.clone(),
            deny_network: self.terminal.deny_network,
            ..Terminal::default()
        }
    }
}

/// How the gateway talks to a model for this invocation.
#[derive(Debug, Clone, Default)]
pub enum GatewayMode {
    #[default]
    Live,
    /// Record new responses into `<dir>/transcript.jsonl`.
    Record(PathBuf),
    /// Replay from every `*.jsonl` under the directory; no network.
    Replay(PathBuf),
}

/// Builds the gateway plus tool dependencies for a run.
pub fn assemble(config: &Config, mode: &GatewayMode) -> Result<AgentDeps, ConfigError> {
    let retry = RetryPolicy {
        attempts: config.gateway.retries.max(1),
        base_backoff: Duration::from_millis(config.gateway.backoff_ms),
    };
    let gateway = match mode {
        GatewayMode::Replay(dir) => Gateway::replay(Transcript::load_dir(dir)?),
        GatewayMode::Record(dir) => {
            Gateway::record(live_provider(config)?, &dir.join("transcript.jsonl"), retry)?
        }
        GatewayMode::Live => Gateway::live(live_provider(config)?, retry),
    };

    let fetcher: Arc<dyn PageFetcher> = match &config.browser.fixture_pages {
        Some(manifest) => Arc::new(FixtureFetcher::from_manifest(manifest)?),
        None => Arc::new(HttpFetcher::new(
            &config.browser.user_agent,
            Duration::from_secs(config.browser.timeout_secs),
        )),
    };

    let search: Arc<dyn SearchProvider> = match config.search.provider.as_str() {
        "http" => {
            if config.search.endpoint.is_empty() {
                return Err(ConfigError::Invalid(
                    "search.provider = \"http\" needs search.endpoint".into(),
                ));
            }
            let key = std::env::var(&config.search.api_key_env).unwrap_or_default();
            Arc::new(HttpSearchProvider::new(
                &config.search.endpoint,
                key,
                Duration::from_secs(30),
            ))
        }
        "stub" => Arc::new(load_stub_search(config)?),
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown search.provider `{other}` (expected \"stub\" or \"http\")"
            )))
        }
    };

    Ok(AgentDeps {
        gateway: Arc::new(gateway),
        fetcher,
        search,
        converters: ConverterRegistry::with_builtins(),
    })
}

fn live_provider(config: &Config) -> Result<Arc<HttpProvider>, ConfigError> {
    let api_key = std::env::var(&config.gateway.api_key_env).unwrap_or_default();
    Ok(Arc::new(HttpProvider::new(
        &config.gateway.endpoint,
        api_key,
        Duration::from_secs(config.gateway.timeout_secs),
    )))
}

fn load_stub_search(config: &Config) -> Result<StubSearchProvider, ConfigError> {
    let Some(path) = &config.search.stub_results else {
        return Ok(StubSearchProvider::empty());
    };
    let raw = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&raw)
        .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
    match value {
        serde_json::Value::Array(_) => {
            let hits: Vec<SearchHit> =
                serde_json::from_value(value).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            Ok(StubSearchProvider::with_default_hits(hits))
        }
        serde_json::Value::Object(map) => {
            let mut provider = StubSearchProvider::empty();
            for (query, hits) in map {
                let hits: Vec<SearchHit> = serde_json::from_value(hits)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                provider.insert(query, hits);
            }
            Ok(provider)
        }
        _ => Err(ConfigError::Invalid(
            "stub_results must be a JSON array or object".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let config = Config::default();
        assert_eq!(config.run.max_steps, 20);
        assert_eq!(config.run.ensemble, 3);
        assert_eq!(config.run.jury_rounds, 2);
        assert_eq!(config.run.digest_cap, 8000);
        assert_eq!(config.browser.viewport_size, 5120);
        assert_eq!(config.terminal.output_cap, 10_000);
        assert_eq!(config.gateway.retries, 3);
        assert_eq!(config.temperature.planner, 0.0);
    }

    #[test]
    fn partial_toml_overrides_only_named_keys() {
        let config: Config =
            toml::from_str("[run]\nensemble = 5\n\n[gateway]\nmodel = \"local-model\"\n").unwrap();
        assert_eq!(config.run.ensemble, 5);
        assert_eq!(config.run.max_steps, 20);
        assert_eq!(config.gateway.model, "local-model");
        assert_eq!(config.gateway.retries, 3);
    }

    #[test]
    fn replay_assembly_needs_no_credentials() {
        let dir = tempfile::tempdir().unwrap();
        let config = Config::default();
        let deps = assemble(&config, &GatewayMode::Replay(dir.path().to_path_buf())).unwrap();
        // Replay gateway with an empty transcript: any request misses.
        let request = crate::gateway::CompletionRequest::single_user("m", 0.0, 16, "p");
        assert!(deps.gateway.complete(&request).is_err());
    }

    #[test]
    fn unknown_search_provider_is_invalid() {
        let mut config = Config::default();
        config.search.provider = "carrier-pigeon".into();
        assert!(matches!(
            assemble(&config, &GatewayMode::Live),
            Err(ConfigError::Invalid(_))
        ));
    }
}
