//! Page fetching behind a trait, so sessions can run against the real HTTP
//! stack or canned fixture pages.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct FetchedPage {
    pub final_url: String,
    pub content_type: Option<String>,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("request to {url} failed: {reason}")]
    Network { url: String, reason: String },
    #[error("HTTP {status} fetching {url}")]
    Status { status: u16, url: String },
}

pub trait PageFetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<FetchedPage, FetchError>;
}

/// Plain HTTP(S) GET with a configurable user agent and timeout.
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    pub fn new(user_agent: &str, timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .user_agent(user_agent)
            .timeout(timeout)
            .build()
            .expect("building HTTP client");
        Self { client }
    }
}

impl PageFetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<FetchedPage, FetchError> {
        let response = self
            .client
            .get(url)
            .send()
            .map_err(|e| FetchError::Network {
                url: url.to_string(),
                reason: e.to_string(),
            })?;
        let status = response.status();
        if !status.is_success() {
            return Err(FetchError::Status {
                status: status.as_u16(),
                url: url.to_string(),
            });
        }
        let final_url = response.url().to_string();
        let content_type = response
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .map(|s| s.to_string());
        let bytes = response
            .bytes()
            .map_err(|e| FetchError::Network {
                url: url.to_string(),
                reason: e.to_string(),
            })?
            .to_vec();
        Ok(FetchedPage {
            final_url,
            content_type,
            bytes,
        })
    }
}

/// In-memory fetcher serving canned pages keyed by exact URL; used by tests
/// and offline runs.
#[derive(Debug, Default, Clone)]
pub struct FixtureFetcher {
    pages: BTreeMap<String, (Option<String>, Vec<u8>)>,
}

#[derive(Deserialize)]
struct ManifestEntry {
    url: String,
    #[serde(default)]
    content_type: Option<String>,
    file: String,
}

impl FixtureFetcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        url: impl Into<String>,
        content_type: Option<&str>,
        bytes: impl Into<Vec<u8>>,
    ) {
        self.pages.insert(
            url.into(),
            (content_type.map(|s| s.to_string()), bytes.into()),
        );
    }

    /// Loads a manifest: a JSON array of `{url, content_type, file}` records
    /// with file paths relative to the manifest.
    pub fn from_manifest(path: &Path) -> std::io::Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let entries: Vec<ManifestEntry> = serde_json::from_str(&raw)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        let root = path.parent().unwrap_or_else(|| Path::new("."));
        let mut fetcher = Self::new();
        for entry in entries {
            let bytes = std::fs::read(root.join(&entry.file))?;
            fetcher.pages.insert(entry.url, (entry.content_type, bytes));
        }
        Ok(fetcher)
    }
}

impl PageFetcher for FixtureFetcher {
    fn fetch(&self, url: &str) -> Result<FetchedPage, FetchError> {
        match self.pages.get(url) {
            Some((content_type, bytes)) => Ok(FetchedPage {
                final_url: url.to_string(),
                content_type: content_type.clone(),
                bytes: bytes.clone(),
            }),
            None => Err(FetchError::Network {
                url: url.to_string(),
                reason: "no fixture page for this URL".into(),
            }),
        }
    }
}
