//! Web search behind a provider trait: a fixture-backed stub for tests and
//! offline runs, and a generic HTTP JSON API client.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub title: String,
    pub url: String,
    #[serde(default)]
    pub snippet: String,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search provider error: {0}")]
    Provider(String),
}

pub trait SearchProvider: Send + Sync {
    fn search(&self, query: &str) -> Result<Vec<SearchHit>, SearchError>;
}

/// Deterministic stub provider. Exact-query entries win; other queries get
/// the default hit list (possibly empty).
#[derive(Debug, Default, Clone)]
pub struct StubSearchProvider {
    by_query: BTreeMap<String, Vec<SearchHit>>,
    default_hits: Vec<SearchHit>,
}

impl StubSearchProvider {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_default_hits(hits: Vec<SearchHit>) -> Self {
        Self {
            by_query: BTreeMap::new(),
            default_hits: hits,
        }
    }

    pub fn insert(&mut self, query: impl Into<String>, hits: Vec<SearchHit>) {
        self.by_query.insert(query.into(), hits);
    }
}

impl SearchProvider for StubSearchProvider {
    fn search(&self, query: &str) -> Result<Vec<SearchHit>, SearchError> {
        Ok(self
            .by_query
            .get(query)
            .cloned()
            .unwrap_or_else(|| self.default_hits.clone()))
    }
}

/// Reference HTTP implementation: GET `{endpoint}?q={query}` with a bearer
/// key, expecting `{"results": [{"title", "url", "snippet"}]}`.
pub struct HttpSearchProvider {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpSearchProvider {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("building HTTP client");
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            client,
        }
    }
}

#[derive(Deserialize)]
struct SearchResponse {
    #[serde(default)]
    results: Vec<SearchHit>,
}

impl SearchProvider for HttpSearchProvider {
    fn search(&self, query: &str) -> Result<Vec<SearchHit>, SearchError> {
        let mut endpoint = url::Url::parse(&self.endpoint)
            .map_err(|e| SearchError::Provider(format!("bad endpoint: {e}")))?;
        endpoint.query_pairs_mut().append_pair("q", query);
        let mut builder = self.client.get(endpoint.as_str());
        if !self.api_key.is_empty() {
            builder = builder.bearer_auth(&self.api_key);
        }
        let response = builder
            .send()
            .map_err(|e| SearchError::Provider(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(SearchError::Provider(format!("HTTP {status}")));
        }
        let parsed: SearchResponse = response
            .json()
            .map_err(|e| SearchError::Provider(e.to_string()))?;
        Ok(parsed.results)
    }
}
