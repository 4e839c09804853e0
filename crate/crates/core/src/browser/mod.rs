//! Sessionful text browser: fetch a page, convert it to markdown, slice it
//! into fixed-size viewports, search within it, and run web searches through
//! a pluggable provider. One session serves one run; the viewport, find
//! cursor, and current address persist across calls.

mod convert;
mod fetch;
mod find;
mod search;

pub use convert::{html_to_markdown, ConvertedDoc, Converter, ConverterRegistry};
pub use fetch::{FetchError, FetchedPage, FixtureFetcher, HttpFetcher, PageFetcher};
pub use find::find_from as find_first_match;
pub use search::{HttpSearchProvider, SearchError, SearchHit, SearchProvider, StubSearchProvider};

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::char_slice;

pub const DEFAULT_VIEWPORT_SIZE: usize = 5120;

#[derive(Debug, Clone)]
pub struct BrowserConfig {
    /// Viewport size in characters.
    pub viewport_size: usize,
    pub user_agent: String,
    pub timeout: Duration,
    /// Where `download_file` keeps the raw bytes; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
}

impl Default for BrowserConfig {
    fn default() -> Self {
        Self {
            viewport_size: DEFAULT_VIEWPORT_SIZE,
            user_agent: "conclave/0.1 text-browser".into(),
            timeout: Duration::from_secs(30),
            cache_dir: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BrowserError {
    #[error("no page is loaded in this session")]
    NoPageLoaded,
    #[error("no find query is active on the current page")]
    NoActiveFind,
    #[error("navigational search for `{query}` returned no results")]
    EmptyResults { query: String },
    #[error("unsupported format: {format}")]
    UnsupportedFormat { format: String },
    #[error("invalid url `{url}`: {reason}")]
    InvalidUrl { url: String, reason: String },
    #[error(transparent)]
    Provider(#[from] SearchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScrollDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchKind {
    Informational,
    Navigational,
}

/// One page-length slice of the current document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Viewport {
    /// "Showing page i of n."
    pub header: String,
    pub body: String,
    pub address: String,
    pub title: String,
    /// Extra line shown with the viewport (find misses and the like).
    pub notice: Option<String>,
}

impl Viewport {
    /// Text form handed to the model as a tool result.
    pub fn render(&self) -> String {
        let mut out = format!(
            "Address: {}\nTitle: {}\nViewport position: {}\n",
            self.address, self.title, self.header
        );
        if let Some(notice) = &self.notice {
            out.push_str(notice);
            out.push('\n');
        }
        out.push_str("=======================\n");
        out.push_str(&self.body);
        out
    }
}

pub struct TextBrowser {
    fetcher: Arc<dyn PageFetcher>,
    search: Arc<dyn SearchProvider>,
    converters: ConverterRegistry,
    config: BrowserConfig,
    // Session state.
    current_address: Option<String>,
    page_title: String,
    page_markdown: String,
    page_chars: usize,
    viewport_index: usize,
    find_query: Option<String>,
    find_cursor: usize,
}

impl TextBrowser {
    pub fn new(
        fetcher: Arc<dyn PageFetcher>,
        search: Arc<dyn SearchProvider>,
        converters: ConverterRegistry,
        mut config: BrowserConfig,
    ) -> Self {
        config.viewport_size = config.viewport_size.max(1);
        Self {
            fetcher,
            search,
            converters,
            config,
            current_address: None,
            page_title: String::new(),
            page_markdown: String::new(),
            page_chars: 0,
            viewport_index: 1,
            find_query: None,
            find_cursor: 0,
        }
    }

    pub fn current_address(&self) -> Option<&str> {
        self.current_address.as_deref()
    }

    pub fn page_markdown(&self) -> &str {
        &self.page_markdown
    }

    pub fn viewport_index(&self) -> usize {
        self.viewport_index
    }

    pub fn page_count(&self) -> usize {
        self.page_chars.max(1).div_ceil(self.config.viewport_size)
    }

    /// Fetches a page, converts it, and shows the first viewport. Network
    /// and HTTP failures come back as an error page loaded into the session
    /// so the caller (and the model) can see and react to the reason.
    pub fn visit_page(&mut self, url: &str) -> Result<Viewport, BrowserError> {
        let parsed = url::Url::parse(url).map_err(|e| BrowserError::InvalidUrl {
            url: url.into(),
            reason: e.to_string(),
        })?;
        let page = match self.fetcher.fetch(parsed.as_str()) {
            Ok(page) => page,
            Err(e) => {
                self.load_error_page(url, &e.to_string());
                return Ok(self.viewport_at(self.viewport_index));
            }
        };
        self.load_fetched(page)
    }

    /// Fetches raw bytes, converts them through the registry, shows the text
    /// as the current page, and keeps a copy in the cache directory.
    pub fn download_file(&mut self, url: &str) -> Result<Viewport, BrowserError> {
        let parsed = url::Url::parse(url).map_err(|e| BrowserError::InvalidUrl {
            url: url.into(),
            reason: e.to_string(),
        })?;
        let page = match self.fetcher.fetch(parsed.as_str()) {
            Ok(page) => page,
            Err(e) => {
                self.load_error_page(url, &e.to_string());
                return Ok(self.viewport_at(self.viewport_index));
            }
        };
        if let Some(dir) = self.config.cache_dir.clone() {
            let _ = self.cache_bytes(&dir, &page);
        }
        self.load_fetched(page)
    }

    fn load_fetched(&mut self, page: FetchedPage) -> Result<Viewport, BrowserError> {
        let converter = self
            .converters
            .lookup(page.content_type.as_deref(), &page.final_url)
            .map_err(|format| BrowserError::UnsupportedFormat { format })?;
        let doc = converter.convert(&page.bytes);
        let title = doc.title.unwrap_or_else(|| page_name(&page.final_url));
        self.load_document(page.final_url, title, doc.text);
        Ok(self.viewport_at(self.viewport_index))
    }

    fn cache_bytes(&self, dir: &std::path::Path, page: &FetchedPage) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let digest = Sha256::digest(page.final_url.as_bytes());
        let prefix: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        let name: String = page_name(&page.final_url)
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || ".-_".contains(c) {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        std::fs::write(dir.join(format!("{prefix}_{name}")), &page.bytes)
    }

    /// Moves the viewport one page up or down, clamped to the document.
    pub fn scroll(&mut self, direction: ScrollDirection) -> Result<Viewport, BrowserError> {
        self.require_page()?;
        let count = self.page_count();
        self.viewport_index = match direction {
            ScrollDirection::Up => self.viewport_index.saturating_sub(1).max(1),
            ScrollDirection::Down => (self.viewport_index + 1).min(count),
        };
        Ok(self.viewport_at(self.viewport_index))
    }

    /// Informational searches render the hit list as a page; navigational
    /// searches jump straight to the top hit.
    pub fn web_search(&mut self, kind: SearchKind, query: &str) -> Result<Viewport, BrowserError> {
        let hits = self.search.search(query)?;
        match kind {
            SearchKind::Informational => {
                let mut text = format!(
                    "A web search for '{query}' returned {} result{}.\n",
                    hits.len(),
                    if hits.len() == 1 { "" } else { "s" }
                );
                for (i, hit) in hits.iter().enumerate() {
                    text.push_str(&format!(
                        "\n## {}. {}\nURL: {}\n",
                        i + 1,
                        hit.title,
                        hit.url
                    ));
                    if !hit.snippet.is_empty() {
                        text.push_str(&hit.snippet);
                        text.push('\n');
                    }
                }
                self.load_document(
                    format!("search://informational?q={query}"),
                    format!("Search results for '{query}'"),
                    text,
                );
                Ok(self.viewport_at(self.viewport_index))
            }
            SearchKind::Navigational => {
                let top = hits.first().ok_or_else(|| BrowserError::EmptyResults {
                    query: query.to_string(),
                })?;
                let url = top.url.clone();
                self.visit_page(&url)
            }
        }
    }

    /// Scrolls to the viewport containing the first match at or after the
    /// start of the page. `*` in the pattern matches within a line. A miss
    /// returns the current viewport with a not-found notice.
    pub fn find_on_page(&mut self, pattern: &str) -> Result<Viewport, BrowserError> {
        self.require_page()?;
        self.find_query = Some(pattern.to_string());
        match find::find_from(&self.page_markdown, pattern, 0) {
            Some(offset) => {
                self.find_cursor = offset;
                self.viewport_index = offset / self.config.viewport_size + 1;
                Ok(self.viewport_at(self.viewport_index))
            }
            None => {
                self.find_cursor = 0;
                let mut viewport = self.viewport_at(self.viewport_index);
                viewport.notice = Some(format!(
                    "The search string '{pattern}' was not found on this page."
                ));
                Ok(viewport)
            }
        }
    }

    /// Advances to the next match of the active query, wrapping to the page
    /// start after the last match.
    pub fn find_next(&mut self) -> Result<Viewport, BrowserError> {
        self.require_page()?;
        let query = self.find_query.clone().ok_or(BrowserError::NoActiveFind)?;
        let next = find::find_from(&self.page_markdown, &query, self.find_cursor + 1)
            .or_else(|| find::find_from(&self.page_markdown, &query, 0));
        match next {
            Some(offset) => {
                self.find_cursor = offset;
                self.viewport_index = offset / self.config.viewport_size + 1;
                Ok(self.viewport_at(self.viewport_index))
            }
            None => {
                let mut viewport = self.viewport_at(self.viewport_index);
                viewport.notice = Some(format!(
                    "The search string '{query}' was not found on this page."
                ));
                Ok(viewport)
            }
        }
    }

    /// The viewport currently in view.
    pub fn current_viewport(&self) -> Result<Viewport, BrowserError> {
        self.require_page()?;
        Ok(self.viewport_at(self.viewport_index))
    }

    fn require_page(&self) -> Result<(), BrowserError> {
        if self.current_address.is_none() {
            return Err(BrowserError::NoPageLoaded);
        }
        Ok(())
    }

    fn load_document(&mut self, address: String, title: String, text: String) {
        self.current_address = Some(address);
        self.page_title = title;
        self.page_chars = text.chars().count();
        self.page_markdown = text;
        self.viewport_index = 1;
        self.find_query = None;
        self.find_cursor = 0;
    }

    fn load_error_page(&mut self, url: &str, reason: &str) {
        let text = format!("## Error\n\nFailed to fetch {url}\n\n{reason}");
        self.load_document(url.to_string(), "Error".into(), text);
    }

    fn viewport_at(&self, index: usize) -> Viewport {
        let count = self.page_count();
        let index = index.clamp(1, count);
        let size = self.config.viewport_size;
        let body = char_slice(
            &self.page_markdown,
            (index - 1) * size,
            (index * size).min(self.page_chars),
        );
        Viewport {
            header: format!("Showing page {index} of {count}."),
            body: body.to_string(),
            address: self.current_address.clone().unwrap_or_default(),
            title: self.page_title.clone(),
            notice: None,
        }
    }
}

/// Displayable name for a page: last path segment, else the host.
fn page_name(url: &str) -> String {
    if let Ok(parsed) = url::Url::parse(url) {
        if let Some(segment) = parsed.path_segments().and_then(|mut s| s.next_back()) {
            if !segment.is_empty() {
                return segment.to_string();
            }
        }
        if let Some(host) = parsed.host_str() {
            return host.to_string();
        }
    }
    url.to_string()
}
