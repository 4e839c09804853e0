//! Content converters: bytes in, page text out. Built-ins cover plain text
//! and HTML→markdown; anything else (PDF, DOCX, ...) is a pluggable
//! registration, and unknown formats resolve to a typed lookup failure
//! instead of a crash.

use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvertedDoc {
    pub title: Option<String>,
    pub text: String,
}

pub trait Converter: Send + Sync {
    fn convert(&self, bytes: &[u8]) -> ConvertedDoc;
}

struct PlainText;

impl Converter for PlainText {
    fn convert(&self, bytes: &[u8]) -> ConvertedDoc {
        ConvertedDoc {
            title: None,
            text: String::from_utf8_lossy(bytes).into_owned(),
        }
    }
}

struct Html;

impl Converter for Html {
    fn convert(&self, bytes: &[u8]) -> ConvertedDoc {
        let html = String::from_utf8_lossy(bytes);
        let (title, text) = html_to_markdown(&html);
        ConvertedDoc { title, text }
    }
}

/// Maps content types and file extensions to converters.
#[derive(Clone, Default)]
pub struct ConverterRegistry {
    by_key: BTreeMap<String, Arc<dyn Converter>>,
}

impl ConverterRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut registry = Self::default();
        let plain: Arc<dyn Converter> = Arc::new(PlainText);
        let html: Arc<dyn Converter> = Arc::new(Html);
        for key in [
            "text/plain",
            "text/markdown",
            "text/csv",
            "application/json",
            ".txt",
            ".md",
            ".markdown",
            ".csv",
            ".json",
            ".log",
        ] {
            registry.register(key, plain.clone());
        }
        for key in [
            "text/html",
            "application/xhtml+xml",
            ".html",
            ".htm",
            ".xhtml",
        ] {
            registry.register(key, html.clone());
        }
        registry
    }

    /// Keys are content types (`text/html`) or dotted extensions (`.html`).
    pub fn register(&mut self, key: &str, converter: Arc<dyn Converter>) {
        self.by_key.insert(key.to_ascii_lowercase(), converter);
    }

    /// Resolves a converter from the content type (parameters stripped),
    /// falling back to the URL's file extension, then to plain text for any
    /// `text/*` type. The error carries the format label that failed.
    pub fn lookup(
        &self,
        content_type: Option<&str>,
        url: &str,
    ) -> Result<Arc<dyn Converter>, String> {
        let media_type = content_type.map(normalize_media_type);
        if let Some(ref mt) = media_type {
            if let Some(converter) = self.by_key.get(mt) {
                return Ok(converter.clone());
            }
        }
        let extension = url_extension(url);
        if let Some(ref ext) = extension {
            if let Some(converter) = self.by_key.get(ext) {
                return Ok(converter.clone());
            }
        }
        if let Some(ref mt) = media_type {
            if mt.starts_with("text/") {
                if let Some(converter) = self.by_key.get("text/plain") {
                    return Ok(converter.clone());
                }
            }
        }
        Err(extension
            .or(media_type)
            .unwrap_or_else(|| "unknown content type".into()))
    }
}

fn normalize_media_type(content_type: &str) -> String {
    content_type
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase()
}

/// Dotted, lowercased extension of the URL's path component, if any.
fn url_extension(url: &str) -> Option<String> {
    let path = match url::Url::parse(url) {
        Ok(parsed) => parsed.path().to_string(),
        Err(_) => url.split(['?', '#']).next().unwrap_or("").to_string(),
    };
    let name = path.rsplit('/').next()?;
    let (stem, ext) = name.rsplit_once('.')?;
    if stem.is_empty() || ext.is_empty() || ext.contains('/') {
        return None;
    }
    Some(format!(".{}", ext.to_ascii_lowercase()))
}

// --- HTML to markdown ---

const SKIP_TAGS: &[&str] = &[
    "script", "style", "noscript", "head", "svg", "form", "iframe", "canvas", "template", "select",
    "textarea", "button",
];

/// Converts HTML to a markdown-ish text rendering: headings, inline link
/// targets, list markers, and table cell text survive; scripts, styles, and
/// form controls are dropped. Returns the `<title>` separately.
pub fn html_to_markdown(html: &str) -> (Option<String>, String) {
    let mut walker = Walker::default();
    let bytes = html.as_bytes();
    let mut i = 0;

    while i < bytes.len() {
        if bytes[i] == b'<' {
            if html[i..].starts_with("<!--") {
                i = html[i..]
                    .find("-->")
                    .map(|p| i + p + 3)
                    .unwrap_or(bytes.len());
                continue;
            }
            if html[i..].starts_with("<!") || html[i..].starts_with("<?") {
                i = html[i..]
                    .find('>')
                    .map(|p| i + p + 1)
                    .unwrap_or(bytes.len());
                continue;
            }
            match html[i..].find('>') {
                Some(end) => {
                    let tag = &html[i + 1..i + end];
                    walker.handle_tag(tag);
                    i += end + 1;
                    // Raw-text elements: their body is not markup.
                    let name = tag_name(tag);
                    if !tag.starts_with('/')
                        && (name == "script" || name == "style")
                        && !tag.ends_with('/')
                    {
                        let close = format!("</{name}");
                        if let Some(p) = html[i..].to_ascii_lowercase().find(&close) {
                            i += p;
                        } else {
                            i = bytes.len();
                        }
                    }
                }
                None => break,
            }
        } else {
            let next_tag = html[i..].find('<').map(|p| i + p).unwrap_or(bytes.len());
            walker.handle_text(&html[i..next_tag]);
            i = next_tag;
        }
    }

    let title = walker
        .title
        .as_ref()
        .map(|t| collapse_spaces(t))
        .filter(|t| !t.is_empty());
    (title, tidy(&walker.out))
}

fn tag_name(tag: &str) -> String {
    tag.trim_start_matches('/')
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

#[derive(Default)]
struct Walker {
    out: String,
    title: Option<String>,
    skip_depth: usize,
    in_title: bool,
    pre_depth: usize,
    lists: Vec<ListKind>,
    links: Vec<Option<String>>,
}

enum ListKind {
    Unordered,
    Ordered(usize),
}

impl Walker {
    fn handle_tag(&mut self, tag: &str) {
        let closing = tag.starts_with('/');
        let name = tag_name(tag);
        let self_closing = tag.ends_with('/');
        if name.is_empty() {
            return;
        }

        if name == "title" {
            self.in_title = !closing;
            if !closing {
                self.title.get_or_insert_with(String::new);
            }
            return;
        }

        if SKIP_TAGS.contains(&name.as_str()) {
            if self_closing {
                return;
            }
            if closing {
                self.skip_depth = self.skip_depth.saturating_sub(1);
            } else {
                self.skip_depth += 1;
            }
            return;
        }
        if self.skip_depth > 0 {
            return;
        }

        match name.as_str() {
            "br" => self.out.push('\n'),
            "hr" => {
                self.ensure_blank_line();
                self.out.push_str("---");
                self.ensure_blank_line();
            }
            "h1" | "h2" | "h3" | "h4" | "h5" | "h6" => {
                self.ensure_blank_line();
                if !closing {
                    let level = name[1..].parse::<usize>().unwrap_or(1);
                    self.out.push_str(&"#".repeat(level));
                    self.out.push(' ');
                }
            }
            "p" | "div" | "section" | "article" | "main" | "aside" | "header" | "footer"
            | "figure" | "nav" | "blockquote" => {
                self.ensure_blank_line();
                if name == "blockquote" && !closing {
                    self.out.push_str("> ");
                }
            }
            "ul" => {
                if closing {
                    self.lists.pop();
                    self.ensure_blank_line();
                } else {
                    self.lists.push(ListKind::Unordered);
                    self.ensure_newline();
                }
            }
            "ol" => {
                if closing {
                    self.lists.pop();
                    self.ensure_blank_line();
                } else {
                    self.lists.push(ListKind::Ordered(0));
                    self.ensure_newline();
                }
            }
            "li" => {
                if !closing {
                    self.ensure_newline();
                    let depth = self.lists.len().saturating_sub(1);
                    self.out.push_str(&"  ".repeat(depth));
                    match self.lists.last_mut() {
                        Some(ListKind::Ordered(n)) => {
                            *n += 1;
                            let n = *n;
                            self.out.push_str(&format!("{n}. "));
                        }
                        _ => self.out.push_str("- "),
                    }
                }
            }
            "table" => self.ensure_blank_line(),
            "tr" => {
                if closing {
                    self.ensure_newline();
                }
            }
            "td" | "th" => {
                if !closing && !self.out.is_empty() && !self.out.ends_with('\n') {
                    self.out.push_str(" | ");
                }
            }
            "pre" => {
                self.ensure_blank_line();
                if closing {
                    self.pre_depth = self.pre_depth.saturating_sub(1);
                } else {
                    self.pre_depth += 1;
                }
            }
            "a" => {
                if closing {
                    if let Some(Some(href)) = self.links.pop() {
                        self.out.push_str("](");
                        self.out.push_str(&href);
                        self.out.push(')');
                    }
                } else {
                    let href = attr_value(tag, "href").filter(|h| {
                        !h.is_empty() && !h.starts_with('#') && !h.starts_with("javascript:")
                    });
                    if href.is_some() {
                        self.out.push('[');
                    }
                    self.links.push(href);
                }
            }
            "img" => {
                if let Some(alt) = attr_value(tag, "alt").filter(|a| !a.is_empty()) {
                    self.handle_text(&alt);
                }
            }
            "strong" | "b" => self.out.push_str("**"),
            "em" | "i" => self.out.push('*'),
            "code" if self.pre_depth == 0 => {
                self.out.push('`');
            }
            _ => {}
        }
    }

    fn handle_text(&mut self, raw: &str) {
        if self.in_title {
            if let Some(title) = self.title.as_mut() {
                title.push_str(&decode_entities(raw));
            }
            return;
        }
        if self.skip_depth > 0 {
            return;
        }
        let text = decode_entities(raw);
        if self.pre_depth > 0 {
            self.out.push_str(&text);
            return;
        }
        for ch in text.chars() {
            if ch.is_whitespace() {
                if !self.out.is_empty() && !self.out.ends_with([' ', '\n']) {
                    self.out.push(' ');
                }
            } else {
                self.out.push(ch);
            }
        }
    }

    fn ensure_newline(&mut self) {
        while self.out.ends_with(' ') {
            self.out.pop();
        }
        if !self.out.is_empty() && !self.out.ends_with('\n') {
            self.out.push('\n');
        }
    }

    fn ensure_blank_line(&mut self) {
        self.ensure_newline();
        if !self.out.is_empty() && !self.out.ends_with("\n\n") {
            self.out.push('\n');
        }
    }
}

/// Value of a named attribute within a tag's source text.
fn attr_value(tag: &str, name: &str) -> Option<String> {
    let lower = tag.to_ascii_lowercase();
    let mut search_from = 0;
    loop {
        let at = lower[search_from..].find(name)?;
        let start = search_from + at;
        // Must be a word boundary followed by '='.
        let before_ok = start == 0
            || !lower.as_bytes()[start - 1].is_ascii_alphanumeric()
                && lower.as_bytes()[start - 1] != b'-';
        let after = tag[start + name.len()..].trim_start();
        if before_ok && after.starts_with('=') {
            let value = after[1..].trim_start();
            let decoded = if let Some(rest) = value.strip_prefix('"') {
                rest.split('"').next().unwrap_or("")
            } else if let Some(rest) = value.strip_prefix('\'') {
                rest.split('\'').next().unwrap_or("")
            } else {
                value.split_whitespace().next().unwrap_or("")
            };
            return Some(decode_entities(decoded));
        }
        search_from = start + name.len();
        if search_from >= lower.len() {
            return None;
        }
    }
}

fn decode_entities(text: &str) -> String {
    if !text.contains('&') {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(at) = rest.find('&') {
        out.push_str(&rest[..at]);
        rest = &rest[at..];
        // Entity names are short; look for ';' only near the '&', walking
        // char boundaries so multibyte text cannot split a slice.
        let end = rest
            .char_indices()
            .take_while(|(i, _)| *i <= 12)
            .find(|(_, c)| *c == ';')
            .map(|(i, _)| i);
        match end {
            Some(end) => {
                let entity = &rest[1..end];
                let decoded = match entity {
                    "amp" => Some('&'),
                    "lt" => Some('<'),
                    "gt" => Some('>'),
                    "quot" => Some('"'),
                    "apos" => Some('\''),
                    "nbsp" => Some(' '),
                    _ => {
                        if let Some(num) = entity
                            .strip_prefix("#x")
                            .or_else(|| entity.strip_prefix("#X"))
                        {
                            u32::from_str_radix(num, 16).ok().and_then(char::from_u32)
                        } else if let Some(num) = entity.strip_prefix('#') {
                            num.parse::<u32>().ok().and_then(char::from_u32)
                        } else {
                            None
                        }
                    }
                };
                match decoded {
                    Some(c) => {
                        out.push(c);
                        rest = &rest[end + 1..];
                    }
                    None => {
                        out.push('&');
                        rest = &rest[1..];
                    }
                }
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn collapse_spaces(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Final cleanup: strips trailing spaces per line and collapses runs of
/// blank lines down to one blank line.
fn tidy(text: &str) -> String {
    let mut lines: Vec<&str> = text.lines().map(str::trim_end).collect();
    while lines.first().is_some_and(|l| l.is_empty()) {
        lines.remove(0);
    }
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let mut out = String::new();
    let mut blank_run = 0;
    for line in lines {
        if line.is_empty() {
            blank_run += 1;
            if blank_run > 1 {
                continue;
            }
        } else {
            blank_run = 0;
        }
        out.push_str(line);
        out.push('\n');
    }
    if out.ends_with('\n') {
        out.pop();
    }
    out
}
