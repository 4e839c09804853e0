//! The per-run global workspace: an append-only step history with
//! deduplicated facts, plus the renderer and parser for the structured
//! `Facts:` / `Explanation:` / `Plan:` format the acquisition channel uses
//! to compress tool output.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::ToolDirective;
use crate::text::{strip_code_fences, truncate_chars};

pub const DEFAULT_MAX_STEPS: usize = 20;
pub const DEFAULT_DIGEST_CAP: usize = 8000;
pub const DIGEST_TRUNCATION_MARKER: &str = "\n...[truncated]";
pub const EMPTY_HISTORY_MARKER: &str = "No steps have been taken yet.";

/// One piece of incremental information extracted from a tool result.
/// `(address, content)` pairs are unique within a workspace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub address: String,
    pub title: String,
    pub viewport_position: String,
    pub content: String,
}

/// One reasoning step: the executed directive, a bounded digest of the raw
/// tool output, and the channel's extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub directive: ToolDirective,
    pub tool_result_digest: String,
    pub facts: Vec<Fact>,
    pub explanation: String,
    pub plan: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorkspaceError {
    #[error("step budget of {max} steps is exhausted")]
    BudgetExhausted { max: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("missing required section `{0}` in channel response")]
pub struct ParseError(pub &'static str);

/// Shared per-run store every stage reads from and the channel appends to.
#[derive(Debug, Clone, Serialize)]
pub struct GlobalWorkspace {
    pub question: String,
    pub attached_file: Option<PathBuf>,
    pub steps: Vec<StepRecord>,
    pub max_steps: usize,
    /// Unix seconds at creation.
    pub created_at: u64,
    #[serde(skip)]
    seen: BTreeSet<(String, String)>,
}

impl GlobalWorkspace {
    pub fn new(
        question: impl Into<String>,
        attached_file: Option<PathBuf>,
        max_steps: usize,
    ) -> Self {
        Self {
            question: question.into(),
            attached_file,
            steps: Vec::new(),
            max_steps: max_steps.max(1),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seen: BTreeSet::new(),
        }
    }

    pub fn is_full(&self) -> bool {
        self.steps.len() >= self.max_steps
    }

    /// Total facts recorded across all steps.
    pub fn fact_count(&self) -> usize {
        self.steps.iter().map(|s| s.facts.len()).sum()
    }

    /// Appends a step. The step's index is assigned from its position, and
    /// facts already present in the workspace (same address and content) or
    /// with empty content are dropped. Prior steps are never touched.
    pub fn append_step(&mut self, mut step: StepRecord) -> Result<&StepRecord, WorkspaceError> {
        if self.is_full() {
            return Err(WorkspaceError::BudgetExhausted {
                max: self.max_steps,
            });
        }
        step.index = self.steps.len() + 1;
        step.facts.retain(|fact| {
            if fact.content.is_empty() {
                return false;
            }
            self.seen
                .insert((fact.address.clone(), fact.content.clone()))
        });
        self.steps.push(step);
        Ok(self.steps.last().expect("just pushed"))
    }

    /// Deterministic rendering of the step history for prompt slots. The
    /// empty workspace renders a fixed marker string.
    pub fn render_history(&self) -> String {
        if self.steps.is_empty() {
            return EMPTY_HISTORY_MARKER.to_string();
        }
        let mut out = String::new();
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("## Step {}\n", step.index));
            out.push_str(&format!("Tool: {}\n", step.directive));
            out.push_str("Facts:\n");
            if step.facts.is_empty() {
                out.push_str("  (none)\n");
            } else {
                out.push_str(&render_facts(&step.facts));
            }
            out.push_str("Explanation:\n");
            push_indented(&mut out, &step.explanation);
            out.push_str("Plan:\n");
            push_indented(&mut out, &step.plan);
        }
        out
    }
}

fn push_indented(out: &mut String, text: &str) {
    if text.is_empty() {
        out.push_str("  \n");
        return;
    }
    for line in text.lines() {
        out.push_str("  ");
        out.push_str(line);
        out.push('\n');
    }
}

fn render_facts(facts: &[Fact]) -> String {
    let mut out = String::new();
    for (i, fact) in facts.iter().enumerate() {
        out.push_str(&format!(
            "  {}. Address: {}, Title: {}, Viewport position: {}\n",
            i + 1,
            fact.address,
            fact.title,
            fact.viewport_position
        ));
        for line in fact.content.lines() {
            out.push_str("    ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

/// Assembles a channel response in the documented format; the inverse of
/// [`parse_channel_response`] up to surrounding whitespace.
pub fn render_channel_reply(facts: &[Fact], explanation: &str, plan: &str) -> String {
    let mut out = String::from("Facts:\n");
    out.push_str(&render_facts(facts));
    out.push_str("Explanation:\n");
    push_indented(&mut out, explanation);
    out.push_str("Plan:\n");
    push_indented(&mut out, plan);
    out
}

/// The channel's parsed extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReply {
    pub facts: Vec<Fact>,
    pub explanation: String,
    pub plan: String,
}

/// Truncates a raw tool result to the digest cap, marking the cut.
pub fn digest_tool_result(raw: &str, cap: usize) -> String {
    let head = truncate_chars(raw, cap);
    if head.len() < raw.len() {
        format!("{head}{DIGEST_TRUNCATION_MARKER}")
    } else {
        head.to_string()
    }
}

/// Parses the labeled `Facts:` / `Explanation:` / `Plan:` sections out of a
/// model reply. Tolerates code fences and surrounding whitespace; the facts
/// section may be absent or empty, the other two are required. Section
/// labels are recognized at column 0 (the format indents all content).
pub fn parse_channel_response(text: &str) -> Result<ChannelReply, ParseError> {
    let body = strip_code_fences(text).replace("\r\n", "\n");
    let lines: Vec<&str> = body.lines().collect();

    #[derive(Clone, Copy, PartialEq)]
    enum Section {
        Preamble,
        Facts,
        Explanation,
        Plan,
    }

    let mut section = Section::Preamble;
    let mut facts_lines: Vec<String> = Vec::new();
    let mut explanation_lines: Vec<String> = Vec::new();
    let mut plan_lines: Vec<String> = Vec::new();
    let mut saw_explanation = false;
    let mut saw_plan = false;

    for line in lines {
        let label = |name: &str| -> Option<String> {
            let lower = line.to_ascii_lowercase();
            lower
                .starts_with(&format!("{name}:"))
                .then(|| line[name.len() + 1..].trim().to_string())
        };
        if section == Section::Preamble || section == Section::Facts {
            if let Some(rest) = label("facts") {
                section = Section::Facts;
                if !rest.is_empty() {
                    facts_lines.push(rest);
                }
                continue;
            }
        }
        if section != Section::Plan && section != Section::Explanation {
            if let Some(rest) = label("explanation") {
                section = Section::Explanation;
                saw_explanation = true;
                if !rest.is_empty() {
                    explanation_lines.push(rest);
                }
                continue;
            }
        }
        if section == Section::Explanation {
            if let Some(rest) = label("plan") {
                section = Section::Plan;
                saw_plan = true;
                if !rest.is_empty() {
                    plan_lines.push(rest);
                }
                continue;
            }
        }
        match section {
            Section::Preamble => {}
            Section::Facts => facts_lines.push(line.to_string()),
            Section::Explanation => explanation_lines.push(line.to_string()),
            Section::Plan => plan_lines.push(line.to_string()),
        }
    }

    if !saw_explanation {
        return Err(ParseError("Explanation"));
    }
    if !saw_plan {
        return Err(ParseError("Plan"));
    }

    Ok(ChannelReply {
        facts: parse_facts(&facts_lines),
        explanation: dedent_join(&explanation_lines),
        plan: dedent_join(&plan_lines),
    })
}

/// Splits "N. Address: ..., Title: ..., Viewport position: ..." headers and
/// gathers the indented body lines below each into the fact content.
fn parse_facts(lines: &[String]) -> Vec<Fact> {
    struct Entry {
        address: String,
        title: String,
        viewport_position: String,
        body: Vec<String>,
    }

    let mut entries: Vec<Entry> = Vec::new();
    for line in lines {
        if let Some(rest) = numbered_item(line) {
            let (address, title, viewport_position, trailing) = split_fact_header(rest);
            let mut entry = Entry {
                address,
                title,
                viewport_position,
                body: Vec::new(),
            };
            if let Some(text) = trailing {
                entry.body.push(text);
            }
            entries.push(entry);
        } else if let Some(entry) = entries.last_mut() {
            entry.body.push(line.clone());
        }
    }

    entries
        .into_iter()
        .filter_map(|e| {
            let content = dedent_join(&e.body);
            (!content.is_empty()).then_some(Fact {
                address: e.address,
                title: e.title,
                viewport_position: e.viewport_position,
                content,
            })
        })
        .collect()
}

/// Returns the text after a "N." / "N)" list marker, if the line has one.
fn numbered_item(line: &str) -> Option<&str> {
    let t = line.trim_start();
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let rest = &t[digits..];
    rest.strip_prefix('.')
        .or_else(|| rest.strip_prefix(')'))
        .map(str::trim_start)
}

/// Splits a fact header on the literal ", Title:" and ", Viewport position:"
/// markers. A header without "Address:" is treated as body text instead.
fn split_fact_header(rest: &str) -> (String, String, String, Option<String>) {
    let lower = rest.to_ascii_lowercase();
    if !lower.starts_with("address:") {
        return (
            String::new(),
            String::new(),
            String::new(),
            Some(rest.trim().to_string()),
        );
    }
    let after_address = rest["address:".len()..].to_string();
    let lower = after_address.to_ascii_lowercase();

    let (address, after_title) = match lower.find(", title:") {
        Some(at) => (
            after_address[..at].trim().to_string(),
            Some(after_address[at + ", title:".len()..].to_string()),
        ),
        None => (after_address.trim().to_string(), None),
    };
    let Some(after_title) = after_title else {
        return (address, String::new(), String::new(), None);
    };

    let lower = after_title.to_ascii_lowercase();
    let (title, viewport) = match lower.find(", viewport position:") {
        Some(at) => (
            after_title[..at].trim().to_string(),
            after_title[at + ", viewport position:".len()..]
                .trim()
                .to_string(),
        ),
        None => (after_title.trim().to_string(), String::new()),
    };
    (address, title, viewport, None)
}

/// Joins lines after stripping their common leading whitespace.
fn dedent_join(lines: &[String]) -> String {
    let indent = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.chars().take_while(|c| c.is_whitespace()).count())
        .min()
        .unwrap_or(0);
    let mut joined = lines
        .iter()
        .map(|l| strip_indent(l, indent))
        .collect::<Vec<_>>()
        .join("\n");
    while joined.ends_with(['\n', ' ', '\t']) {
        joined.pop();
    }
    while joined.starts_with('\n') {
        joined.remove(0);
    }
    joined
}

/// Drops up to `indent` leading whitespace chars; indentation is measured
/// in chars so exotic whitespace cannot split a byte slice.
fn strip_indent(line: &str, indent: usize) -> &str {
    let mut offset = line.len();
    for (count, (i, c)) in line.char_indices().enumerate() {
        if count >= indent || !c.is_whitespace() {
            return &line[i..];
        }
        offset = i + c.len_utf8();
    }
    &line[offset..]
}
