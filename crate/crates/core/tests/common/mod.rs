//! Shared fixtures for the integration suites: a four-task benchmark with
//! deterministic scripted model replies (browser, terminal, jury-objection,
//! and none-termination paths), canned pages, and a stub search index.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use conclave_core::agent::AgentDeps;
use conclave_core::browser::{ConverterRegistry, FixtureFetcher, SearchHit, StubSearchProvider};
use conclave_core::config::Config;
use conclave_core::gateway::{Gateway, RetryPolicy, ScriptedProvider};
use conclave_core::harness::{load_dataset, Task};

pub fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn suite_tasks() -> Vec<Task> {
    load_dataset(&fixture_root().join("bench/metadata.jsonl")).expect("fixture dataset")
}

pub fn suite_config() -> Config {
    let mut config = Config::default();
    config.gateway.model = "fixture-model".into();
    config
}

pub fn fixture_fetcher() -> FixtureFetcher {
    FixtureFetcher::from_manifest(&fixture_root().join("pages/pages.json")).expect("page manifest")
}

pub fn suite_search() -> StubSearchProvider {
    let mut provider = StubSearchProvider::empty();
    provider.insert(
        "Veldenmark river",
        vec![SearchHit {
            title: "Veldenmark Travel Guide".into(),
            url: "https://local.test/veldenmark.html".into(),
            snippet: "The River Maren bisects the old town of Veldenmark.".into(),
        }],
    );
    provider
}

pub fn deps_with(gateway: Gateway) -> AgentDeps {
    AgentDeps {
        gateway: Arc::new(gateway),
        fetcher: Arc::new(fixture_fetcher()),
        search: Arc::new(suite_search()),
        converters: ConverterRegistry::with_builtins(),
    }
}

pub fn record_gateway(provider: ScriptedProvider, dir: &Path) -> Gateway {
    Gateway::record(
        Arc::new(provider),
        &dir.join("transcript.jsonl"),
        RetryPolicy::default(),
    )
    .expect("record gateway")
}

const AURORA_CHANNEL_REPLY: &str = "Facts:\n\
\x20 1. Address: https://local.test/aurora.html, Title: Aurora Street Bridge — History, Viewport position: Showing page 1 of 1.\n\
\x20   The Aurora Street Bridge opened to traffic in 1932.\n\
Explanation:\n\
\x20 The history page states the opening year directly, so nothing further is needed.\n\
Plan:\n\
\x20 TERMINATE\n";

const TERMINAL_CHANNEL_REPLY: &str = "Facts:\n\
\x20 1. Address: computer_terminal, Title: print(12*12 - 25), Viewport position: -\n\
\x20   The computation 12*12 - 25 printed 119.\n\
Explanation:\n\
\x20 The interpreter printed the value, which answers the question.\n\
Plan:\n\
\x20 TERMINATE\n";

const VELDENMARK_CHANNEL_REPLY: &str = "Facts:\n\
\x20 1. Address: search://informational?q=Veldenmark river, Title: Search results for 'Veldenmark river', Viewport position: Showing page 1 of 1.\n\
\x20   The River Maren bisects the old town of Veldenmark.\n\
Explanation:\n\
\x20 The travel guide snippet names the river directly.\n\
Plan:\n\
\x20 TERMINATE\n";

/// Scripted replies for the four-task suite. Rules are matched first to
/// last, so the more specific revision/approval rules sit above the generic
/// actor/critic rules for the same task.
pub fn suite_provider() -> ScriptedProvider {
    ScriptedProvider::new()
        // Task fix-001: visit a page, one fact, terminate.
        .rule(
            &["tell me which function", "Aurora Street Bridge"],
            r#"{"tool": "browser", "function": "visit_page", "args": {"url": "https://local.test/aurora.html"}, "reason": "the history page should state the opening year"}"#,
        )
        .rule(&["# Current Step Tool Result", "Aurora Street Bridge"], AURORA_CHANNEL_REPLY)
        .rule(&["You are the Critic", "Aurora Street Bridge"], "APPROVE")
        .rule(
            &["You are the Actor", "Aurora Street Bridge"],
            "According to the bridge history page, it opened to traffic in 1932.",
        )
        .rule(&["Format the following answer", "Aurora Street Bridge"], "1932")
        // Task fix-002: run code through the terminal.
        .rule(
            &["tell me which function", "12*12 - 25"],
            r#"{"tool": "computer_terminal", "function": "computer_terminal", "args": {"code": "print(12*12 - 25)"}, "reason": "a one-line computation"}"#,
        )
        .rule(
            &["Check this code", "12*12 - 25"],
            r#"{"code": "print(12*12 - 25)", "reason": "the code already prints the result"}"#,
        )
        .rule(&["# Current Step Tool Result", "12*12 - 25"], TERMINAL_CHANNEL_REPLY)
        .rule(&["You are the Critic", "12*12 - 25"], "APPROVE")
        .rule(&["You are the Actor", "12*12 - 25"], "The computation printed 119.")
        .rule(&["Format the following answer", "12*12 - 25"], "119")
        // Task fix-003: informational search, then a critic objection the
        // actor fixes on revision.
        .rule(
            &["tell me which function", "Veldenmark"],
            r#"{"tool": "browser", "function": "informational_web_search", "args": {"query": "Veldenmark river"}, "reason": "search for the river name"}"#,
        )
        .rule(&["# Current Step Tool Result", "Veldenmark"], VELDENMARK_CHANNEL_REPLY)
        .rule(&["# Critique", "Veldenmark"], "The river is the Maren.")
        .rule(&["Actor's Answer\n```text\nThe river is the Maren."], "APPROVE")
        .rule(
            &["You are the Critic", "Veldenmark"],
            "OBJECT: the recorded fact names the River Maren, not the Seren.",
        )
        .rule(&["You are the Actor", "Veldenmark"], "The river is the Seren.")
        .rule(&["Format the following answer", "Veldenmark", "Maren"], "Maren")
        .rule(&["Format the following answer", "Veldenmark", "Seren"], "Seren")
        // Task fix-004: no tool needed at all.
        .rule(
            &["tell me which function", "hexagon"],
            r#"{"tool": "None", "function": "None", "args": {}}"#,
        )
        .rule(&["You are the Critic", "hexagon"], "APPROVE")
        .rule(&["You are the Actor", "hexagon"], "A hexagon has 6 sides.")
        .rule(&["Format the following answer", "hexagon"], "6")
}

const ARCHIVE_CHANNEL_REPLY: &str = "Facts:\n\
\x20 1. Address: https://local.test/archive.txt, Title: archive.txt, Viewport position: Showing page 1 of 1.\n\
\x20   The archive page is undated and inconclusive.\n\
Explanation:\n\
\x20 Nothing on this page answers the question yet.\n\
Plan:\n\
\x20 Open the next archive page and keep looking.\n";

/// Replies that never signal termination: the planner always picks the same
/// page visit and the channel never emits the terminate sentinel, so only
/// the step cap can stop the loop. The actor gives an empty answer, forcing
/// the formatter down the educated-guess path.
pub fn adversarial_provider() -> ScriptedProvider {
    ScriptedProvider::new()
        .rule(
            &["tell me which function"],
            r#"{"tool": "browser", "function": "visit_page", "args": {"url": "https://local.test/archive.txt"}, "reason": "keep scanning the archive"}"#,
        )
        .rule(&["# Current Step Tool Result"], ARCHIVE_CHANNEL_REPLY)
        .rule(&["You are the Critic"], "APPROVE")
        .rule(&["You are the Actor"], "")
        .rule(
            &["Format the following answer", "EDUCATED GUESS based on the question itself"],
            "7",
        )
}
