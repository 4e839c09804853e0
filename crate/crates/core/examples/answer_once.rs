//! Minimal library usage: wire up live dependencies and answer one
//! question. Expects the API key in the environment variable named by the
//! config (OPENAI_API_KEY by default).
//!
//! ```sh
//! cargo run -p conclave-core --example answer_once -- "What is 17 * 23?"
//! ```

use std::sync::Arc;
use std::time::Duration;

use conclave_core::agent::{run_ensemble, AgentDeps, RunRequest};
use conclave_core::browser::{ConverterRegistry, HttpFetcher, StubSearchProvider};
use conclave_core::config::Config;
use conclave_core::gateway::{Gateway, HttpProvider, RetryPolicy};

fn main() {
    let question = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "What is 17 * 23?".into());

    let mut config = Config::default();
    config.run.ensemble = 1;

    let provider = Arc::new(HttpProvider::new(
        &config.gateway.endpoint,
        std::env::var(&config.gateway.api_key_env).unwrap_or_default(),
        Duration::from_secs(config.gateway.timeout_secs),
    ));
    let deps = AgentDeps {
        gateway: Arc::new(Gateway::live(provider, RetryPolicy::default())),
        fetcher: Arc::new(HttpFetcher::new(
            &config.browser.user_agent,
            Duration::from_secs(config.browser.timeout_secs),
        )),
        search: Arc::new(StubSearchProvider::empty()),
        converters: ConverterRegistry::with_builtins(),
    };

    let work = std::env::temp_dir().join("conclave-example");
    match run_ensemble(
        &RunRequest::new(question),
        &deps,
        &config,
        &work,
        None,
        "example",
    ) {
        Ok(outcome) => println!("{}", outcome.vote.winner.formatted),
        Err(e) => {
            eprintln!("run failed: {e}");
            std::process::exit(1);
        }
    }
}
