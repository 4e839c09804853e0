//! Tool-using LLM agent runtime.
//!
//! A planner picks the next browser or code-interpreter action, an
//! acquisition channel runs it and compresses the result into facts, and a
//! shared per-run workspace accumulates the step history (capped at 20
//! steps). When the loop ends, an actor/critic panel reviews the draft
//! answer, a formatting pass canonicalizes it, and independent runs are
//! combined by majority vote. Every LLM call crosses a stateless
//! record/replay gateway, so whole runs replay deterministically from
//! transcript fixtures. A JSONL benchmark harness with quasi-exact-match
//! scoring drives the pipeline over task sets and reports per-level
//! accuracy and step statistics.

pub mod agent;
pub mod answer;
pub mod browser;
pub mod channel;
pub mod config;
pub mod gateway;
pub mod harness;
pub mod jury;
pub mod planner;
pub mod prompts;
pub mod terminal;
pub mod workspace;

pub(crate) mod text;

#[cfg(test)]
pub(crate) mod testutil;
