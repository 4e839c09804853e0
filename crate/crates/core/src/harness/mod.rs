//! Benchmark harness: JSONL task ingestion, quasi-exact-match scoring
//! against gold answers, sweep execution with ablation switches, and
//! report aggregation.

mod dataset;
mod report;
mod runner;

pub use dataset::load_dataset;
pub use report::{
    aggregate, render_csv, render_scatter_csv, render_text, LevelGroup, Report, ScatterRow,
    StepsRow,
};
pub use runner::{ablation_label, load_results_dir, run_benchmark, BenchOptions, BenchOutput};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::normalize;

/// One benchmark task. `gold_answer` is absent on hidden-answer splits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub question: String,
    /// Difficulty level, 1..=3.
    pub level: u8,
    pub gold_answer: Option<String>,
    /// Attachment, resolved against the dataset root.
    pub file_name: Option<PathBuf>,
    /// Steps a human annotator needed, when the metadata carries it.
    pub annotator_steps: Option<u32>,
}

/// Outcome of one task in a sweep. `correct` is present exactly when the
/// task had a gold answer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub task_id: String,
    pub prediction: String,
    pub correct: Option<bool>,
    pub agent_steps: u32,
    pub wall_time: f64,
    pub trace_path: String,
    pub level: u8,
    #[serde(default)]
    pub annotator_steps: Option<u32>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("dataset line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("results reference unknown task_id `{0}`")]
    Join(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Quasi-exact match: equality after normalization. Comma lists compare
/// element-wise in order because normalization canonicalizes each element
/// and the ", " joins. Kept as one function so the scorer and the vote
/// share a single canonical form.
pub fn score(prediction: &str, gold: &str) -> bool {
    normalize(prediction) == normalize(gold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_the_documented_pairs() {
        assert!(score("1000000", "1,000,000"));
        assert!(score("paris", "Paris."));
        assert!(!score("london", "Paris"));
    }

    #[test]
    fn lists_compare_element_wise() {
        assert!(score("3,1,2", "3, 1, 2"));
        assert!(score("The cat, a dog", "cat, dog"));
        assert!(!score("1, 2", "1, 2, 3"));
        assert!(!score("2, 1", "1, 2"));
    }

    #[test]
    fn scoring_is_symmetric_in_normalization() {
        assert!(score("The Eiffel Tower", "eiffel tower."));
        assert!(score("90 %", "90"));
        assert!(!score("0.5", "0.50"));
        assert!(!score("1234", "12,34"));
    }
}
