//! Sweep aggregation: per-level accuracy, grouped step averages, and the
//! scatter rows behind the accuracy-by-steps plot. All percentages and
//! means render with two decimals.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{HarnessError, RunResult, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LevelGroup {
    Level(u8),
    Overall,
}

impl LevelGroup {
    fn label(&self) -> String {
        match self {
            LevelGroup::Level(level) => level.to_string(),
            LevelGroup::Overall => "Overall".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepsRow {
    pub group: LevelGroup,
    pub correct: bool,
    pub human_avg: Option<f64>,
    pub agent_avg: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScatterRow {
    pub human_steps: Option<u32>,
    pub agent_steps: u32,
    pub correct: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    /// Configuration row name (full or an ablation label).
    pub label: String,
    pub split: Option<String>,
    pub n_results: usize,
    /// Results that had a gold answer to score against.
    pub n_scored: usize,
    pub level_accuracy: [Option<f64>; 3],
    pub overall_accuracy: Option<f64>,
    pub steps_rows: Vec<StepsRow>,
    pub scatter: Vec<ScatterRow>,
}

/// Joins results to tasks and computes the report tables. Accuracies are
/// percentages over scored tasks; step averages are grouped by
/// (level, correct) and computed only over non-empty groups.
pub fn aggregate(
    results: &[RunResult],
    tasks: &[Task],
    label: &str,
    split: Option<&str>,
) -> Result<Report, HarnessError> {
    let known: BTreeMap<&str, &Task> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    for result in results {
        if !known.contains_key(result.task_id.as_str()) {
            return Err(HarnessError::Join(result.task_id.clone()));
        }
    }

    let scored: Vec<&RunResult> = results.iter().filter(|r| r.correct.is_some()).collect();

    let accuracy_over = |predicate: &dyn Fn(&RunResult) -> bool| -> Option<f64> {
        let group: Vec<_> = scored.iter().filter(|r| predicate(r)).collect();
        if group.is_empty() {
            return None;
        }
        let correct = group.iter().filter(|r| r.correct == Some(true)).count();
        Some(correct as f64 * 100.0 / group.len() as f64)
    };

    let level_accuracy = [
        accuracy_over(&|r| r.level == 1),
        accuracy_over(&|r| r.level == 2),
        accuracy_over(&|r| r.level == 3),
    ];
    let overall_accuracy = accuracy_over(&|_| true);

    let mut steps_rows = Vec::new();
    let groups = [
        LevelGroup::Level(1),
        LevelGroup::Level(2),
        LevelGroup::Level(3),
        LevelGroup::Overall,
    ];
    for group in groups {
        for correct in [false, true] {
            let members: Vec<&&RunResult> = scored
                .iter()
                .filter(|r| r.correct == Some(correct))
                .filter(|r| match group {
                    LevelGroup::Level(level) => r.level == level,
                    LevelGroup::Overall => true,
                })
                .collect();
            if members.is_empty() {
                continue;
            }
            let agent_avg =
                members.iter().map(|r| r.agent_steps as f64).sum::<f64>() / members.len() as f64;
            let with_human: Vec<u32> = members.iter().filter_map(|r| r.annotator_steps).collect();
            let human_avg = if with_human.is_empty() {
                None
            } else {
                Some(with_human.iter().map(|s| *s as f64).sum::<f64>() / with_human.len() as f64)
            };
            steps_rows.push(StepsRow {
                group,
                correct,
                human_avg,
                agent_avg,
                count: members.len(),
            });
        }
    }

    let scatter = scored
        .iter()
        .map(|r| ScatterRow {
            human_steps: r.annotator_steps,
            agent_steps: r.agent_steps,
            correct: r.correct == Some(true),
        })
        .collect();

    Ok(Report {
        label: label.to_string(),
        split: split.map(str::to_string),
        n_results: results.len(),
        n_scored: scored.len(),
        level_accuracy,
        overall_accuracy,
        steps_rows,
        scatter,
    })
}

fn cell(value: Option<f64>) -> String {
    value
        .map(|v| format!("{v:.2}"))
        .unwrap_or_else(|| "-".into())
}

/// Text report: an accuracy table over Level 1/2/3/Overall columns and a
/// step-average table over (level, correct) rows.
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    out.push_str("# Benchmark report\n\n");
    out.push_str(&format!("Configuration: {}\n", report.label));
    if let Some(split) = &report.split {
        out.push_str(&format!("Split: {split}\n"));
    }
    out.push_str(&format!(
        "Tasks: {} run, {} scored\n\n",
        report.n_results, report.n_scored
    ));

    if report.n_scored == 0 {
        out.push_str("No scored results.\n");
        return out;
    }

    out.push_str("Accuracy (%)\n");
    out.push_str("| Configuration | Level 1 | Level 2 | Level 3 | Overall |\n");
    out.push_str("| --- | --- | --- | --- | --- |\n");
    out.push_str(&format!(
        "| {} | {} | {} | {} | {} |\n",
        report.label,
        cell(report.level_accuracy[0]),
        cell(report.level_accuracy[1]),
        cell(report.level_accuracy[2]),
        cell(report.overall_accuracy),
    ));

    out.push_str("\nAverage steps\n");
    out.push_str("| Level | Correct? | Avg. steps (human) | Avg. steps (agent) | Tasks |\n");
    out.push_str("| --- | --- | --- | --- | --- |\n");
    for row in &report.steps_rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            row.group.label(),
            if row.correct { "yes" } else { "no" },
            cell(row.human_avg),
            cell(Some(row.agent_avg)),
            row.count,
        ));
    }
    out
}

/// Accuracy row as CSV, mirroring the text table's columns.
pub fn render_csv(report: &Report) -> String {
    let empty_cell = |value: Option<f64>| value.map(|v| format!("{v:.2}")).unwrap_or_default();
    format!(
        "configuration,level1_accuracy,level2_accuracy,level3_accuracy,overall_accuracy\n{},{},{},{},{}\n",
        csv_escape(&report.label),
        empty_cell(report.level_accuracy[0]),
        empty_cell(report.level_accuracy[1]),
        empty_cell(report.level_accuracy[2]),
        empty_cell(report.overall_accuracy),
    )
}

/// Scatter rows (one per scored task) as CSV.
pub fn render_scatter_csv(report: &Report) -> String {
    let mut out = String::from("human_steps,agent_steps,correct\n");
    for row in &report.scatter {
        out.push_str(&format!(
            "{},{},{}\n",
            row.human_steps.map(|s| s.to_string()).unwrap_or_default(),
            row.agent_steps,
            row.correct,
        ));
    }
    out
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
