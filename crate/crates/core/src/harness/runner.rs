//! Sweep execution: a bounded worker pool runs the full pipeline per task,
//! persists one result file per task (so interrupted sweeps resume by
//! skipping completed task ids), and writes the report artifacts.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use super::report::{aggregate, render_csv, render_scatter_csv, render_text, Report};
use super::{score, HarnessError, RunResult, Task};
use crate::agent::{run_ensemble, AgentDeps, RunRequest};
use crate::config::Config;

/// Table 5-style configuration row names.
pub fn ablation_label(no_jury: bool, no_ensemble: bool) -> &'static str {
    match (no_jury, no_ensemble) {
        (false, false) => "full",
        (true, false) => "w/o multi-agent debate-based jury",
        (false, true) => "w/o majority vote-based ensemble",
        (true, true) => "w/o multi-agent debate-based jury, w/o majority vote-based ensemble",
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub label: String,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub split: Option<String>,
}

impl BenchOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            label: "full".into(),
            out_dir: out_dir.into(),
            workers: 1,
            split: None,
        }
    }
}

pub struct BenchOutput {
    pub report: Report,
    pub results: Vec<RunResult>,
}

/// Runs every task (skipping ones with a completed result file), aggregates,
/// and writes `report.txt`, `report.csv`, `scatter.csv`, per-task results,
/// and per-run traces under the output directory. Per-task failures are
/// recorded as incorrect results; the sweep itself never aborts on them.
pub fn run_benchmark(
    tasks: &[Task],
    config: &Config,
    deps: &AgentDeps,
    options: &BenchOptions,
) -> Result<BenchOutput, HarnessError> {
    let results_dir = options.out_dir.join("results");
    let traces_dir = options.out_dir.join("traces");
    let work_dir = options.out_dir.join("work");
    std::fs::create_dir_all(&results_dir)?;
    std::fs::create_dir_all(&traces_dir)?;
    std::fs::create_dir_all(&work_dir)?;
    std::fs::write(
        options.out_dir.join("tasks.json"),
        serde_json::to_string_pretty(tasks).unwrap_or_default(),
    )?;
    std::fs::write(
        options.out_dir.join("sweep.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "label": options.label,
            "split": options.split,
        }))
        .unwrap_or_default(),
    )?;

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<RunResult>>> = Mutex::new(vec![None; tasks.len()]);
    let done = AtomicUsize::new(0);
    let workers = options.workers.max(1).min(tasks.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= tasks.len() {
                    break;
                }
                let task = &tasks[index];
                let result = run_or_load(task, config, deps, &results_dir, &traces_dir, &work_dir);
                let finished = done.fetch_add(1, Ordering::SeqCst) + 1;
                eprintln!(
                    "[{finished}/{}] {} {}",
                    tasks.len(),
                    task.task_id,
                    match result.correct {
                        Some(true) => "correct",
                        Some(false) => "incorrect",
                        None => "unscored",
                    }
                );
                slots.lock().expect("result slots")[index] = Some(result);
            });
        }
    });

    let results: Vec<RunResult> = slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|slot| slot.expect("every task produced a result"))
        .collect();

    let report = aggregate(&results, tasks, &options.label, options.split.as_deref())?;
    std::fs::write(options.out_dir.join("report.txt"), render_text(&report))?;
    std::fs::write(options.out_dir.join("report.csv"), render_csv(&report))?;
    std::fs::write(
        options.out_dir.join("scatter.csv"),
        render_scatter_csv(&report),
    )?;
    Ok(BenchOutput { report, results })
}

fn sanitize_id(task_id: &str) -> String {
    task_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn run_or_load(
    task: &Task,
    config: &Config,
    deps: &AgentDeps,
    results_dir: &Path,
    traces_dir: &Path,
    work_dir: &Path,
) -> RunResult {
    let path = results_dir.join(format!("{}.json", sanitize_id(&task.task_id)));
    if let Ok(raw) = std::fs::read_to_string(&path) {
        if let Ok(result) = serde_json::from_str::<RunResult>(&raw) {
            if result.task_id == task.task_id {
                return result;
            }
        }
    }
    let result = execute_task(task, config, deps, traces_dir, work_dir);
    if let Ok(serialized) = serde_json::to_string_pretty(&result) {
        let _ = std::fs::write(&path, serialized);
    }
    result
}

fn execute_task(
    task: &Task,
    config: &Config,
    deps: &AgentDeps,
    traces_dir: &Path,
    work_dir: &Path,
) -> RunResult {
    let started = Instant::now();
    let stem = sanitize_id(&task.task_id);
    let work_root = work_dir.join(&stem);
    let request = match &task.file_name {
        Some(file) => RunRequest::with_file(task.question.clone(), file.clone()),
        None => RunRequest::new(task.question.clone()),
    };

    let outcome = run_ensemble(&request, deps, config, &work_root, Some(traces_dir), &stem);
    let _ = std::fs::remove_dir_all(&work_root);

    match outcome {
        Ok(ensemble) => {
            let winner_run = ensemble.vote.winner.run_index;
            let prediction = ensemble.vote.winner.formatted.clone();
            let correct = task
                .gold_answer
                .as_deref()
                .map(|gold| score(&prediction, gold));
            let agent_steps = ensemble.runs.get(winner_run).map(|r| r.steps).unwrap_or(0) as u32;
            RunResult {
                task_id: task.task_id.clone(),
                prediction,
                correct,
                agent_steps,
                wall_time: started.elapsed().as_secs_f64(),
                trace_path: format!("traces/{stem}_run{winner_run}.json"),
                level: task.level,
                annotator_steps: task.annotator_steps,
                error: None,
            }
        }
        Err(e) => RunResult {
            task_id: task.task_id.clone(),
            prediction: String::new(),
            correct: task.gold_answer.as_ref().map(|_| false),
            agent_steps: 0,
            wall_time: started.elapsed().as_secs_f64(),
            trace_path: String::new(),
            level: task.level,
            annotator_steps: task.annotator_steps,
            error: Some(e.to_string()),
        },
    }
}

/// A sweep directory read back for re-reporting.
pub struct SweepDir {
    pub tasks: Vec<Task>,
    pub results: Vec<RunResult>,
    pub label: String,
    pub split: Option<String>,
}

/// Reads `tasks.json`, `sweep.json`, and `results/*.json` back from a sweep
/// directory, with results ordered to match the task order.
pub fn load_results_dir(dir: &Path) -> Result<SweepDir, HarnessError> {
    let raw = std::fs::read_to_string(dir.join("tasks.json"))?;
    let tasks: Vec<Task> = serde_json::from_str(&raw).map_err(|e| HarnessError::Format {
        line: 0,
        reason: format!("tasks.json: {e}"),
    })?;

    let meta: serde_json::Value = std::fs::read_to_string(dir.join("sweep.json"))
        .ok()
        .and_then(|raw| serde_json::from_str(&raw).ok())
        .unwrap_or_default();
    let label = meta["label"].as_str().unwrap_or("full").to_string();
    let split = meta["split"].as_str().map(str::to_string);

    let mut results = Vec::new();
    for task in &tasks {
        let path = dir
            .join("results")
            .join(format!("{}.json", sanitize_id(&task.task_id)));
        if !path.exists() {
            continue;
        }
        let raw = std::fs::read_to_string(&path)?;
        let result: RunResult = serde_json::from_str(&raw).map_err(|e| HarnessError::Format {
            line: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
        results.push(result);
    }
    Ok(SweepDir {
        tasks,
        results,
        label,
        split,
    })
}
