//! The per-question pipeline: plan → run tool step → compress into the
//! workspace, looping until the planner returns `none`, the channel signals
//! the answer is in hand, or the step/time budget runs out; then the jury
//! deliberates and the formatter produces the final answer. An ensemble is
//! several independent runs of that pipeline joined by majority vote.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::answer::{majority_vote, AnswerBundle, Formatter, VoteResult};
use crate::browser::{ConverterRegistry, PageFetcher, SearchProvider, TextBrowser};
use crate::channel::{Channel, ChannelError, ToolHost};
use crate::config::Config;
use crate::gateway::{Gateway, GatewayError, LlmStage};
use crate::jury::{DebateState, Jury};
use crate::planner::{PlanError, Planner};
use crate::workspace::GlobalWorkspace;

/// Everything a run needs besides its question: the LLM boundary and the
/// tool backends. Shared across parallel runs; each run builds its own
/// browser session and terminal workdir from these.
#[derive(Clone)]
pub struct AgentDeps {
    pub gateway: Arc<Gateway>,
    pub fetcher: Arc<dyn PageFetcher>,
    pub search: Arc<dyn SearchProvider>,
    pub converters: ConverterRegistry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The planner selected `none`.
    PlannerNone,
    /// The channel's plan was the terminate sentinel.
    TerminalHint,
    /// The step cap was reached.
    BudgetExhausted,
    /// The per-task wall-clock budget ran out.
    DeadlineExceeded,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("run i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// One finished run of the pipeline.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub bundle: AnswerBundle,
    pub steps: usize,
    pub stop: StopReason,
    pub debate: Option<DebateState>,
    pub trace_path: Option<PathBuf>,
}

pub struct EnsembleOutcome {
    pub vote: VoteResult,
    pub runs: Vec<RunRecord>,
}

/// The question to answer, with an optional attached task file (copied into
/// the terminal workdir and mentioned in the rendered question).
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub question: String,
    pub attached_file: Option<PathBuf>,
}

impl RunRequest {
    pub fn new(question: impl Into<String>) -> Self {
        Self {
            question: question.into(),
            attached_file: None,
        }
    }

    pub fn with_file(question: impl Into<String>, file: PathBuf) -> Self {
        Self {
            question: question.into(),
            attached_file: Some(file),
        }
    }
}

fn stage(config: &Config, deps: &AgentDeps, temperature: f64) -> LlmStage {
    LlmStage::new(
        deps.gateway.clone(),
        config.gateway.model.clone(),
        temperature,
        config.gateway.max_tokens,
    )
}

#[derive(Serialize)]
struct Trace<'a> {
    question: &'a str,
    attached_file: &'a Option<PathBuf>,
    created_at: u64,
    finished_at: u64,
    max_steps: usize,
    run_index: usize,
    steps: &'a [crate::workspace::StepRecord],
    stop_reason: Option<StopReason>,
    debate: &'a Option<DebateState>,
    answer: Option<&'a AnswerBundle>,
    error: Option<String>,
}

/// Runs the pipeline once. The trace file (workspace, debate, answer, or
/// the error that stopped the run) is written whether the run completes or
/// fails.
pub fn run_once(
    request: &RunRequest,
    deps: &AgentDeps,
    config: &Config,
    run_index: usize,
    deadline: Instant,
    work_root: &Path,
    trace_path: Option<&Path>,
) -> Result<RunRecord, RunError> {
    let mut rendered_question = request.question.clone();
    let terminal_workdir = work_root.join(format!("run{run_index}")).join("term");
    std::fs::create_dir_all(&terminal_workdir)?;
    if let Some(file) = &request.attached_file {
        let name = file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "attachment".into());
        std::fs::copy(file, terminal_workdir.join(&name))?;
        rendered_question.push_str(&format!("\nThe question references file: {name}"));
    }

    let mut workspace = GlobalWorkspace::new(
        rendered_question,
        request.attached_file.clone(),
        config.run.max_steps,
    );

    let planner = Planner::new(stage(config, deps, config.temperature.planner));
    let channel = Channel::new(
        stage(config, deps, config.temperature.channel),
        config.run.digest_cap,
    );
    let jury = Jury::new(
        stage(config, deps, config.temperature.jury),
        config.run.jury_rounds,
        config.run.jury,
    );
    let formatter = Formatter::new(stage(config, deps, config.temperature.formatter));

    let mut browser = TextBrowser::new(
        deps.fetcher.clone(),
        deps.search.clone(),
        deps.converters.clone(),
        config.browser_config(),
    );
    let terminal = config.terminal();

    let outcome = (|| -> Result<(StopReason, AnswerBundle, Option<DebateState>), RunError> {
        let stop = loop {
            if workspace.is_full() {
                break StopReason::BudgetExhausted;
            }
            if Instant::now() >= deadline {
                break StopReason::DeadlineExceeded;
            }
            let directive = planner.plan_next(&workspace.question, &workspace.render_history())?;
            if directive.is_none() {
                break StopReason::PlannerNone;
            }
            let mut host = ToolHost {
                browser: &mut browser,
                terminal: &terminal,
                terminal_workdir: terminal_workdir.clone(),
                terminal_timeout: Duration::from_secs(config.terminal.timeout_secs),
                terminal_output_cap: config.terminal.output_cap,
            };
            let step = channel.run_step(&mut workspace, &directive, &mut host, &planner)?;
            if step.terminal_hint {
                break StopReason::TerminalHint;
            }
        };

        let (raw, debate) = jury.deliberate_with_state(&workspace)?;
        let formatted = formatter.format_answer(&workspace.question, &raw)?;
        Ok((
            stop,
            AnswerBundle::new(raw, formatted, run_index),
            Some(debate),
        ))
    })();

    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let (stop, bundle, debate, error) = match &outcome {
        Ok((stop, bundle, debate)) => (Some(*stop), Some(bundle), debate.clone(), None),
        Err(e) => (None, None, None, Some(e.to_string())),
    };
    if let Some(path) = trace_path {
        let trace = Trace {
            question: &workspace.question,
            attached_file: &workspace.attached_file,
            created_at: workspace.created_at,
            finished_at: now,
            max_steps: workspace.max_steps,
            run_index,
            steps: &workspace.steps,
            stop_reason: stop,
            debate: &debate,
            answer: bundle,
            error,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(
            path,
            serde_json::to_string_pretty(&trace).unwrap_or_default(),
        )?;
    }

    let (stop, bundle, debate) = outcome?;
    Ok(RunRecord {
        bundle,
        steps: workspace.steps.len(),
        stop,
        debate,
        trace_path: trace_path.map(Path::to_path_buf),
    })
}

/// Runs `config.run.ensemble` independent pipelines and majority-votes their
/// normalized answers.
pub fn run_ensemble(
    request: &RunRequest,
    deps: &AgentDeps,
    config: &Config,
    work_root: &Path,
    trace_dir: Option<&Path>,
    trace_stem: &str,
) -> Result<EnsembleOutcome, RunError> {
    let n_runs = config.run.ensemble.max(1);
    let deadline = Instant::now() + Duration::from_secs(config.run.task_timeout_secs);
    let mut runs = Vec::with_capacity(n_runs);
    for run_index in 0..n_runs {
        let trace_path = trace_dir.map(|dir| dir.join(format!("{trace_stem}_run{run_index}.json")));
        runs.push(run_once(
            request,
            deps,
            config,
            run_index,
            deadline,
            work_root,
            trace_path.as_deref(),
        )?);
    }
    let bundles: Vec<AnswerBundle> = runs.iter().map(|r| r.bundle.clone()).collect();
    Ok(EnsembleOutcome {
        vote: majority_vote(&bundles),
        runs,
    })
}
