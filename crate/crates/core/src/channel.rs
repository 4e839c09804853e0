//! The information acquisition channel: executes the planner's directive,
//! runs the fact-extraction prompt over the (capped) tool result, and
//! appends the parsed step to the workspace. Tool failures are data, not
//! control flow: they land in the step digest so the next planning pass
//! can react to them.

use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

use crate::browser::TextBrowser;
use crate::browser::{ScrollDirection, SearchKind};
use crate::gateway::{GatewayError, LlmStage};
use crate::planner::{Planner, Tool, ToolDirective};
use crate::prompts;
use crate::terminal::{ExecutionRequest, ExecutionResult, Terminal};
use crate::workspace::{
    digest_tool_result, parse_channel_response, GlobalWorkspace, StepRecord, WorkspaceError,
};

/// Plan text that signals the answer is in hand and the loop should end.
pub const TERMINATE_SENTINEL: &str = "TERMINATE";

/// Outcome of one executed step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub step: StepRecord,
    /// The extraction signalled that the result directly answers the
    /// question (its plan is the terminate sentinel).
    pub terminal_hint: bool,
}

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("a `none` directive cannot be executed")]
    NoneDirective,
    #[error("channel reply could not be parsed after a retry: {0}")]
    Parse(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Budget(#[from] WorkspaceError),
}

/// The tools one run owns: a browser session and a terminal rooted at a
/// run-private working directory.
pub struct ToolHost<'a> {
    pub browser: &'a mut TextBrowser,
    pub terminal: &'a Terminal,
    pub terminal_workdir: PathBuf,
    pub terminal_timeout: Duration,
    pub terminal_output_cap: usize,
}

pub struct Channel {
    stage: LlmStage,
    digest_cap: usize,
}

impl Channel {
    pub fn new(stage: LlmStage, digest_cap: usize) -> Self {
        Self { stage, digest_cap }
    }

    /// Executes one directive end to end: run the tool, digest the output,
    /// extract facts, append the step. Exactly one step is recorded per
    /// call, including when the tool itself fails.
    pub fn run_step(
        &self,
        workspace: &mut GlobalWorkspace,
        directive: &ToolDirective,
        host: &mut ToolHost<'_>,
        planner: &Planner,
    ) -> Result<StepOutcome, ChannelError> {
        if directive.is_none() {
            return Err(ChannelError::NoneDirective);
        }
        if workspace.is_full() {
            return Err(WorkspaceError::BudgetExhausted {
                max: workspace.max_steps,
            }
            .into());
        }

        let history = workspace.render_history();
        let (executed, result_text) =
            self.dispatch(workspace, directive, host, planner, &history)?;
        let digest = digest_tool_result(&result_text, self.digest_cap);

        let args_json = serde_json::to_string(&executed.args).unwrap_or_else(|_| "{}".into());
        let prompt = prompts::fill(
            prompts::CHANNEL,
            &[
                ("question", &workspace.question),
                ("steps", &history),
                (
                    "tool",
                    &format!("{}.{}", executed.tool.as_str(), executed.function),
                ),
                ("args", &args_json),
                ("tool_result", &digest),
            ],
        );

        let reply = self.stage.ask(&prompt)?;
        let parsed = match parse_channel_response(&reply) {
            Ok(parsed) => parsed,
            Err(first_error) => {
                let retry_prompt = format!(
                    "{prompt}\n\nYour previous reply could not be used: {first_error}\n\
                     Reply again, following the response format exactly."
                );
                let reply = self.stage.ask(&retry_prompt)?;
                parse_channel_response(&reply).map_err(|e| ChannelError::Parse(e.to_string()))?
            }
        };

        let terminal_hint = parsed.plan.trim().eq_ignore_ascii_case(TERMINATE_SENTINEL);
        let step = workspace.append_step(StepRecord {
            index: 0,
            directive: executed,
            tool_result_digest: digest,
            facts: parsed.facts,
            explanation: parsed.explanation,
            plan: parsed.plan,
        })?;
        Ok(StepOutcome {
            step: step.clone(),
            terminal_hint,
        })
    }

    /// Runs the tool function. Tool failures become error text in the
    /// result; only gateway failures (from the code-improvement pass)
    /// propagate. Returns the directive as executed; for terminal steps
    /// the code argument reflects the improvement pass.
    fn dispatch(
        &self,
        workspace: &GlobalWorkspace,
        directive: &ToolDirective,
        host: &mut ToolHost<'_>,
        planner: &Planner,
        history: &str,
    ) -> Result<(ToolDirective, String), GatewayError> {
        match directive.tool {
            Tool::None => unreachable!("checked by run_step"),
            Tool::Browser => {
                let browser = &mut *host.browser;
                let arg = |name: &str| directive.arg(name).unwrap_or_default().to_string();
                let outcome = match directive.function.as_str() {
                    "visit_page" => browser.visit_page(&arg("url")),
                    "download_file" => browser.download_file(&arg("url")),
                    "page_up" => browser.scroll(ScrollDirection::Up),
                    "page_down" => browser.scroll(ScrollDirection::Down),
                    "informational_web_search" => {
                        browser.web_search(SearchKind::Informational, &arg("query"))
                    }
                    "navigational_web_search" => {
                        browser.web_search(SearchKind::Navigational, &arg("query"))
                    }
                    "find_on_page_ctrl_f" => browser.find_on_page(&arg("search_string")),
                    "find_next" => browser.find_next(),
                    other => {
                        return Ok((
                            directive.clone(),
                            format!("ERROR: unknown browser function `{other}`"),
                        ))
                    }
                };
                let text = match outcome {
                    Ok(viewport) => viewport.render(),
                    Err(e) => format!("ERROR: {e}"),
                };
                Ok((directive.clone(), text))
            }
            Tool::ComputerTerminal => {
                let code = directive.arg("code").unwrap_or_default();
                let improved = planner.improve_code(&workspace.question, history, code)?;
                let request = ExecutionRequest {
                    code: improved.clone(),
                    timeout: host.terminal_timeout,
                    output_cap: host.terminal_output_cap,
                    workdir: host.terminal_workdir.clone(),
                };
                let text = match host.terminal.execute(&request) {
                    Ok(result) => render_execution(&result),
                    Err(e) => format!("ERROR: {e}"),
                };
                Ok((ToolDirective::terminal(&improved), text))
            }
        }
    }
}

fn render_execution(result: &ExecutionResult) -> String {
    let mut text = if result.stdout_stderr.is_empty() {
        "(the code produced no output)".to_string()
    } else {
        result.stdout_stderr.clone()
    };
    if result.timed_out {
        text.push_str("\n(execution timed out)");
    } else if result.exit_status != 0 {
        text.push_str(&format!("\n(exit status: {})", result.exit_status));
    }
    text
}
