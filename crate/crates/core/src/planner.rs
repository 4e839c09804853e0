//! Next-step selection: parses the model's JSON reply into a validated
//! (tool, function, args) directive, or the distinguished `none` directive
//! that ends the loop. Also hosts the code-improvement pass applied to
//! terminal snippets before execution.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{GatewayError, LlmStage};
use crate::prompts;
use crate::text::{strip_code_fences, truncate_chars};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    Browser,
    ComputerTerminal,
    None,
}

impl Tool {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tool::Browser => "browser",
            Tool::ComputerTerminal => "computer_terminal",
            Tool::None => "none",
        }
    }
}

/// Browser functions and their required parameters.
pub const BROWSER_FUNCTIONS: &[(&str, &[&str])] = &[
    ("informational_web_search", &["query"]),
    ("navigational_web_search", &["query"]),
    ("visit_page", &["url"]),
    ("page_up", &[]),
    ("page_down", &[]),
    ("download_file", &["url"]),
    ("find_on_page_ctrl_f", &["search_string"]),
    ("find_next", &[]),
];

pub const TERMINAL_FUNCTION: (&str, &[&str]) = ("computer_terminal", &["code"]);

fn declared_params(tool: Tool, function: &str) -> Option<&'static [&'static str]> {
    match tool {
        Tool::Browser => BROWSER_FUNCTIONS
            .iter()
            .find(|(name, _)| *name == function)
            .map(|(_, params)| *params),
        Tool::ComputerTerminal => (function == TERMINAL_FUNCTION.0).then_some(TERMINAL_FUNCTION.1),
        Tool::None => None,
    }
}

/// The planner's output: which function to run next, with its arguments,
/// or `none` when no further tool use is needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDirective {
    pub tool: Tool,
    pub function: String,
    pub args: BTreeMap<String, String>,
}

impl ToolDirective {
    pub fn none() -> Self {
        Self {
            tool: Tool::None,
            function: String::new(),
            args: BTreeMap::new(),
        }
    }

    pub fn browser(function: &str, args: &[(&str, &str)]) -> Self {
        Self {
            tool: Tool::Browser,
            function: function.to_string(),
            args: args
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn terminal(code: &str) -> Self {
        Self {
            tool: Tool::ComputerTerminal,
            function: TERMINAL_FUNCTION.0.to_string(),
            args: BTreeMap::from([("code".to_string(), code.to_string())]),
        }
    }

    pub fn is_none(&self) -> bool {
        self.tool == Tool::None
    }

    pub fn arg(&self, name: &str) -> Option<&str> {
        self.args.get(name).map(String::as_str)
    }

    /// Checks the directive against the function table: `none` carries no
    /// function or args; otherwise the function must belong to the tool and
    /// the argument names must match its declared parameters exactly.
    pub fn validate(&self) -> Result<(), String> {
        if self.tool == Tool::None {
            if !self.function.is_empty() || !self.args.is_empty() {
                return Err("`none` directive must carry no function or args".into());
            }
            return Ok(());
        }
        let params = declared_params(self.tool, &self.function).ok_or_else(|| {
            format!(
                "unknown function `{}` for tool `{}`",
                self.function,
                self.tool.as_str()
            )
        })?;
        for param in params {
            if !self.args.contains_key(*param) {
                return Err(format!(
                    "missing argument `{param}` for `{}`",
                    self.function
                ));
            }
        }
        for name in self.args.keys() {
            if !params.contains(&name.as_str()) {
                return Err(format!("unknown argument `{name}` for `{}`", self.function));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ToolDirective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_none() {
            return write!(f, "none");
        }
        let args = self
            .args
            .iter()
            .map(|(k, v)| {
                let shown = if v.chars().count() > 120 {
                    format!("{}…", truncate_chars(v, 120))
                } else {
                    v.clone()
                };
                format!("{k}={}", serde_json::to_string(&shown).unwrap_or_default())
            })
            .collect::<Vec<_>>()
            .join(", ");
        write!(f, "{}.{}({args})", self.tool.as_str(), self.function)
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("planner reply could not be parsed after a retry: {last}")]
    Parse { last: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

pub struct Planner {
    stage: LlmStage,
}

impl Planner {
    pub fn new(stage: LlmStage) -> Self {
        Self { stage }
    }

    /// Picks the next directive for the question given the rendered step
    /// history. A malformed reply is re-asked once with the parse error
    /// appended; a second failure is a hard error.
    pub fn plan_next(&self, question: &str, history: &str) -> Result<ToolDirective, PlanError> {
        let prompt = build_plan_prompt(question, history);
        let reply = self.stage.ask(&prompt)?;
        match parse_directive(&reply) {
            Ok(directive) => Ok(directive),
            Err(first_error) => {
                let retry_prompt = format!(
                    "{prompt}\n\nYour previous reply could not be used: {first_error}\n\
                     Reply again with exactly one JSON object that follows the format instructions."
                );
                let reply = self.stage.ask(&retry_prompt)?;
                parse_directive(&reply).map_err(|last| PlanError::Parse { last })
            }
        }
    }

    /// Review pass over terminal code. Fail-open: any unparseable reply
    /// leaves the code unchanged.
    pub fn improve_code(
        &self,
        question: &str,
        history: &str,
        code: &str,
    ) -> Result<String, GatewayError> {
        let prompt = build_improve_prompt(question, history, code);
        let reply = self.stage.ask(&prompt)?;
        Ok(parse_improved_code(&reply).unwrap_or_else(|| code.to_string()))
    }
}

pub fn build_plan_prompt(question: &str, history: &str) -> String {
    prompts::fill(
        prompts::PLANNER,
        &[
            ("steps", history),
            ("question", question),
            ("format_instructions", prompts::PLANNER_FORMAT_INSTRUCTIONS),
        ],
    )
}

pub fn build_improve_prompt(question: &str, history: &str, code: &str) -> String {
    prompts::fill(
        prompts::IMPROVE_CODE,
        &[
            ("question", question),
            ("steps", history),
            ("code", code),
            ("format_instructions", prompts::CODE_FORMAT_INSTRUCTIONS),
        ],
    )
}

/// Extracts the outermost JSON object from a reply that may carry fences or
/// surrounding chatter.
fn extract_json(reply: &str) -> Option<&str> {
    let body = strip_code_fences(reply);
    let start = body.find('{')?;
    let end = body.rfind('}')?;
    (end > start).then(|| &body[start..=end])
}

fn scalar_to_string(key: &str, value: &serde_json::Value) -> Result<String, String> {
    match value {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        serde_json::Value::Bool(b) => Ok(b.to_string()),
        other => Err(format!("argument `{key}` must be a scalar, got {other}")),
    }
}

/// Parses and validates a planner reply. Every accepted reply yields a
/// directive satisfying [`ToolDirective::validate`]; anything else is an
/// error (never a silently wrong directive).
pub fn parse_directive(reply: &str) -> Result<ToolDirective, String> {
    let json = extract_json(reply).ok_or("no JSON object found in reply")?;
    let value: serde_json::Value =
        serde_json::from_str(json).map_err(|e| format!("invalid JSON: {e}"))?;
    let object = value.as_object().ok_or("reply is not a JSON object")?;

    let tool_raw = object
        .get("tool")
        .and_then(|v| v.as_str())
        .ok_or("missing string field `tool`")?
        .trim()
        .to_ascii_lowercase();
    let function_raw = object
        .get("function")
        .and_then(|v| v.as_str())
        .unwrap_or("")
        .trim()
        .to_string();

    let tool = match tool_raw.as_str() {
        "browser" => Tool::Browser,
        "computer_terminal" | "terminal" => Tool::ComputerTerminal,
        "none" | "null" | "" => Tool::None,
        other => return Err(format!("unknown tool `{other}`")),
    };

    // A function of "None" means no tool, whatever tool name came with it.
    if tool == Tool::None || function_raw.eq_ignore_ascii_case("none") {
        return Ok(ToolDirective::none());
    }

    let mut args = BTreeMap::new();
    if let Some(raw_args) = object.get("args") {
        let map = raw_args
            .as_object()
            .ok_or_else(|| format!("`args` must be an object, got {raw_args}"))?;
        for (key, value) in map {
            args.insert(key.clone(), scalar_to_string(key, value)?);
        }
    }

    let directive = ToolDirective {
        tool,
        function: function_raw,
        args,
    };
    directive.validate()?;
    Ok(directive)
}

/// Pulls the revised code out of an improvement reply, tolerating fenced
/// code inside the JSON string. `None` means "keep the original".
fn parse_improved_code(reply: &str) -> Option<String> {
    let json = extract_json(reply)?;
    let value: serde_json::Value = serde_json::from_str(json).ok()?;
    let code = value.get("code")?.as_str()?;
    let code = strip_code_fences(code);
    (!code.trim().is_empty()).then(|| code.to_string())
}
