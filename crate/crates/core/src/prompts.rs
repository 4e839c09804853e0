//! Prompt templates, shipped as versioned text assets with named
//! `{placeholder}` slots.

pub const PLANNER: &str = include_str!("../assets/prompts/planner.txt");
pub const IMPROVE_CODE: &str = include_str!("../assets/prompts/improve_code.txt");
pub const CHANNEL: &str = include_str!("../assets/prompts/channel.txt");
pub const FORMAT_ANSWER: &str = include_str!("../assets/prompts/format_answer.txt");
pub const JURY_ACTOR: &str = include_str!("../assets/prompts/jury_actor.txt");
pub const JURY_CRITIC: &str = include_str!("../assets/prompts/jury_critic.txt");
pub const JURY_REVISE: &str = include_str!("../assets/prompts/jury_revise.txt");

/// Concrete reply schema for the planner's `{format_instructions}` slot.
pub const PLANNER_FORMAT_INSTRUCTIONS: &str = r#"Reply with exactly one JSON object and no other text, following this schema:
{
  "tool": "browser" | "computer_terminal" | "none",
  "function": "<one of the function names above, or \"None\" when tool is \"none\">",
  "args": {"<parameter name>": "<value>"},
  "reason": "<why this step helps answer the question>"
}"#;

/// Concrete reply schema for the code-improvement `{format_instructions}` slot.
pub const CODE_FORMAT_INSTRUCTIONS: &str = r#"Reply with exactly one JSON object and no other text, following this schema:
{
  "code": "<the improved Python code, or the original code if it is already correct>",
  "reason": "<what you changed, or why nothing needed changing>"
}"#;

/// Fills `{name}` slots in a template. Substituted values are emitted
/// verbatim and never rescanned, so braces inside values cannot trigger a
/// second substitution. Unknown `{...}` runs stay literal.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find(['}', '{', '\n']) {
            Some(close) if after.as_bytes().get(close) == Some(&b'}') => {
                let name = &after[..close];
                match vars.iter().find(|(k, _)| *k == name) {
                    Some((_, value)) => out.push_str(value),
                    None => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
