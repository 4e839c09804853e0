//! Actor/critic review of the draft answer. The Actor answers from the
//! workspace record; the Critic must open its reply with APPROVE or OBJECT.
//! Objections feed a bounded revision loop; anything unparseable fails open
//! to approval.

use serde::{Deserialize, Serialize};

use crate::gateway::{GatewayError, LlmStage};
use crate::prompts;
use crate::text::strip_code_fences;
use crate::workspace::GlobalWorkspace;

pub const DEFAULT_MAX_ROUNDS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Approve,
    Object,
}

/// Where a deliberation ended up: the last round reached, the standing
/// answer, and the critic's final word.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DebateState {
    pub round: usize,
    pub max_rounds: usize,
    pub actor_answer: String,
    pub critic_verdict: Verdict,
    pub critique: String,
}

pub struct Jury {
    stage: LlmStage,
    pub max_rounds: usize,
    /// With the jury disabled the deliberation is the single Actor call.
    pub enabled: bool,
}

impl Jury {
    pub fn new(stage: LlmStage, max_rounds: usize, enabled: bool) -> Self {
        Self {
            stage,
            max_rounds,
            enabled,
        }
    }

    /// Runs the debate and returns the candidate answer. At most
    /// `1 + 2 * max_rounds` gateway calls: one Actor draft, then per round
    /// one Critic review and (on objection) one revision.
    pub fn deliberate(&self, workspace: &GlobalWorkspace) -> Result<String, GatewayError> {
        Ok(self.deliberate_with_state(workspace)?.0)
    }

    pub fn deliberate_with_state(
        &self,
        workspace: &GlobalWorkspace,
    ) -> Result<(String, DebateState), GatewayError> {
        let question = workspace.question.as_str();
        let record = workspace.render_history();

        let actor_prompt = prompts::fill(
            prompts::JURY_ACTOR,
            &[("question", question), ("workspace", &record)],
        );
        let mut answer = self.stage.ask(&actor_prompt)?.trim().to_string();
        let mut state = DebateState {
            round: 0,
            max_rounds: self.max_rounds,
            actor_answer: answer.clone(),
            critic_verdict: Verdict::Approve,
            critique: String::new(),
        };
        if !self.enabled {
            return Ok((answer, state));
        }

        for round in 1..=self.max_rounds {
            let critic_prompt = prompts::fill(
                prompts::JURY_CRITIC,
                &[
                    ("question", question),
                    ("workspace", &record),
                    ("answer", &answer),
                ],
            );
            let critic_reply = self.stage.ask(&critic_prompt)?;
            let (verdict, critique) = parse_verdict(&critic_reply);
            state.round = round;
            state.critic_verdict = verdict;
            state.critique = critique.clone();
            if verdict == Verdict::Approve {
                break;
            }

            let revise_prompt = prompts::fill(
                prompts::JURY_REVISE,
                &[
                    ("question", question),
                    ("workspace", &record),
                    ("answer", &answer),
                    ("critique", &critique),
                ],
            );
            answer = self.stage.ask(&revise_prompt)?.trim().to_string();
            state.actor_answer = answer.clone();
        }
        Ok((answer, state))
    }
}

/// First word of the reply decides; everything after an OBJECT is the
/// critique. Unrecognized replies approve (fail-open, bounded cost).
pub fn parse_verdict(reply: &str) -> (Verdict, String) {
    let body = strip_code_fences(reply).trim_start();
    let first_word: String = body
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    if first_word.eq_ignore_ascii_case("object") {
        let critique = body[first_word.len()..]
            .trim_start_matches([':', '.', '-', ' '])
            .trim();
        (Verdict::Object, critique.to_string())
    } else {
        (Verdict::Approve, String::new())
    }
}
