use serde::de::DeserializeOwned;
use thiserror::Error;

use crate::llm::{ChatMessage, CompletionRequest, Gateway, GatewayError};
use crate::violation::{render_violations, Violation};

/// How hard a planning stage pushes the model before giving up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Re-requests after a reply that does not parse.
    pub parse_retries: u32,
    /// Re-prompts after a reply that parses but violates the stage's rules.
    pub repair_rounds: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            parse_retries: 3,
            repair_rounds: 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{stage} output still invalid after repair rounds:\n{}", render_violations(.violations))]
    Invalid {
        stage: &'static str,
        violations: Vec<Violation>,
    },
}

impl StageError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            StageError::Invalid { violations, .. } => violations,
            StageError::Gateway(_) => &[],
        }
    }
}

/// Requests a structured document and re-prompts with the violation list
/// until `check` accepts it or the repair rounds run out.
pub(crate) fn request_valid<T, F>(
    gateway: &mut Gateway,
    stage: &'static str,
    agent_role: &str,
    request: CompletionRequest,
    policy: RetryPolicy,
    mut check: F,
) -> Result<T, StageError>
where
    T: DeserializeOwned,
    F: FnMut(&T) -> Vec<Violation>,
{
    let mut request = request;
    let mut round = 0;
    loop {
        let (value, raw) =
            gateway.complete_structured_raw::<T>(agent_role, &request, policy.parse_retries)?;
        let violations = check(&value);
        if violations.is_empty() {
            return Ok(value);
        }
        if round >= policy.repair_rounds {
            return Err(StageError::Invalid { stage, violations });
        }
        round += 1;
        request.messages.push(ChatMessage::assistant(raw));
        request.messages.push(ChatMessage::user(format!(
            "The document breaks these rules:\n{}\n\nReply with the complete corrected \
             document in one fenced ```json block.",
            render_violations(&violations)
        )));
    }
}
