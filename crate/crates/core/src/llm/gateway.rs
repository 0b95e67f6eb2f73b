use serde::de::DeserializeOwned;
use thiserror::Error;
use tracing::debug;

use super::structured::parse_structured;
use super::{ChatMessage, CompletionRequest, TokenUsage, ToolSchema, UsageEntry, UsageLedger};
use crate::clock::Clock;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
    #[error("transport failure after {attempts} attempts: {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("provider returned status {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("provider request timed out")]
    Timeout,
    #[error("missing API key: environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("transcript step {step}: expected fingerprint {expected}, got {actual}")]
    ExpectationMismatch {
        step: usize,
        expected: String,
        actual: String,
    },
    #[error("transcript exhausted after {steps} steps")]
    TranscriptExhausted { steps: usize },
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
    #[error("structured output failure ({reason}); last reply: {raw}")]
    StructuredOutput { reason: String, raw: String },
    #[error("model {0} has no entry in the price table")]
    UnknownModel(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderReply {
    pub message: ChatMessage,
    pub usage: TokenUsage,
}

/// A chat-completions backend.
pub trait ChatProvider: Send {
    fn complete(&mut self, request: &CompletionRequest) -> Result<ProviderReply, GatewayError>;

    /// Skips `steps` already-consumed replies. Only replaying providers
    /// have anything to skip; used when resuming a checkpointed run.
    fn fast_forward(&mut self, _steps: usize) -> Result<(), GatewayError> {
        Ok(())
    }
}

/// Provider handle plus the process-local usage ledger.
pub struct Gateway {
    provider: Box<dyn ChatProvider>,
    ledger: UsageLedger,
    clock: Clock,
    model_id: String,
    temperature: f64,
}

impl Gateway {
    pub fn new(
        provider: Box<dyn ChatProvider>,
        ledger: UsageLedger,
        clock: Clock,
        model_id: impl Into<String>,
        temperature: f64,
    ) -> Self {
        Self {
            provider,
            ledger,
            clock,
            model_id: model_id.into(),
            temperature,
        }
    }

    pub fn ledger(&self) -> &UsageLedger {
        &self.ledger
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// Replaces the ledger with a restored one and skips the provider past
    /// every call that ledger already accounts for.
    pub fn restore_ledger(&mut self, ledger: UsageLedger) -> Result<(), GatewayError> {
        self.provider.fast_forward(ledger.entries.len())?;
        self.ledger = ledger;
        Ok(())
    }

    /// Builds a request with the configured model and temperature.
    pub fn request(&self, messages: Vec<ChatMessage>, tools: Vec<ToolSchema>) -> CompletionRequest {
        CompletionRequest {
            model_id: self.model_id.clone(),
            messages,
            tools,
            temperature: self.temperature,
        }
    }

    pub fn complete(
        &mut self,
        agent_role: &str,
        request: &CompletionRequest,
    ) -> Result<(ChatMessage, TokenUsage), GatewayError> {
        request.validate().map_err(GatewayError::InvalidRequest)?;
        let started = self.clock.now_ms();
        let reply = self.provider.complete(request)?;
        let finished = self.clock.now_ms();
        self.ledger.record(UsageEntry {
            agent_role: agent_role.to_string(),
            model_id: request.model_id.clone(),
            prompt_tokens: reply.usage.prompt,
            completion_tokens: reply.usage.completion,
            wall_clock_seconds: finished.saturating_sub(started) as f64 / 1000.0,
        });
        debug!(agent_role, tokens = ?reply.usage, "completion");
        Ok((reply.message, reply.usage))
    }

    /// Requests completions until the reply parses into `T`, appending an
    /// explanation of each parse failure before re-requesting. Makes at most
    /// `max_retries + 1` calls.
    pub fn complete_structured<T: DeserializeOwned>(
        &mut self,
        agent_role: &str,
        request: &CompletionRequest,
        max_retries: u32,
    ) -> Result<T, GatewayError> {
        self.complete_structured_raw(agent_role, request, max_retries)
            .map(|(value, _)| value)
    }

    /// Like [`Gateway::complete_structured`] but also returns the raw reply
    /// text the value was parsed from.
    pub fn complete_structured_raw<T: DeserializeOwned>(
        &mut self,
        agent_role: &str,
        request: &CompletionRequest,
        max_retries: u32,
    ) -> Result<(T, String), GatewayError> {
        let mut request = request.clone();
        let mut attempt = 0;
        loop {
            let (reply, _) = self.complete(agent_role, &request)?;
            match parse_structured::<T>(&reply.content) {
                Ok(value) => return Ok((value, reply.content)),
                Err(reason) if attempt >= max_retries => {
                    return Err(GatewayError::StructuredOutput {
                        reason,
                        raw: reply.content,
                    })
                }
                Err(reason) => {
                    debug!(agent_role, attempt, %reason, "structured output rejected");
                    request.messages.push(ChatMessage::assistant(reply.content));
                    request.messages.push(ChatMessage::user(format!(
                        "Your reply could not be used: {reason}\n\
                         Reply again with exactly one fenced ```json block that \
                         follows the requested structure."
                    )));
                    attempt += 1;
                }
            }
        }
    }
}
