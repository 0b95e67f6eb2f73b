//! Scripted provider that replays a recorded transcript in order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    ChatMessage, ChatProvider, CompletionRequest, GatewayError, ProviderReply, Role, TokenUsage,
    ToolInvocation,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub steps: Vec<TranscriptStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_fingerprint: Option<String>,
    pub response: ScriptedResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedResponse {
    #[serde(default)]
    pub content: String,
    #[serde(default)]
    pub tool_invocations: Vec<ToolInvocation>,
    #[serde(default)]
    pub usage: ScriptedUsage,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedUsage {
    pub prompt: u64,
    pub completion: u64,
}

/// SHA-256 over `model_id`, the message count and the final message's
/// content, separated by 0x1f, as lowercase hex.
pub fn fingerprint(request: &CompletionRequest) -> String {
    let mut h = Sha256::new();
    h.update(request.model_id.as_bytes());
    h.update([0x1f]);
    h.update(request.messages.len().to_string().as_bytes());
    h.update([0x1f]);
    if let Some(last) = request.messages.last() {
        h.update(last.content.as_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    steps: Vec<TranscriptStep>,
    cursor: usize,
    strict: bool,
}

impl ScriptedProvider {
    pub fn new(transcript: Transcript) -> Self {
        Self {
            steps: transcript.steps,
            cursor: 0,
            strict: false,
        }
    }

    /// In strict mode a step's `expect_fingerprint`, when present, must match
    /// the incoming request.
    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn consumed(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.steps.len() - self.cursor
    }
}

pub fn load_transcript(path: &Path) -> Result<ScriptedProvider, GatewayError> {
    let text = fs::read_to_string(path)
        .map_err(|e| GatewayError::MalformedTranscript(format!("{}: {e}", path.display())))?;
    let transcript: Transcript = serde_json::from_str(&text)
        .map_err(|e| GatewayError::MalformedTranscript(format!("{}: {e}", path.display())))?;
    for (i, step) in transcript.steps.iter().enumerate() {
        if let Some(fp) = &step.expect_fingerprint {
            if fp.len() != 64 || !fp.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(GatewayError::MalformedTranscript(format!(
                    "step {i}: expect_fingerprint is not a 64-digit hex string"
                )));
            }
        }
    }
    Ok(ScriptedProvider::new(transcript))
}

impl ChatProvider for ScriptedProvider {
    fn complete(&mut self, request: &CompletionRequest) -> Result<ProviderReply, GatewayError> {
        let step = self
            .steps
            .get(self.cursor)
            .ok_or(GatewayError::TranscriptExhausted {
                steps: self.steps.len(),
            })?;
        if self.strict {
            if let Some(expected) = &step.expect_fingerprint {
                let actual = fingerprint(request);
                if !expected.eq_ignore_ascii_case(&actual) {
                    return Err(GatewayError::ExpectationMismatch {
                        step: self.cursor,
                        expected: expected.clone(),
                        actual,
                    });
                }
            }
        }
        let r = &step.response;
        let reply = ProviderReply {
            message: ChatMessage {
                role: Role::Assistant,
                content: r.content.clone(),
                tool_invocations: r.tool_invocations.clone(),
                tool_result_for: None,
            },
            usage: TokenUsage {
                prompt: r.usage.prompt,
                completion: r.usage.completion,
            },
        };
        self.cursor += 1;
        Ok(reply)
    }

    fn fast_forward(&mut self, steps: usize) -> Result<(), GatewayError> {
        if self.cursor + steps > self.steps.len() {
            return Err(GatewayError::TranscriptExhausted {
                steps: self.steps.len(),
            });
        }
        self.cursor += steps;
        Ok(())
    }
}
