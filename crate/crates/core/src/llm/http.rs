//! Chat-completions over HTTP (the common `messages` / `tools` /
//! `tool_calls` wire shape).

use std::collections::HashSet;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};
use tracing::warn;

use super::{
    ChatMessage, ChatProvider, CompletionRequest, GatewayError, ProviderReply, Role, TokenUsage,
    ToolInvocation,
};

#[derive(Debug, Clone)]
pub struct HttpSettings {
    /// Base URL, e.g. `https://api.openai.com/v1`. `/chat/completions` is appended.
    pub base_url: String,
    pub api_key: String,
    pub request_timeout: Duration,
    pub transport_retries: u32,
    /// First backoff delay; doubles on every retry.
    pub backoff_base: Duration,
}

pub struct HttpProvider {
    settings: HttpSettings,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(settings: HttpSettings) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.request_timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { settings, agent }
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.settings.base_url.trim_end_matches('/')
        )
    }

    fn send_once(&self, body: &Value) -> Result<Value, Attempt> {
        let response = self
            .agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {}", self.settings.api_key))
            .send_json(body);
        let mut response = match response {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(Attempt::Fatal(GatewayError::Timeout)),
            Err(e) => return Err(Attempt::Transport(e.to_string())),
        };
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(Attempt::Fatal(GatewayError::Provider { status, body: text }));
        }
        serde_json::from_str(&text).map_err(|e| {
            Attempt::Fatal(GatewayError::Provider {
                status,
                body: format!("unparseable response ({e}): {text}"),
            })
        })
    }
}

enum Attempt {
    Transport(String),
    Fatal(GatewayError),
}

impl ChatProvider for HttpProvider {
    fn complete(&mut self, request: &CompletionRequest) -> Result<ProviderReply, GatewayError> {
        let body = to_wire(request);
        let mut delay = self.settings.backoff_base;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.send_once(&body) {
                Ok(value) => return from_wire(&value),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transport(detail)) => {
                    if attempts > self.settings.transport_retries {
                        return Err(GatewayError::Transport { attempts, detail });
                    }
                    warn!(attempts, %detail, ?delay, "transport failure, backing off");
                    thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }
}

/// Request body. Tool-role messages whose invocation payload was stripped
/// from the history are sent as user messages, since the wire format only
/// accepts tool results that answer a visible `tool_calls` entry.
pub(crate) fn to_wire(request: &CompletionRequest) -> Value {
    let mut visible_calls = HashSet::new();
    let messages: Vec<Value> = request
        .messages
        .iter()
        .map(|m| match m.role {
            Role::Assistant if !m.tool_invocations.is_empty() => {
                let calls: Vec<Value> = m
                    .tool_invocations
                    .iter()
                    .map(|inv| {
                        visible_calls.insert(inv.invocation_id.clone());
                        json!({
                            "id": inv.invocation_id,
                            "type": "function",
                            "function": {
                                "name": inv.tool_name,
                                "arguments": inv.arguments.to_string(),
                            }
                        })
                    })
                    .collect();
                json!({"role": "assistant", "content": m.content, "tool_calls": calls})
            }
            Role::Tool => {
                let id = m.tool_result_for.clone().unwrap_or_default();
                if visible_calls.contains(&id) {
                    json!({"role": "tool", "tool_call_id": id, "content": m.content})
                } else {
                    json!({"role": "user", "content": format!("[tool result {id}]\n{}", m.content)})
                }
            }
            role => json!({"role": role_name(role), "content": m.content}),
        })
        .collect();
    let mut body = json!({
        "model": request.model_id,
        "messages": messages,
        "temperature": request.temperature,
    });
    if !request.tools.is_empty() {
        body["tools"] = request
            .tools
            .iter()
            .map(|t| {
                json!({
                    "type": "function",
                    "function": {
                        "name": t.name,
                        "description": t.description,
                        "parameters": t.parameters_json_schema(),
                    }
                })
            })
            .collect();
    }
    body
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
        Role::Tool => "tool",
    }
}

pub(crate) fn from_wire(value: &Value) -> Result<ProviderReply, GatewayError> {
    let bad = |what: &str| GatewayError::Provider {
        status: 200,
        body: format!("{what}: {value}"),
    };
    if let Some(err) = value.get("error") {
        return Err(GatewayError::Provider {
            status: 200,
            body: err.to_string(),
        });
    }
    let message = value
        .pointer("/choices/0/message")
        .ok_or_else(|| bad("response has no choices[0].message"))?;
    let content = message
        .get("content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let mut tool_invocations = Vec::new();
    if let Some(calls) = message.get("tool_calls").and_then(Value::as_array) {
        for call in calls {
            let id = call.get("id").and_then(Value::as_str);
            let name = call.pointer("/function/name").and_then(Value::as_str);
            let (Some(id), Some(name)) = (id, name) else {
                return Err(bad("malformed tool call"));
            };
            let raw_args = call
                .pointer("/function/arguments")
                .and_then(Value::as_str)
                .unwrap_or("{}");
            let arguments =
                serde_json::from_str(raw_args).unwrap_or_else(|_| Value::String(raw_args.into()));
            tool_invocations.push(ToolInvocation {
                invocation_id: id.to_string(),
                tool_name: name.to_string(),
                arguments,
            });
        }
    }
    let usage = TokenUsage {
        prompt: value
            .pointer("/usage/prompt_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
        completion: value
            .pointer("/usage/completion_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
    };
    Ok(ProviderReply {
        message: ChatMessage {
            role: Role::Assistant,
            content,
            tool_invocations,
            tool_result_for: None,
        },
        usage,
    })
}
