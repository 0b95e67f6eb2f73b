use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInvocation {
    pub invocation_id: String,
    pub tool_name: String,
    #[serde(default)]
    pub arguments: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_invocations: Vec<ToolInvocation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_result_for: Option<String>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, content)
    }

    pub fn tool_result(invocation_id: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            role: Role::Tool,
            content: content.into(),
            tool_invocations: Vec::new(),
            tool_result_for: Some(invocation_id.into()),
        }
    }

    fn plain(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
            tool_invocations: Vec::new(),
            tool_result_for: None,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if !self.tool_invocations.is_empty() && self.role != Role::Assistant {
            return Err(format!("{:?} message carries tool invocations", self.role));
        }
        match (self.role, &self.tool_result_for) {
            (Role::Tool, None) => Err("tool message without tool_result_for".into()),
            (r, Some(_)) if r != Role::Tool => {
                Err(format!("{r:?} message sets tool_result_for"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Text,
    Integer,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolParameter {
    pub name: String,
    pub kind: ParamKind,
    pub required: bool,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ToolParameter>,
}

impl ToolSchema {
    /// JSON-schema object for the `parameters` field of the wire format.
    pub fn parameters_json_schema(&self) -> Value {
        let mut properties = Map::new();
        for p in &self.parameters {
            let ty = match p.kind {
                ParamKind::Text => "string",
                ParamKind::Integer => "integer",
                ParamKind::Boolean => "boolean",
            };
            properties.insert(
                p.name.clone(),
                json!({"type": ty, "description": p.description}),
            );
        }
        let required: Vec<&str> = self
            .parameters
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name.as_str())
            .collect();
        json!({"type": "object", "properties": properties, "required": required})
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    #[serde(default)]
    pub tools: Vec<ToolSchema>,
    pub temperature: f64,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), String> {
        match self.messages.first() {
            None => return Err("request has no messages".into()),
            Some(m) if m.role != Role::System => {
                return Err("first message must be the system message".into())
            }
            _ => {}
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        for (i, m) in self.messages.iter().enumerate() {
            m.check().map_err(|e| format!("messages[{i}]: {e}"))?;
        }
        let mut names = HashSet::new();
        for t in &self.tools {
            if !names.insert(t.name.as_str()) {
                return Err(format!("duplicate tool schema {}", t.name));
            }
            let mut params = HashSet::new();
            for p in &t.parameters {
                if !params.insert(p.name.as_str()) {
                    return Err(format!("tool {} repeats parameter {}", t.name, p.name));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(messages: Vec<ChatMessage>) -> CompletionRequest {
        CompletionRequest {
            model_id: "m".into(),
            messages,
            tools: vec![],
            temperature: 0.2,
        }
    }

    #[test]
    fn request_must_start_with_system() {
        assert!(req(vec![]).validate().is_err());
        assert!(req(vec![ChatMessage::user("hi")]).validate().is_err());
        assert!(req(vec![ChatMessage::system("s"), ChatMessage::user("hi")])
            .validate()
            .is_ok());
    }

    #[test]
    fn role_invariants() {
        let mut m = ChatMessage::user("x");
        m.tool_invocations.push(ToolInvocation {
            invocation_id: "1".into(),
            tool_name: "read_file".into(),
            arguments: json!({}),
        });
        assert!(m.check().is_err());
        let mut t = ChatMessage::tool_result("1", "ok");
        assert!(t.check().is_ok());
        t.tool_result_for = None;
        assert!(t.check().is_err());
    }

    #[test]
    fn duplicate_tool_names_rejected() {
        let schema = ToolSchema {
            name: "read_file".into(),
            description: String::new(),
            parameters: vec![],
        };
        let mut r = req(vec![ChatMessage::system("s")]);
        r.tools = vec![schema.clone(), schema];
        assert!(r.validate().unwrap_err().contains("duplicate"));
    }

    #[test]
    fn temperature_range() {
        let mut r = req(vec![ChatMessage::system("s")]);
        r.temperature = 2.5;
        assert!(r.validate().is_err());
    }
}
