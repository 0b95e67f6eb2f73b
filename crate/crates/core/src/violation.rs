use std::fmt;

use serde::{Deserialize, Serialize};

/// A broken validation rule. Validators return these as values; stages turn
/// a non-empty list into a repair prompt or an error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// The field or element the rule applies to (`workflows[2].id`, `FS-3`).
    pub field: String,
    /// Short machine-stable rule name, e.g. `duplicate-id`.
    pub rule: String,
    pub detail: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: &str, detail: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.to_string(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.field, self.detail)
    }
}

pub(crate) fn render_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("- {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}
