//! Business-analyst stage: free text in, structured requirement document out.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::parse_numbered;
use crate::llm::{ChatMessage, Gateway};
use crate::prompts;
use crate::repair::{request_valid, RetryPolicy, StageError};
use crate::violation::Violation;

#[derive(Debug, Error)]
pub enum RequirementError {
    #[error("requirements text is empty")]
    EmptyText,
    #[error("scaffold {0} is not a directory")]
    NotADirectory(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRequirement {
    pub raw_text: String,
    pub app_name: String,
    pub scaffold_path: PathBuf,
}

impl UserRequirement {
    pub fn new(
        raw_text: impl Into<String>,
        app_name: impl Into<String>,
        scaffold_path: &Path,
    ) -> Result<Self, RequirementError> {
        let raw_text = raw_text.into();
        if raw_text.trim().is_empty() {
            return Err(RequirementError::EmptyText);
        }
        if !scaffold_path.is_dir() {
            return Err(RequirementError::NotADirectory(scaffold_path.to_path_buf()));
        }
        Ok(Self {
            raw_text,
            app_name: app_name.into(),
            scaffold_path: scaffold_path.to_path_buf(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusinessWorkflow {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementDocument {
    pub app_summary: String,
    pub workflows: Vec<BusinessWorkflow>,
}

pub fn validate_requirement_document(doc: &RequirementDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    if doc.app_summary.trim().is_empty() {
        out.push(Violation::new("app_summary", "non-empty", "app summary is empty"));
    }
    if doc.workflows.is_empty() {
        out.push(Violation::new("workflows", "non-empty", "no business workflows listed"));
    }
    let mut seen = HashSet::new();
    for (i, wf) in doc.workflows.iter().enumerate() {
        if parse_numbered("WF", &wf.id).is_none() {
            out.push(Violation::new(
                format!("workflows[{i}].id"),
                "id-format",
                format!("{:?} is not of the form WF-<positive number>", wf.id),
            ));
        }
        if !seen.insert(wf.id.as_str()) {
            out.push(Violation::new(
                wf.id.clone(),
                "duplicate-id",
                format!("workflow id {} is used more than once", wf.id),
            ));
        }
    }
    out
}

/// Rewrites workflow ids to WF-1..WF-n in listed order.
pub fn renumber_workflows(doc: &mut RequirementDocument) {
    for (i, wf) in doc.workflows.iter_mut().enumerate() {
        wf.id = format!("WF-{}", i + 1);
    }
}

pub fn analyze_requirements(
    req: &UserRequirement,
    gateway: &mut Gateway,
    policy: RetryPolicy,
) -> Result<RequirementDocument, StageError> {
    let request = gateway.request(
        vec![
            ChatMessage::system(prompts::BUSINESS_ANALYST),
            ChatMessage::user(format!(
                "App name: {}\n\nUser requirements:\n{}",
                req.app_name, req.raw_text
            )),
        ],
        Vec::new(),
    );
    let mut doc: RequirementDocument = request_valid(
        gateway,
        "requirements",
        "business_analyst",
        request,
        policy,
        validate_requirement_document,
    )?;
    renumber_workflows(&mut doc);
    Ok(doc)
}
