use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::design::{merge_incremental_design, DesignIncrement, OverallDesign};
use crate::ids::{DesignId, SetId};
use crate::llm::{ChatMessage, Gateway};
use crate::planning::IterationContext;
use crate::prompts;
use crate::repair::{request_valid, RetryPolicy, StageError};
use crate::violation::Violation;

/// The merged feature set in feature-schema shape, without an id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetDescription {
    pub name: String,
    pub business_workflow: String,
    #[serde(default)]
    pub business_rules: Vec<String>,
    #[serde(default)]
    pub ui_flow: String,
    #[serde(default)]
    pub data_flow: String,
    #[serde(default)]
    pub contained_ui_ids: Vec<DesignId>,
    #[serde(default)]
    pub contained_data_ids: Vec<DesignId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DevelopmentPlan {
    pub set_id: SetId,
    pub set_level_description: SetDescription,
    #[serde(default)]
    pub design_increments: Vec<DesignIncrement>,
    pub tasks: Vec<Task>,
}

/// What the chief programmer replies with.
#[derive(Debug, Clone, Deserialize)]
struct PlanOutput {
    set_level_description: SetDescription,
    #[serde(default)]
    design_increments: Vec<DesignIncrement>,
    tasks: Vec<Task>,
}

impl DevelopmentPlan {
    /// Task list as prompt text.
    pub fn render(&self) -> String {
        let d = &self.set_level_description;
        let mut out = format!(
            "# Feature set {}: {}\nWorkflow: {}\n",
            self.set_id, d.name, d.business_workflow
        );
        for r in &d.business_rules {
            out.push_str(&format!("Rule: {r}\n"));
        }
        out.push_str(&format!("UI flow: {}\nData flow: {}\n\nTasks:\n", d.ui_flow, d.data_flow));
        for t in &self.tasks {
            out.push_str(&format!("- {}: {}\n", t.id, t.text));
        }
        out
    }
}

/// Checks the plan against the design it will be merged into and returns the
/// merged design when it is valid.
fn check_plan(
    out: &PlanOutput,
    design: &OverallDesign,
    set_id: &SetId,
) -> Result<OverallDesign, Vec<Violation>> {
    let mut violations = Vec::new();
    if out.tasks.is_empty() {
        violations.push(Violation::new("tasks", "non-empty", "the plan has no tasks"));
    }
    let mut seen = HashSet::new();
    for (i, t) in out.tasks.iter().enumerate() {
        if t.text.trim().is_empty() {
            violations.push(Violation::new(format!("tasks[{i}]"), "non-empty", "task text is empty"));
        }
        if !seen.insert(t.id.as_str()) {
            violations.push(Violation::new(
                format!("tasks[{i}]"),
                "duplicate-id",
                format!("task id {} is used twice", t.id),
            ));
        }
    }
    let merged = match merge_incremental_design(design, &out.design_increments, set_id) {
        Ok(m) => Some(m),
        Err(e) => {
            violations.push(Violation::new("design_increments", "merge", e.to_string()));
            None
        }
    };
    let registry = merged.as_ref().unwrap_or(design);
    let d = &out.set_level_description;
    for id in d.contained_ui_ids.iter().chain(&d.contained_data_ids) {
        if !registry.contains(id) {
            violations.push(Violation::new(
                "set_level_description",
                "unresolved-design-id",
                format!("{id} is not in the overall design"),
            ));
        }
    }
    match merged {
        Some(m) if violations.is_empty() => Ok(m),
        _ => Err(violations),
    }
}

/// Fine-grained design and task plan for one feature set. Returns the plan
/// and the overall design with the plan's increments merged in.
pub fn chief_programmer_design(
    ctx: &IterationContext,
    design: &OverallDesign,
    gateway: &mut Gateway,
    policy: RetryPolicy,
) -> Result<(DevelopmentPlan, OverallDesign), StageError> {
    let set_id = ctx.current.set_id.clone();
    let user = format!(
        "{}\n# What earlier iterations changed\n{}\n# Overall design\n{}",
        ctx.render_design_context(),
        ctx.render_implementation_context(),
        design.render_tree()
    );
    let request = gateway.request(
        vec![
            ChatMessage::system(prompts::CHIEF_PROGRAMMER),
            ChatMessage::user(user),
        ],
        vec![],
    );
    let out: PlanOutput = request_valid(
        gateway,
        "development plan",
        "chief_programmer",
        request,
        policy,
        |out: &PlanOutput| check_plan(out, design, &set_id).err().unwrap_or_default(),
    )?;
    let merged = check_plan(&out, design, &set_id).expect("accepted plans merge");
    Ok((
        DevelopmentPlan {
            set_id,
            set_level_description: out.set_level_description,
            design_increments: out.design_increments,
            tasks: out.tasks,
        },
        merged,
    ))
}
