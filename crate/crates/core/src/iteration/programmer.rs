use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::plan::DevelopmentPlan;
use super::Deadline;
use crate::build::{BuildError, BuildReport, BuildRunner};
use crate::llm::{ChatMessage, Gateway, GatewayError, Role};
use crate::planning::IterationContext;
use crate::prompts::{self, END_TOKEN};
use crate::tools::{tool_schemas, Workspace};

const AGENT_ROLE: &str = "programmer";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub messages: Vec<ChatMessage>,
    /// Latest content of every file a tool touched, by workspace-relative path.
    pub file_contents: BTreeMap<String, String>,
    /// Invocations executed so far; each has exactly one tool-role report.
    pub executed_invocations: usize,
}

impl Trajectory {
    fn render_file_contents(&self) -> String {
        if self.file_contents.is_empty() {
            return "file_contents: no files touched yet.".into();
        }
        let mut out = String::from("file_contents (latest version of every touched file):\n");
        for (path, content) in &self.file_contents {
            out.push_str(&format!("\n=== {path} ===\n{content}"));
            if !content.ends_with('\n') {
                out.push('\n');
            }
        }
        out
    }

    /// Dialogue as sent: the file_contents snapshot follows the opening user message.
    fn request_messages(&self) -> Vec<ChatMessage> {
        let split = self
            .messages
            .iter()
            .position(|m| m.role == Role::User)
            .map_or(self.messages.len(), |i| i + 1);
        let mut out = self.messages[..split].to_vec();
        out.push(ChatMessage::user(self.render_file_contents()));
        out.extend_from_slice(&self.messages[split..]);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseEnd {
    Finished,
    TurnLimit,
    Deadline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Done,
    Failed,
    TimedOut,
}

fn list_files(root: &Path) -> Vec<String> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) {
        let Ok(entries) = fs::read_dir(dir) else { return };
        for entry in entries.flatten() {
            let path = entry.path();
            let name = entry.file_name();
            if dir == root && (name == ".git" || name == crate::vcs::METADATA_DIR) {
                continue;
            }
            match entry.file_type() {
                Ok(t) if t.is_dir() => walk(root, &path, out),
                Ok(t) if t.is_file() => {
                    if let Ok(rel) = path.strip_prefix(root) {
                        out.push(rel.to_string_lossy().replace('\\', "/"));
                    }
                }
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

/// Opening messages of the programmer dialogue.
pub fn start_trajectory(plan: &DevelopmentPlan, ctx: &IterationContext, ws: &Workspace) -> Trajectory {
    let files = list_files(ws.root()).join("\n");
    let user = format!(
        "{}\n# Context\n{}\n# What earlier iterations changed\n{}\n# Project files\n{}\n",
        plan.render(),
        ctx.render_design_context(),
        ctx.render_implementation_context(),
        files
    );
    Trajectory {
        messages: vec![ChatMessage::system(prompts::PROGRAMMER), ChatMessage::user(user)],
        ..Trajectory::default()
    }
}

/// One programmer completion. Tool invocations run in order, are stripped
/// from the retained assistant message and reported back one by one.
/// Returns whether the reply invoked any tool, and its text.
fn programmer_turn(
    traj: &mut Trajectory,
    ws: &Workspace,
    gateway: &mut Gateway,
) -> Result<(bool, String), GatewayError> {
    let request = gateway.request(traj.request_messages(), tool_schemas());
    let (reply, _) = gateway.complete(AGENT_ROLE, &request)?;
    let invocations = reply.tool_invocations;
    traj.messages.push(ChatMessage::assistant(reply.content.clone()));
    for inv in &invocations {
        let outcome = ws.execute(inv);
        if let Some((path, content)) = outcome.touched {
            traj.file_contents.insert(path, content);
        }
        traj.messages.push(ChatMessage::tool_result(
            inv.invocation_id.clone(),
            format!(
                "{} [{} call executed and removed; file_contents holds the latest files]",
                outcome.result.render(),
                inv.tool_name
            ),
        ));
        traj.executed_invocations += 1;
    }
    Ok((!invocations.is_empty(), reply.content))
}

/// Tool loop until the model says TIME_TO_END, `max_turns` completions
/// have been used, or the deadline passes. Returns the turns used.
pub fn run_coding_phase(
    traj: &mut Trajectory,
    ws: &Workspace,
    gateway: &mut Gateway,
    max_turns: u32,
    deadline: Deadline,
) -> Result<(PhaseEnd, u32), GatewayError> {
    let mut turns = 0;
    while turns < max_turns {
        if deadline.passed(gateway.clock()) {
            return Ok((PhaseEnd::Deadline, turns));
        }
        let (used_tools, text) = programmer_turn(traj, ws, gateway)?;
        turns += 1;
        if !used_tools {
            if text.contains(END_TOKEN) {
                return Ok((PhaseEnd::Finished, turns));
            }
            traj.messages.push(ChatMessage::user(format!(
                "Continue with the remaining tasks using the tools. Reply {END_TOKEN} when the plan is implemented."
            )));
        }
    }
    Ok((PhaseEnd::TurnLimit, turns))
}

#[derive(Debug, thiserror::Error)]
pub enum DebugError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Build(#[from] BuildError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebugResult {
    pub outcome: Outcome,
    pub build_attempts: u32,
    pub fix_turns: u32,
    pub last_report: BuildReport,
}

/// Build, and while the build fails feed the errors back for a single fix
/// turn, up to `max_attempts` builds.
pub fn run_debug_phase(
    traj: &mut Trajectory,
    ws: &Workspace,
    runner: &BuildRunner,
    gateway: &mut Gateway,
    max_attempts: u32,
    deadline: Deadline,
) -> Result<DebugResult, DebugError> {
    let max_attempts = max_attempts.max(1);
    let mut attempts = 0;
    let mut fix_turns = 0;
    loop {
        let report = runner.run(ws.root())?;
        attempts += 1;
        let outcome = if report.success {
            Some(Outcome::Done)
        } else if attempts >= max_attempts {
            Some(Outcome::Failed)
        } else if deadline.passed(gateway.clock()) {
            Some(Outcome::TimedOut)
        } else {
            None
        };
        if let Some(outcome) = outcome {
            return Ok(DebugResult {
                outcome,
                build_attempts: attempts,
                fix_turns,
                last_report: report,
            });
        }
        traj.messages.push(ChatMessage::user(format!(
            "The build failed (attempt {attempts}). Fix these errors:\n```\n{}\n```",
            report.error_excerpt
        )));
        programmer_turn(traj, ws, gateway)?;
        fix_turns += 1;
    }
}
