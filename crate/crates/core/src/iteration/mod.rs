//! One development iteration per feature set: chief programmer plan,
//! programmer coding and debugging phases, then commit or rollback.

mod finalize;
mod plan;
mod programmer;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::info;

pub use finalize::finalize_iteration;
pub use plan::{chief_programmer_design, DevelopmentPlan, SetDescription, Task};
pub use programmer::{
    run_coding_phase, run_debug_phase, start_trajectory, DebugError, DebugResult, Outcome,
    PhaseEnd, Trajectory,
};

use crate::build::{BuildError, BuildRunner};
use crate::clock::Clock;
use crate::design::OverallDesign;
use crate::ids::SetId;
use crate::llm::{Gateway, GatewayError, UsageLedger};
use crate::planning::{assemble_iteration_context, FeatureMap, MapError, SetStatus};
use crate::repair::{RetryPolicy, StageError};
use crate::tools::Workspace;
use crate::vcs::{Vcs, VcsError};

pub const DEFAULT_MAX_TURNS: u32 = 40;
pub const DEFAULT_DEBUG_ATTEMPTS: u32 = 10;

/// Global run deadline in clock milliseconds; `None` never expires.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Deadline(pub Option<u64>);

impl Deadline {
    pub fn passed(&self, clock: &Clock) -> bool {
        self.0.is_some_and(|ms| clock.peek_ms() >= ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IterationLimits {
    pub max_turns: u32,
    pub debug_max_attempts: u32,
}

impl Default for IterationLimits {
    fn default() -> Self {
        Self {
            max_turns: DEFAULT_MAX_TURNS,
            debug_max_attempts: DEFAULT_DEBUG_ATTEMPTS,
        }
    }
}

#[derive(Debug, Error)]
pub enum IterationError {
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Vcs(#[from] VcsError),
    #[error(transparent)]
    Build(#[from] BuildError),
}

impl From<DebugError> for IterationError {
    fn from(e: DebugError) -> Self {
        match e {
            DebugError::Gateway(g) => IterationError::Gateway(g),
            DebugError::Build(b) => IterationError::Build(b),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationUsage {
    pub calls: usize,
    pub usd: f64,
    pub seconds: f64,
}

/// `iterations/<set_id>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub set_id: SetId,
    /// Absent when the set never reached planning.
    pub plan: Option<DevelopmentPlan>,
    pub turns: u32,
    pub build_attempts: u32,
    pub outcome: Outcome,
    pub commit_id: Option<String>,
    pub final_build_success: bool,
    pub started_ms: u64,
    pub finished_ms: u64,
    pub notes: Vec<String>,
    pub usage: IterationUsage,
}

/// Everything an iteration needs besides the map and design.
pub struct IterationEnv<'a> {
    pub workspace: Workspace,
    pub gateway: &'a mut Gateway,
    pub runner: &'a BuildRunner,
    pub vcs: &'a Vcs,
    pub limits: IterationLimits,
    pub policy: RetryPolicy,
    pub deadline: Deadline,
}

fn usage_since(ledger: &UsageLedger, start: usize, notes: &mut Vec<String>) -> IterationUsage {
    let slice = UsageLedger {
        entries: ledger.entries[start..].to_vec(),
        price_table: ledger.price_table.clone(),
    };
    let seconds = slice.entries.iter().map(|e| e.wall_clock_seconds).sum();
    let usd = match slice.report() {
        Ok(r) => r.total_usd,
        Err(e) => {
            notes.push(format!("cost unknown: {e}"));
            0.0
        }
    };
    IterationUsage {
        calls: slice.entries.len(),
        usd,
        seconds,
    }
}

#[derive(Debug)]
pub struct IterationResult {
    pub record: IterationRecord,
    pub trajectory: Option<Trajectory>,
}

/// Runs the iteration for `set_id`, updating `map` (status, diffs) and
/// `design` (merged increments).
pub fn run_iteration(
    env: &mut IterationEnv<'_>,
    map: &mut FeatureMap,
    design: &mut OverallDesign,
    set_id: &SetId,
) -> Result<IterationResult, IterationError> {
    let started_ms = env.gateway.clock().now_ms();
    let ledger_start = env.gateway.ledger().entries.len();
    map.set_mut(set_id)
        .ok_or_else(|| MapError::UnknownSet(set_id.clone()))?
        .transition(SetStatus::InProgress)?;
    let mut notes = Vec::new();
    let mut record = IterationRecord {
        set_id: set_id.clone(),
        plan: None,
        turns: 0,
        build_attempts: 0,
        outcome: Outcome::Failed,
        commit_id: None,
        final_build_success: false,
        started_ms,
        finished_ms: started_ms,
        notes: Vec::new(),
        usage: IterationUsage::default(),
    };

    let mut trajectory = None;
    let mut keep_partial = false;
    let skipped = if env.deadline.passed(env.gateway.clock()) {
        record.outcome = Outcome::TimedOut;
        notes.push("time limit reached before the iteration started".into());
        true
    } else {
        match assemble_iteration_context(map, set_id, design) {
            Err(MapError::AncestorNotDone { ancestor, status, .. }) => {
                notes.push(format!(
                    "blocked: prerequisite set {ancestor} is {}",
                    crate::planning::status_name(status)
                ));
                true
            }
            Err(e) => return Err(e.into()),
            Ok(ctx) => {
                let (plan, merged) =
                    chief_programmer_design(&ctx, design, env.gateway, env.policy)?;
                *design = merged;
                let mut traj = start_trajectory(&plan, &ctx, &env.workspace);
                record.plan = Some(plan);
                let (end, turns) = run_coding_phase(
                    &mut traj,
                    &env.workspace,
                    env.gateway,
                    env.limits.max_turns,
                    env.deadline,
                )?;
                record.turns = turns;
                match end {
                    PhaseEnd::Finished => {
                        let debug = run_debug_phase(
                            &mut traj,
                            &env.workspace,
                            env.runner,
                            env.gateway,
                            env.limits.debug_max_attempts,
                            env.deadline,
                        )?;
                        record.build_attempts = debug.build_attempts;
                        record.final_build_success = debug.last_report.success;
                        record.outcome = debug.outcome;
                        match debug.outcome {
                            Outcome::Done => {}
                            Outcome::Failed => notes.push(format!(
                                "build still failing after {} attempts",
                                debug.build_attempts
                            )),
                            Outcome::TimedOut => {
                                keep_partial = true;
                                notes.push("time limit reached while debugging".into());
                            }
                        }
                    }
                    PhaseEnd::TurnLimit => {
                        record.outcome = Outcome::TimedOut;
                        notes.push(format!(
                            "coding phase used all {turns} turns without {}",
                            crate::prompts::END_TOKEN
                        ));
                    }
                    PhaseEnd::Deadline => {
                        record.outcome = Outcome::TimedOut;
                        keep_partial = true;
                        notes.push("time limit reached while coding".into());
                    }
                }
                trajectory = Some(traj);
                false
            }
        }
    };

    let message = record
        .plan
        .as_ref()
        .map(|p| p.set_level_description.name.clone())
        .filter(|n| !n.trim().is_empty())
        .unwrap_or_else(|| "iteration".into());
    let commit = if skipped {
        let set = map.set_mut(set_id).expect("checked above");
        set.transition(SetStatus::Failed)?;
        None
    } else {
        let message = if keep_partial {
            format!("{message} (partial, time limit reached)")
        } else {
            message
        };
        finalize_iteration(
            map,
            set_id,
            env.vcs,
            env.workspace.root(),
            record.outcome,
            keep_partial,
            &message,
        )?
    };
    record.commit_id = commit.map(|c| c.id);
    record.usage = usage_since(env.gateway.ledger(), ledger_start, &mut notes);
    record.notes = notes;
    record.finished_ms = env.gateway.clock().now_ms();
    info!(set = %set_id, outcome = ?record.outcome, turns = record.turns, builds = record.build_attempts, "iteration finished");
    Ok(IterationResult { record, trajectory })
}
