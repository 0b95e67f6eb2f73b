use std::path::Path;

use super::{IterationError, Outcome};
use crate::ids::SetId;
use crate::planning::{FeatureMap, MapError, SetStatus};
use crate::vcs::{CommitRef, Vcs};

/// Closes the iteration for `set_id`. A finished set is committed and its
/// diff recorded in the map. Other outcomes roll the workspace back to the
/// last commit, unless `keep_partial` asks to commit what exists (used when
/// the run's time limit cut the iteration short).
pub fn finalize_iteration(
    map: &mut FeatureMap,
    set_id: &SetId,
    vcs: &Vcs,
    workspace: &Path,
    outcome: Outcome,
    keep_partial: bool,
    message: &str,
) -> Result<Option<CommitRef>, IterationError> {
    let set = map
        .set_mut(set_id)
        .ok_or_else(|| MapError::UnknownSet(set_id.clone()))?;
    let commit_work = outcome == Outcome::Done || keep_partial;
    if !commit_work {
        vcs.reset_to_head(workspace)?;
        set.transition(SetStatus::Failed)?;
        return Ok(None);
    }
    let commit = vcs.commit_iteration(workspace, set_id, message)?;
    let (diffs, modified_files) = vcs.diff_since(workspace, &commit)?;
    let ctx = &mut set.implementation_context;
    ctx.diffs = diffs;
    ctx.modified_files = modified_files;
    set.transition(if outcome == Outcome::Done {
        SetStatus::Done
    } else {
        SetStatus::Failed
    })?;
    Ok(Some(commit))
}
