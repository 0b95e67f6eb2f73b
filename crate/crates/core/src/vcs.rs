//! Git-backed iteration ledger. Each feature set maps to exactly one commit.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::ids::SetId;

pub const METADATA_DIR: &str = ".evodev";
const AUTHOR_NAME: &str = "evodev";
const AUTHOR_EMAIL: &str = "evodev@localhost";
pub const EMPTY_COMMIT_FLAG: &str = "[empty]";

#[derive(Debug, Error)]
pub enum VcsError {
    #[error("cannot run git: {0}")]
    Spawn(String),
    #[error("`git {args}` failed: {stderr}")]
    Git { args: String, stderr: String },
    #[error("unresolved revision {0}")]
    UnknownRevision(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRef {
    pub id: String,
    pub set_id: SetId,
    pub message: String,
}

/// Git invocations pinned to a fixed identity and to dates taken from the
/// run clock, so identical runs produce identical commit ids. Only commits
/// advance the clock.
#[derive(Debug, Clone)]
pub struct Vcs {
    clock: Clock,
}

impl Vcs {
    pub fn new(clock: Clock) -> Self {
        Self { clock }
    }

    fn git(&self, workspace: &Path, args: &[&str]) -> Result<Output, VcsError> {
        let date = format!("@{} +0000", self.clock.peek_ms() / 1000);
        let out = Command::new("git")
            .arg("-c")
            .arg("commit.gpgsign=false")
            .arg("-c")
            .arg("core.autocrlf=false")
            .args(args)
            .current_dir(workspace)
            .env("GIT_AUTHOR_NAME", AUTHOR_NAME)
            .env("GIT_AUTHOR_EMAIL", AUTHOR_EMAIL)
            .env("GIT_COMMITTER_NAME", AUTHOR_NAME)
            .env("GIT_COMMITTER_EMAIL", AUTHOR_EMAIL)
            .env("GIT_AUTHOR_DATE", &date)
            .env("GIT_COMMITTER_DATE", &date)
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .env("GIT_CONFIG_GLOBAL", "/dev/null")
            .env_remove("GIT_DIR")
            .env_remove("GIT_WORK_TREE")
            .output()
            .map_err(|e| VcsError::Spawn(e.to_string()))?;
        if out.status.success() {
            Ok(out)
        } else {
            Err(VcsError::Git {
                args: args.join(" "),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            })
        }
    }

    fn git_text(&self, workspace: &Path, args: &[&str]) -> Result<String, VcsError> {
        let out = self.git(workspace, args)?;
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }

    /// Initializes the repository and commits the scaffold. Safe to call on
    /// an already initialized workspace.
    pub fn init_repo(&self, workspace: &Path) -> Result<(), VcsError> {
        if !workspace.join(".git").exists() {
            self.git(workspace, &["init", "-q", "-b", "main"])?;
        }
        let info = workspace.join(".git").join("info");
        fs::create_dir_all(&info)?;
        let exclude = info.join("exclude");
        let existing = fs::read_to_string(&exclude).unwrap_or_default();
        let entry = format!("/{METADATA_DIR}/");
        if !existing.lines().any(|l| l.trim() == entry) {
            let mut f = fs::OpenOptions::new().create(true).append(true).open(&exclude)?;
            if !existing.is_empty() && !existing.ends_with('\n') {
                writeln!(f)?;
            }
            writeln!(f, "{entry}")?;
        }
        if self.head(workspace)?.is_none() {
            self.git(workspace, &["add", "-A"])?;
            self.clock.now_ms();
            self.git(
                workspace,
                &["commit", "-q", "--allow-empty", "-m", "Initial scaffold"],
            )?;
        }
        Ok(())
    }

    pub fn head(&self, workspace: &Path) -> Result<Option<String>, VcsError> {
        match self.git(workspace, &["rev-parse", "--verify", "-q", "HEAD"]) {
            Ok(out) => Ok(Some(String::from_utf8_lossy(&out.stdout).trim().to_string())),
            Err(VcsError::Git { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn is_clean(&self, workspace: &Path) -> Result<bool, VcsError> {
        Ok(self
            .git_text(workspace, &["status", "--porcelain"])?
            .trim()
            .is_empty())
    }

    /// Stages everything and commits. An iteration without changes still gets
    /// its own commit, marked in the message.
    pub fn commit_iteration(
        &self,
        workspace: &Path,
        set_id: &SetId,
        message: &str,
    ) -> Result<CommitRef, VcsError> {
        self.git(workspace, &["add", "-A"])?;
        let staged = self.git(workspace, &["diff", "--cached", "--quiet"]).is_err();
        let message = if staged {
            format!("{set_id}: {message}")
        } else {
            format!("{set_id}: {message} {EMPTY_COMMIT_FLAG}")
        };
        self.clock.now_ms();
        self.git(workspace, &["commit", "-q", "--allow-empty", "-m", &message])?;
        let id = self.head(workspace)?.ok_or_else(|| VcsError::UnknownRevision("HEAD".into()))?;
        Ok(CommitRef {
            id,
            set_id: set_id.clone(),
            message,
        })
    }

    /// Unified diff and touched paths between the commit's parent and the commit.
    pub fn diff_since(
        &self,
        workspace: &Path,
        commit: &CommitRef,
    ) -> Result<(String, Vec<String>), VcsError> {
        let spec = format!("{}^{{commit}}", commit.id);
        self.git(workspace, &["rev-parse", "--verify", "-q", &spec])
            .map_err(|_| VcsError::UnknownRevision(commit.id.clone()))?;
        let parent = format!("{}^", commit.id);
        let diff = self.git_text(workspace, &["diff", "--no-color", "--no-ext-diff", &parent, &commit.id])?;
        let names = self.git_text(workspace, &["diff", "--name-only", &parent, &commit.id])?;
        let files = names
            .lines()
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        Ok((diff, files))
    }

    /// Discards uncommitted work, leaving pipeline metadata alone.
    pub fn reset_to_head(&self, workspace: &Path) -> Result<(), VcsError> {
        self.git(workspace, &["reset", "-q", "--hard", "HEAD"])?;
        self.git(workspace, &["clean", "-q", "-fd"])?;
        Ok(())
    }

    pub fn commit_count(&self, workspace: &Path) -> Result<usize, VcsError> {
        let n = self.git_text(workspace, &["rev-list", "--count", "HEAD"])?;
        Ok(n.trim().parse().unwrap_or(0))
    }

    pub fn log_subjects(&self, workspace: &Path) -> Result<Vec<String>, VcsError> {
        Ok(self
            .git_text(workspace, &["log", "--reverse", "--format=%s"])?
            .lines()
            .map(str::to_string)
            .collect())
    }
}
