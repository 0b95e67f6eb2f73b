use std::ffi::OsStr;
use std::path::{Component, Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SandboxError {
    #[error("path {0:?} escapes the workspace")]
    Escape(String),
    #[error("path {0:?} is empty or not a usable relative path")]
    Invalid(String),
    #[error("path {0:?} is inside a directory managed by the engine")]
    Reserved(String),
}

/// Top-level directories the agent may not touch.
const RESERVED: [&str; 2] = [".git", crate::vcs::METADATA_DIR];

/// Joins `relative` onto `root` after lexical normalization. Absolute paths,
/// traversal above the root and symlinks leading outside it are rejected.
pub fn resolve_path(root: &Path, relative: &str) -> Result<PathBuf, SandboxError> {
    if relative.contains('\0') || relative.trim().is_empty() {
        return Err(SandboxError::Invalid(relative.to_string()));
    }
    let mut parts: Vec<&OsStr> = Vec::new();
    for component in Path::new(relative).components() {
        match component {
            Component::CurDir => {}
            Component::Normal(p) => parts.push(p),
            Component::ParentDir => {
                if parts.pop().is_none() {
                    return Err(SandboxError::Escape(relative.to_string()));
                }
            }
            Component::RootDir | Component::Prefix(_) => {
                return Err(SandboxError::Escape(relative.to_string()))
            }
        }
    }
    if parts.is_empty() {
        return Err(SandboxError::Invalid(relative.to_string()));
    }
    if RESERVED.iter().any(|r| parts[0] == OsStr::new(r)) {
        return Err(SandboxError::Reserved(relative.to_string()));
    }
    let resolved: PathBuf = parts.iter().fold(root.to_path_buf(), |acc, p| acc.join(p));

    // symlinks: the deepest existing ancestor must canonicalize inside root
    let canonical_root = root
        .canonicalize()
        .map_err(|_| SandboxError::Invalid(relative.to_string()))?;
    let mut probe = resolved.as_path();
    loop {
        if probe.symlink_metadata().is_ok() {
            match probe.canonicalize() {
                Ok(real) if real.starts_with(&canonical_root) => break,
                // dangling symlink or a link pointing outside
                _ => return Err(SandboxError::Escape(relative.to_string())),
            }
        }
        match probe.parent() {
            Some(p) => probe = p,
            None => break,
        }
    }
    Ok(resolved)
}
