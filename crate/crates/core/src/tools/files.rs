use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::patch::{replace_unique, MatchPass, PatchError};
use super::sandbox::{resolve_path, SandboxError};
use crate::llm::{ParamKind, ToolInvocation, ToolParameter, ToolSchema};

#[derive(Debug, Error)]
pub enum ToolError {
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0} is not a regular file")]
    NotAFile(String),
    #[error("{0} is not valid UTF-8 text")]
    NotText(String),
    #[error("{0} already exists; use edit_file to change it")]
    AlreadyExists(String),
    #[error("refusing to write binary content to {0}")]
    BinaryContent(String),
    #[error("edit of {path} failed: {source}")]
    Patch { path: String, source: PatchError },
    #[error("unknown tool {0}")]
    UnknownTool(String),
    #[error("bad arguments for {tool}: {detail}")]
    BadArguments { tool: String, detail: String },
    #[error("I/O error on {path}: {detail}")]
    Io { path: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolResult {
    pub invocation_id: String,
    pub status: ToolStatus,
    pub detail: String,
}

impl ToolResult {
    /// Tool-role message text: `status: ok|error - detail`.
    pub fn render(&self) -> String {
        let status = match self.status {
            ToolStatus::Ok => "ok",
            ToolStatus::Error => "error",
        };
        format!("status: {status} - {}", self.detail)
    }
}

/// Result of executing one invocation, plus the latest content of the file
/// it touched (keyed by normalized workspace-relative path).
#[derive(Debug, Clone, PartialEq)]
pub struct ToolOutcome {
    pub result: ToolResult,
    pub touched: Option<(String, String)>,
}

fn io_err(path: &str, e: std::io::Error) -> ToolError {
    match e.kind() {
        ErrorKind::NotFound => ToolError::NotFound(path.to_string()),
        _ => ToolError::Io {
            path: path.to_string(),
            detail: e.to_string(),
        },
    }
}

pub fn read_file(root: &Path, relative: &str) -> Result<String, ToolError> {
    let path = resolve_path(root, relative)?;
    let meta = fs::metadata(&path).map_err(|e| io_err(relative, e))?;
    if !meta.is_file() {
        return Err(ToolError::NotAFile(relative.to_string()));
    }
    let bytes = fs::read(&path).map_err(|e| io_err(relative, e))?;
    String::from_utf8(bytes).map_err(|_| ToolError::NotText(relative.to_string()))
}

/// Writes a new file, creating parent directories. Never overwrites.
pub fn create_file(root: &Path, relative: &str, content: &str) -> Result<PathBuf, ToolError> {
    let path = resolve_path(root, relative)?;
    if content.contains('\0') {
        return Err(ToolError::BinaryContent(relative.to_string()));
    }
    if path.symlink_metadata().is_ok() {
        return Err(ToolError::AlreadyExists(relative.to_string()));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(relative, e))?;
    }
    // parents may now exist; resolve again so a link created meanwhile cannot redirect us
    let path = resolve_path(root, relative)?;
    let mut file = fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(&path)
        .map_err(|e| match e.kind() {
            ErrorKind::AlreadyExists => ToolError::AlreadyExists(relative.to_string()),
            _ => io_err(relative, e),
        })?;
    std::io::Write::write_all(&mut file, content.as_bytes()).map_err(|e| io_err(relative, e))?;
    Ok(path)
}

/// Replaces the unique occurrence of `search` and rewrites the file.
pub fn apply_edit(
    root: &Path,
    relative: &str,
    search: &str,
    replace: &str,
) -> Result<(String, MatchPass), ToolError> {
    if replace.contains('\0') {
        return Err(ToolError::BinaryContent(relative.to_string()));
    }
    let content = read_file(root, relative)?;
    let (updated, pass) = replace_unique(&content, search, replace).map_err(|source| {
        ToolError::Patch {
            path: relative.to_string(),
            source,
        }
    })?;
    let path = resolve_path(root, relative)?;
    fs::write(&path, updated.as_bytes()).map_err(|e| io_err(relative, e))?;
    Ok((updated, pass))
}

pub fn tool_schemas() -> Vec<ToolSchema> {
    let text = |name: &str, description: &str| ToolParameter {
        name: name.to_string(),
        kind: ParamKind::Text,
        required: true,
        description: description.to_string(),
    };
    let path = || text("path", "File path relative to the project root");
    vec![
        ToolSchema {
            name: "read_file".into(),
            description: "Read a text file of the project.".into(),
            parameters: vec![path()],
        },
        ToolSchema {
            name: "create_file".into(),
            description: "Create a new file (parent directories are created). Fails if it exists."
                .into(),
            parameters: vec![path(), text("content", "Full file content")],
        },
        ToolSchema {
            name: "edit_file".into(),
            description: "Replace the single occurrence of `search` in a file with `replace`."
                .into(),
            parameters: vec![
                path(),
                text("search", "Exact original code block; must occur exactly once"),
                text("replace", "Revised code block"),
            ],
        },
    ]
}

/// The project directory the tools operate on.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Normalized relative key for `file_contents`.
    pub fn key(&self, relative: &str) -> Result<String, SandboxError> {
        let abs = resolve_path(&self.root, relative)?;
        Ok(abs
            .strip_prefix(&self.root)
            .expect("resolved paths live under the root")
            .to_string_lossy()
            .replace('\\', "/"))
    }

    /// Runs one invocation. Failures become error results, never panics
    /// or early returns, so the dialogue can carry them back to the model.
    pub fn execute(&self, invocation: &ToolInvocation) -> ToolOutcome {
        let id = invocation.invocation_id.clone();
        match self.dispatch(invocation) {
            Ok((detail, touched)) => ToolOutcome {
                result: ToolResult {
                    invocation_id: id,
                    status: ToolStatus::Ok,
                    detail,
                },
                touched,
            },
            Err(e) => ToolOutcome {
                result: ToolResult {
                    invocation_id: id,
                    status: ToolStatus::Error,
                    detail: e.to_string(),
                },
                touched: None,
            },
        }
    }

    fn dispatch(
        &self,
        inv: &ToolInvocation,
    ) -> Result<(String, Option<(String, String)>), ToolError> {
        let arg = |name: &str| -> Result<&str, ToolError> {
            inv.arguments
                .get(name)
                .and_then(Value::as_str)
                .ok_or_else(|| ToolError::BadArguments {
                    tool: inv.tool_name.clone(),
                    detail: format!("missing string argument `{name}`"),
                })
        };
        match inv.tool_name.as_str() {
            "read_file" => {
                let path = arg("path")?;
                let content = read_file(&self.root, path)?;
                let key = self.key(path)?;
                Ok((
                    format!("read {key} ({} bytes); file_contents updated", content.len()),
                    Some((key, content)),
                ))
            }
            "create_file" => {
                let path = arg("path")?;
                let content = arg("content")?;
                create_file(&self.root, path, content)?;
                let key = self.key(path)?;
                Ok((
                    format!("created {key} ({} bytes); file_contents updated", content.len()),
                    Some((key, content.to_string())),
                ))
            }
            "edit_file" => {
                let path = arg("path")?;
                let (content, pass) = apply_edit(&self.root, path, arg("search")?, arg("replace")?)?;
                let key = self.key(path)?;
                let note = match pass {
                    MatchPass::Exact => "",
                    MatchPass::WhitespaceTolerant => " (matched ignoring whitespace)",
                };
                Ok((
                    format!("edited {key}{note}; file_contents updated"),
                    Some((key, content)),
                ))
            }
            other => Err(ToolError::UnknownTool(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn inv(tool: &str, args: Value) -> ToolInvocation {
        ToolInvocation {
            invocation_id: "c1".into(),
            tool_name: tool.into(),
            arguments: args,
        }
    }

    #[test]
    fn read_existing_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x"), "x").unwrap();
        assert_eq!(read_file(dir.path(), "x").unwrap(), "x");
        assert!(matches!(read_file(dir.path(), "nope"), Err(ToolError::NotFound(_))));
    }

    #[test]
    fn binary_file_is_not_text() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.bin"), [0xff, 0xfe, 0x00]).unwrap();
        assert!(matches!(read_file(dir.path(), "b.bin"), Err(ToolError::NotText(_))));
    }

    #[test]
    fn create_nested_and_refuse_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        create_file(dir.path(), "a/b/c.kt", "fun c() {}").unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("a/b/c.kt")).unwrap(), "fun c() {}");
        assert!(matches!(
            create_file(dir.path(), "a/b/c.kt", "again"),
            Err(ToolError::AlreadyExists(_))
        ));
        create_file(dir.path(), "empty.txt", "").unwrap();
        assert_eq!(fs::metadata(dir.path().join("empty.txt")).unwrap().len(), 0);
        assert!(matches!(
            create_file(dir.path(), "nul.bin", "a\0b"),
            Err(ToolError::BinaryContent(_))
        ));
    }

    #[test]
    fn edit_then_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        create_file(dir.path(), "m.kt", "fn main(){}").unwrap();
        apply_edit(dir.path(), "m.kt", "main", "start").unwrap();
        assert_eq!(read_file(dir.path(), "m.kt").unwrap(), "fn start(){}");
    }

    #[test]
    fn execute_reports_errors_as_results() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path());
        let out = ws.execute(&inv("read_file", json!({"path": "missing.kt"})));
        assert_eq!(out.result.status, ToolStatus::Error);
        assert!(out.result.render().starts_with("status: error - missing.kt not found"));
        assert!(out.touched.is_none());

        let out = ws.execute(&inv("delete_file", json!({"path": "x"})));
        assert!(out.result.detail.contains("unknown tool"));
        let out = ws.execute(&inv("create_file", json!({"path": "x"})));
        assert!(out.result.detail.contains("`content`"));
    }

    #[test]
    fn execute_tracks_touched_files_by_normalized_key() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path());
        let out = ws.execute(&inv("create_file", json!({"path": "src/./a.kt", "content": "v1"})));
        assert_eq!(out.result.status, ToolStatus::Ok);
        assert_eq!(out.touched, Some(("src/a.kt".to_string(), "v1".to_string())));
        let out = ws.execute(&inv(
            "edit_file",
            json!({"path": "src/a.kt", "search": "v1", "replace": "v2"}),
        ));
        assert_eq!(out.touched, Some(("src/a.kt".to_string(), "v2".to_string())));
        assert!(out.result.render().starts_with("status: ok - edited src/a.kt"));
    }

    #[test]
    fn schemas_have_fixed_names() {
        let names: Vec<String> = tool_schemas().into_iter().map(|s| s.name).collect();
        assert_eq!(names, ["read_file", "create_file", "edit_file"]);
    }
}
