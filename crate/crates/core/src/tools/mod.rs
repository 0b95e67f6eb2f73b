//! Sandboxed file tools for the programmer agent and the search/replace
//! patch engine behind `edit_file`.

mod files;
mod patch;
mod sandbox;

pub use files::{
    apply_edit, create_file, read_file, tool_schemas, ToolError, ToolOutcome, ToolResult,
    ToolStatus, Workspace,
};
pub use patch::{locate, replace_unique, EditBlock, MatchPass, PatchError, SearchMatch};
pub use sandbox::{resolve_path, SandboxError};
