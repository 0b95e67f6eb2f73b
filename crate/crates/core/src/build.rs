//! Build command execution and compiler-error extraction.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ERROR_PATTERN: &str = "(?i)error";
const MAX_ERROR_LINES: usize = 100;
const FALLBACK_TAIL_LINES: usize = 50;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("build command is empty")]
    EmptyCommand,
    #[error("cannot start build command `{program}`: {detail}")]
    Spawn { program: String, detail: String },
    #[error("invalid error pattern: {0}")]
    Pattern(#[from] regex::Error),
    #[error("build I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub success: bool,
    pub exit_code: i32,
    pub duration_seconds: f64,
    pub error_excerpt: String,
}

/// Lines matching `pattern`, at most 100; the last 50 lines when none match.
pub fn extract_errors(output: &str, pattern: &Regex) -> String {
    let lines: Vec<&str> = output.lines().collect();
    let matched: Vec<&str> = lines
        .iter()
        .copied()
        .filter(|l| pattern.is_match(l))
        .take(MAX_ERROR_LINES)
        .collect();
    if matched.is_empty() {
        let start = lines.len().saturating_sub(FALLBACK_TAIL_LINES);
        lines[start..].join("\n")
    } else {
        matched.join("\n")
    }
}

#[derive(Debug, Clone)]
pub struct BuildRunner {
    pub command: Vec<String>,
    pub timeout: Duration,
    pub error_pattern: Regex,
}

impl BuildRunner {
    pub fn new(command: Vec<String>, timeout: Duration, pattern: &str) -> Result<Self, BuildError> {
        if command.is_empty() {
            return Err(BuildError::EmptyCommand);
        }
        Ok(Self {
            command,
            timeout,
            error_pattern: Regex::new(pattern)?,
        })
    }

    pub fn run(&self, workspace: &Path) -> Result<BuildReport, BuildError> {
        run_build(workspace, &self.command, self.timeout, &self.error_pattern)
    }
}

/// Runs `argv` in `workspace` with stdout and stderr merged. The child gets
/// its own process group so a timeout kills everything it spawned.
pub fn run_build(
    workspace: &Path,
    argv: &[String],
    timeout: Duration,
    pattern: &Regex,
) -> Result<BuildReport, BuildError> {
    let (program, args) = argv.split_first().ok_or(BuildError::EmptyCommand)?;
    let (mut reader, writer) = std::io::pipe()?;
    let started = Instant::now();
    let mut child = Command::new(program)
        .args(args)
        .current_dir(workspace)
        .stdin(Stdio::null())
        .stdout(writer.try_clone()?)
        .stderr(writer)
        .process_group(0)
        .spawn()
        .map_err(|e| BuildError::Spawn {
            program: program.clone(),
            detail: e.to_string(),
        })?;

    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = reader.read_to_end(&mut buf);
        let _ = tx.send(buf);
    });

    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if started.elapsed() >= timeout {
            timed_out = true;
            // SAFETY: kill(2) on our own child's process group.
            unsafe {
                libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
            }
            break child.wait()?;
        }
        thread::sleep(Duration::from_millis(10));
    };
    let duration = started.elapsed();
    // grandchildren that escaped the group may hold the pipe open; don't wait on them forever
    let output = rx
        .recv_timeout(Duration::from_secs(5))
        .map(|b| String::from_utf8_lossy(&b).into_owned())
        .unwrap_or_default();

    let exit_code = status.code().unwrap_or(-1);
    let success = !timed_out && exit_code == 0;
    let error_excerpt = if success {
        String::new()
    } else if timed_out {
        let excerpt = extract_errors(&output, pattern);
        let note = format!("build timed out after {} s", timeout.as_secs_f64());
        if excerpt.is_empty() {
            note
        } else {
            format!("{note}\n{excerpt}")
        }
    } else {
        let excerpt = extract_errors(&output, pattern);
        if excerpt.is_empty() {
            format!("build failed with exit code {exit_code} and no output")
        } else {
            excerpt
        }
    };
    Ok(BuildReport {
        success,
        exit_code: if timed_out && exit_code == 0 { -1 } else { exit_code },
        duration_seconds: duration.as_secs_f64(),
        error_excerpt,
    })
}
