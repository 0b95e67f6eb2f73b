#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use evodev_core::pipeline::{cmd_run, RunOptions};
use evodev_core::{RunConfig, RunReport};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/countdown_timer")
}

pub fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), &target).unwrap();
        }
    }
}

/// Fresh copy of the scaffold inside a new temporary directory.
pub fn fresh_workspace() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("countdown_timer");
    copy_dir(&fixture_dir().join("scaffold"), &ws);
    (dir, ws)
}

pub fn golden_config() -> RunConfig {
    RunConfig::load(&fixture_dir().join("config.json")).unwrap()
}

pub fn requirements() -> PathBuf {
    fixture_dir().join("requirements.txt")
}

pub fn run_golden(ws: &Path, options: &RunOptions) -> RunReport {
    cmd_run(&requirements(), ws, golden_config(), options).unwrap()
}

/// Every file under `.evodev/`, keyed by relative path.
pub fn metadata_tree(ws: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let entry = entry.unwrap();
            let path = entry.path();
            if entry.file_type().unwrap().is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let root = ws.join(".evodev");
    let mut out = BTreeMap::new();
    walk(&root, &root, &mut out);
    out
}

/// JSON with timestamp fields removed, for comparisons that ignore time.
pub fn without_timestamps(bytes: &[u8]) -> serde_json::Value {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(map) => {
                map.retain(|k, _| !matches!(k.as_str(), "timestamp_ms" | "started_ms" | "finished_ms"));
                map.values_mut().for_each(strip);
            }
            serde_json::Value::Array(items) => items.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
    strip(&mut v);
    v
}

pub fn git(ws: &Path, args: &[&str]) -> String {
    let out = Command::new("git").args(args).current_dir(ws).output().unwrap();
    assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// `(commit id, subject)` from oldest to newest.
pub fn git_log(ws: &Path) -> Vec<(String, String)> {
    git(ws, &["log", "--reverse", "--format=%H %s"])
        .lines()
        .map(|l| {
            let (id, subject) = l.split_once(' ').unwrap();
            (id.to_string(), subject.to_string())
        })
        .collect()
}
