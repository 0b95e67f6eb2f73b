use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/countdown_timer")
}

fn copy_dir(from: &Path, to: &Path) {
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

fn evodev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evodev"))
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn workspace() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("app");
    copy_dir(&fixture().join("scaffold"), &ws);
    (dir, ws)
}

fn start(cmd: &str, ws: &Path) -> Output {
    let fx = fixture();
    evodev(&[
        cmd,
        fx.join("requirements.txt").to_str().unwrap(),
        ws.to_str().unwrap(),
        "--config",
        fx.join("config.json").to_str().unwrap(),
    ])
}

#[test]
fn run_inspect_and_metrics() {
    let (_d, ws) = workspace();
    let out = start("run", &ws);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    let stdout = text(&out.stdout);
    for set in ["FS-1", "FS-2", "FS-3"] {
        assert!(stdout.contains(&format!("{set}: Done")), "{stdout}");
    }
    assert!(stdout.contains("cost: $"));

    let dot = evodev(&["inspect", ws.to_str().unwrap(), "--dot"]);
    assert_eq!(dot.status.code(), Some(0));
    let dot = text(&dot.stdout);
    assert!(dot.starts_with("digraph"), "{dot}");
    assert_eq!(dot.matches("->").count(), 2);

    let table = text(&evodev(&["inspect", ws.to_str().unwrap()]).stdout);
    assert!(table.contains("checkpoint: complete"), "{table}");

    let scores = ws.parent().unwrap().join("scores.json");
    fs::write(&scores, r#"{"app": "Countdown Timer", "scores": [4, 4, 3, 4, 2, 4, 4, 3, 4]}"#).unwrap();
    let m = evodev(&["metrics", ws.to_str().unwrap(), "--scores", scores.to_str().unwrap()]);
    assert_eq!(m.status.code(), Some(0), "stderr: {}", text(&m.stderr));
    let report: serde_json::Value = serde_json::from_slice(&m.stdout).unwrap();
    let fc = report["function_completeness"].as_f64().unwrap();
    assert!((fc - 32.0 / 9.0).abs() < 1e-9, "{report}");
}

#[test]
fn plan_then_resume() {
    let (_d, ws) = workspace();
    let out = start("plan", &ws);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    assert!(ws.join(".evodev/feature_map.json").exists());
    assert!(!ws.join(".evodev/run_summary.json").exists());
    let out = evodev(&["resume", ws.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    // a second start on the same workspace is refused
    let again = start("run", &ws);
    assert_eq!(again.status.code(), Some(1));
    assert!(text(&again.stderr).starts_with("error"), "{}", text(&again.stderr));
}

#[test]
fn missing_api_key_is_an_error() {
    let (_d, ws) = workspace();
    let config = ws.parent().unwrap().join("live.json");
    fs::write(&config, r#"{"app_name": "x", "build": {"command": ["sh", "build.sh"]}}"#).unwrap();
    let fx = fixture();
    let out = evodev(&[
        "run",
        fx.join("requirements.txt").to_str().unwrap(),
        ws.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("OPENAI_API_KEY"), "{}", text(&out.stderr));
}

#[test]
fn resume_without_checkpoint_fails() {
    let (_d, ws) = workspace();
    let out = evodev(&["resume", ws.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
