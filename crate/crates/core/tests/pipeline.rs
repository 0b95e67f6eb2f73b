mod common;

use std::fs;
use std::time::Instant;

use common::*;
use evodev_core::iteration::IterationRecord;
use evodev_core::llm::Transcript;
use evodev_core::pipeline::{cmd_inspect, cmd_metrics, cmd_plan, cmd_resume, cmd_run, PipelineError, RunOptions};
use evodev_core::store::{ArtifactStore, Checkpoint, Stage, StoreError};
use evodev_core::{FeatureMap, Outcome};

fn checkpoint(ws: &std::path::Path) -> Checkpoint {
    ArtifactStore::open(ws).unwrap().load_checkpoint().unwrap().unwrap()
}

#[test]
fn golden_run_completes_with_three_iteration_commits() {
    let (_d, ws) = fresh_workspace();
    let start = Instant::now();
    let report = run_golden(&ws, &RunOptions::default());
    assert!(start.elapsed().as_secs() < 10);
    assert_eq!(report.exit_code, 0);
    let log = git_log(&ws);
    assert_eq!(log.len(), 4, "{log:?}");
    assert_eq!(log[0].1, "Initial scaffold");
    assert!(log[1].1.starts_with("FS-1:"));
    assert!(log[2].1.starts_with("FS-2:"));
    assert!(log[3].1.starts_with("FS-3:"));
    assert_eq!(checkpoint(&ws).stage, Stage::Complete);
    assert!(git(&ws, &["status", "--porcelain"]).is_empty());
    let fs2: IterationRecord = ArtifactStore::open(&ws).unwrap().load("iterations/FS-2.json").unwrap();
    assert_eq!(fs2.build_attempts, 2);
    assert_eq!(fs2.outcome, Outcome::Done);
}

#[test]
fn iterations_run_in_topological_order() {
    let (_d, ws) = fresh_workspace();
    run_golden(&ws, &RunOptions::default());
    let store = ArtifactStore::open(&ws).unwrap();
    let map: FeatureMap = store.load("feature_map.json").unwrap();
    let order = evodev_core::planning::topological_order(&map).unwrap();
    let mut records: Vec<IterationRecord> = order
        .iter()
        .map(|s| store.load(&format!("iterations/{s}.json")).unwrap())
        .collect();
    records.sort_by_key(|r| r.started_ms);
    let executed: Vec<_> = records.iter().map(|r| r.set_id.clone()).collect();
    assert_eq!(executed, order);
    for w in records.windows(2) {
        assert!(w[0].finished_ms <= w[1].started_ms);
    }
}

#[test]
fn modified_files_match_paths_touched_by_tools() {
    let (_d, ws) = fresh_workspace();
    run_golden(&ws, &RunOptions::default());
    let store = ArtifactStore::open(&ws).unwrap();
    let map: FeatureMap = store.load("feature_map.json").unwrap();
    for set in &map.sets {
        let traj: evodev_core::Trajectory =
            store.load(&format!("iterations/{}.trajectory.json", set.id)).unwrap();
        // read-only touches do not change files
        let record: IterationRecord = store.load(&format!("iterations/{}.json", set.id)).unwrap();
        let changed: Vec<String> = git(&ws, &["diff", "--name-only", &format!("{}^", record.commit_id.as_ref().unwrap()), record.commit_id.as_ref().unwrap()])
            .lines()
            .map(str::to_string)
            .collect();
        assert_eq!(set.implementation_context.modified_files, changed);
        let touched: Vec<&String> = traj.file_contents.keys().collect();
        assert_eq!(touched, changed.iter().collect::<Vec<_>>(), "set {}", set.id);
    }
}

#[test]
fn truncated_transcript_fails_and_keeps_last_checkpoint() {
    let (dir, ws) = fresh_workspace();
    let mut t: Transcript =
        serde_json::from_str(&fs::read_to_string(fixture_dir().join("transcript.json")).unwrap()).unwrap();
    t.steps.truncate(6); // stops inside the first iteration
    let path = dir.path().join("short.json");
    fs::write(&path, serde_json::to_string(&t).unwrap()).unwrap();
    let mut config = golden_config();
    config.transcript = Some(path);
    let err = cmd_run(&requirements(), &ws, config, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, PipelineError::Iteration { .. }), "{err}");
    assert_eq!(err.stage_name(), "iteration FS-1");
    assert_eq!(checkpoint(&ws).stage, Stage::MapDone);
}

#[test]
fn tiny_time_limit_records_timed_out() {
    let (_d, ws) = fresh_workspace();
    let mut config = golden_config();
    config.limits.time_limit_minutes = Some(0.01);
    let report = cmd_run(&requirements(), &ws, config, &RunOptions::default()).unwrap();
    assert_eq!(report.exit_code, 2);
    let summary = report.summary.unwrap();
    assert!(summary.sets.iter().all(|s| s.outcome == Outcome::TimedOut));
    assert_eq!(checkpoint(&ws).stage, Stage::Complete);
    let map: FeatureMap = ArtifactStore::open(&ws).unwrap().load("feature_map.json").unwrap();
    assert!(map.sets.iter().all(|s| s.implementation_context.status == evodev_core::planning::SetStatus::Failed));
}

#[test]
fn deadline_during_coding_commits_partial_work() {
    let (_d, ws) = fresh_workspace();
    let mut config = golden_config();
    // the logical clock starts the run at 2 s and FS-1's third coding turn
    // would begin at 21 s, so a 18 s limit expires inside its coding phase
    config.limits.time_limit_minutes = Some(18.0 / 60.0);
    let report = cmd_run(&requirements(), &ws, config, &RunOptions::default()).unwrap();
    assert_eq!(report.exit_code, 2);
    let summary = report.summary.unwrap();
    assert_eq!(summary.sets[0].outcome, Outcome::TimedOut);
    assert!(summary.sets[0].commit_id.is_some());
    let log = git_log(&ws);
    assert!(log[1].1.contains("partial"), "{log:?}");
    assert!(summary.sets[1..].iter().all(|s| s.commit_id.is_none()));
}

#[test]
fn failed_build_blocks_dependents_and_resets_workspace() {
    let (dir, ws) = fresh_workspace();
    let mut t: Transcript =
        serde_json::from_str(&fs::read_to_string(fixture_dir().join("transcript.json")).unwrap()).unwrap();
    // drop the fix turn of FS-2 so its build never recovers within 1 attempt
    let path = dir.path().join("t.json");
    t.steps.remove(11);
    fs::write(&path, serde_json::to_string(&t).unwrap()).unwrap();
    let mut config = golden_config();
    config.transcript = Some(path);
    config.limits.debug_max_attempts = 1;
    let report = cmd_run(&requirements(), &ws, config, &RunOptions::default()).unwrap();
    assert_eq!(report.exit_code, 2);
    let outcomes: Vec<Outcome> = report.summary.unwrap().sets.iter().map(|s| s.outcome).collect();
    assert_eq!(outcomes, [Outcome::Done, Outcome::Failed, Outcome::Failed]);
    assert_eq!(git_log(&ws).len(), 2);
    assert!(git(&ws, &["status", "--porcelain"]).is_empty());
    let record: IterationRecord = ArtifactStore::open(&ws).unwrap().load("iterations/FS-3.json").unwrap();
    assert!(record.notes.iter().any(|n| n.contains("blocked")), "{:?}", record.notes);
    assert!(record.plan.is_none());
}

#[test]
fn plan_then_resume_matches_single_run() {
    let (_a, reference) = fresh_workspace();
    run_golden(&reference, &RunOptions::default());
    let (_b, ws) = fresh_workspace();
    let planned = cmd_plan(&requirements(), &ws, golden_config(), &RunOptions::default()).unwrap();
    assert_eq!(planned.exit_code, 0);
    assert_eq!(checkpoint(&ws).stage, Stage::MapDone);
    assert_eq!(git_log(&ws).len(), 1);
    let resumed = cmd_resume(&ws, &RunOptions::default()).unwrap();
    assert_eq!(resumed.exit_code, 0);
    assert_eq!(metadata_tree(&ws), metadata_tree(&reference));
    assert_eq!(git_log(&ws), git_log(&reference));
}

#[test]
fn resume_after_crash_inside_iteration() {
    let (_a, reference) = fresh_workspace();
    run_golden(&reference, &RunOptions::default());

    // the provider goes away after FS-2 has created its controller, then comes back
    let (dir, ws) = fresh_workspace();
    let full = fs::read_to_string(fixture_dir().join("transcript.json")).unwrap();
    let mut t: Transcript = serde_json::from_str(&full).unwrap();
    t.steps.truncate(10);
    let path = dir.path().join("transcript.json");
    fs::write(&path, serde_json::to_string(&t).unwrap()).unwrap();
    let mut config = golden_config();
    config.transcript = Some(path.clone());
    assert!(cmd_run(&requirements(), &ws, config, &RunOptions::default()).is_err());
    assert!(!git(&ws, &["status", "--porcelain"]).is_empty());
    fs::write(&path, full).unwrap();

    let report = cmd_resume(&ws, &RunOptions::default()).unwrap();
    assert_eq!(report.exit_code, 0);
    let mut a = metadata_tree(&ws);
    let mut b = metadata_tree(&reference);
    // the stored config names a different transcript path
    assert_ne!(a.remove("config.json"), None);
    b.remove("config.json");
    a.remove("checkpoint.json");
    b.remove("checkpoint.json");
    assert_eq!(a, b);
    assert_eq!(git_log(&ws), git_log(&reference));
}

#[test]
fn resume_when_complete_is_a_noop() {
    let (_d, ws) = fresh_workspace();
    run_golden(&ws, &RunOptions::default());
    let before = metadata_tree(&ws);
    let report = cmd_resume(&ws, &RunOptions::default()).unwrap();
    assert_eq!(report.exit_code, 0);
    assert_eq!(metadata_tree(&ws), before);
}

#[test]
fn resume_without_run_fails() {
    let (_d, ws) = fresh_workspace();
    assert!(matches!(cmd_resume(&ws, &RunOptions::default()), Err(PipelineError::NothingToResume(_))));
}

#[test]
fn second_run_on_same_workspace_is_refused() {
    let (_d, ws) = fresh_workspace();
    run_golden(&ws, &RunOptions::default());
    let err = cmd_run(&requirements(), &ws, golden_config(), &RunOptions::default()).unwrap_err();
    assert!(matches!(err, PipelineError::AlreadyStarted(_)));
}

#[test]
fn tampered_artifact_is_reported() {
    let (_d, ws) = fresh_workspace();
    run_golden(&ws, &RunOptions::default());
    fs::write(ws.join(".evodev/features.json"), "{\"features\": []}\n").unwrap();
    match cmd_inspect(&ws, false) {
        Err(PipelineError::Store(StoreError::Corrupt { file, .. })) => assert_eq!(file, "features.json"),
        other => panic!("expected corruption error, got {other:?}"),
    }
}

#[test]
fn inspect_prints_dot_with_three_nodes_and_two_edges() {
    let (_d, ws) = fresh_workspace();
    run_golden(&ws, &RunOptions::default());
    let dot = cmd_inspect(&ws, true).unwrap();
    let nodes = dot.lines().filter(|l| l.contains("[label=")).count();
    let edges = dot.lines().filter(|l| l.contains("->")).count();
    assert_eq!((nodes, edges), (3, 2), "{dot}");
    let full = cmd_inspect(&ws, false).unwrap();
    assert!(full.starts_with("checkpoint: complete"));
    assert!(full.contains("FS-2   done"));
}

#[test]
fn metrics_from_scores_and_ledger() {
    let (dir, ws) = fresh_workspace();
    run_golden(&ws, &RunOptions::default());
    let scores = dir.path().join("scores.json");
    fs::write(&scores, r#"{"app": "Countdown Timer", "scores": [4, 4, 3, 4, 4, 3, 4, 4, 2]}"#).unwrap();
    let m = cmd_metrics(&ws, &scores).unwrap();
    assert!((m.function_completeness - 32.0 / 9.0).abs() < 1e-12);
    assert!(m.cost_usd > 0.0);
    assert!(m.build_success);
    let expected = (m.function_completeness - 1.0) / m.cost_usd;
    assert!((m.productivity_usd.unwrap() - expected).abs() < 1e-12);

    fs::write(&scores, r#"{"app": "x", "scores": [0, 4]}"#).unwrap();
    assert!(cmd_metrics(&ws, &scores).is_err());
}
