//! Stage sequencing, checkpoint/resume, inspection and metrics.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::info;

use crate::build::{BuildError, BuildRunner};
use crate::clock::Clock;
use crate::config::{ConfigError, RunConfig};
use crate::design::{construct_overall_design, OverallDesign};
use crate::ids::SetId;
use crate::iteration::{
    run_iteration, Deadline, IterationEnv, IterationError, IterationLimits, IterationRecord,
    Outcome,
};
use crate::llm::{load_transcript, ChatProvider, Gateway, GatewayError, HttpProvider, UsageLedger};
use crate::metrics::{classify_difficulty, compute_metrics, Difficulty, MetricsError, MetricsReport, ScoresFile};
use crate::planning::{
    extract_features, plan_feature_map, status_name, topological_order, FeatureList, FeatureMap,
    MapError,
};
use crate::repair::StageError;
use crate::requirements::{analyze_requirements, RequirementDocument, RequirementError, UserRequirement};
use crate::store::{
    self, iteration_record_file, resume_point, trajectory_file, ArtifactStore, Checkpoint,
    ResumePoint, Stage, StoreError,
};
use crate::tools::Workspace;
use crate::vcs::{Vcs, VcsError};

/// Copy of the run configuration kept for `resume`.
pub const CONFIG_COPY: &str = "config.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read requirements {path}: {detail}")]
    Requirements { path: String, detail: String },
    #[error(transparent)]
    Requirement(#[from] RequirementError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Vcs(#[from] VcsError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("provider setup failed: {0}")]
    Provider(GatewayError),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: StageError,
    },
    #[error("iteration {set} failed: {source}")]
    Iteration {
        set: SetId,
        #[source]
        source: IterationError,
    },
    #[error("feature map unusable: {0}")]
    Map(#[from] MapError),
    #[error("workspace {0} already holds a run; use resume")]
    AlreadyStarted(PathBuf),
    #[error("nothing to resume in {0}")]
    NothingToResume(PathBuf),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl PipelineError {
    /// Name of the stage the error belongs to, for the CLI's error line.
    pub fn stage_name(&self) -> String {
        match self {
            PipelineError::Stage { stage, .. } => (*stage).to_string(),
            PipelineError::Iteration { set, .. } => format!("iteration {set}"),
            PipelineError::Config(_) => "config".into(),
            PipelineError::Requirements { .. } | PipelineError::Requirement(_) => "input".into(),
            PipelineError::Store(_) => "artifacts".into(),
            PipelineError::Vcs(_) => "version control".into(),
            PipelineError::Build(_) => "build".into(),
            PipelineError::Provider(_) => "provider".into(),
            PipelineError::Map(_) => "feature map".into(),
            PipelineError::AlreadyStarted(_) | PipelineError::NothingToResume(_) => "resume".into(),
            PipelineError::Metrics(_) => "metrics".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub set_id: SetId,
    pub outcome: Outcome,
    pub commit_id: Option<String>,
}

/// `run_summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub app_name: String,
    pub workflow_count: usize,
    pub difficulty: Difficulty,
    pub time_limit_minutes: f64,
    pub started_ms: u64,
    pub finished_ms: u64,
    pub sets: Vec<SetSummary>,
    pub all_done: bool,
    pub total_usd: Option<f64>,
    pub llm_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Stop right after this many checkpoints have been written by this
    /// invocation, as if the process had been killed.
    pub halt_after_checkpoints: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// 0 when every set is done, 2 when some are not.
    pub exit_code: i32,
    pub halted: bool,
    pub summary: Option<RunSummary>,
}

impl RunReport {
    fn halted() -> Self {
        Self {
            exit_code: 1,
            halted: true,
            summary: None,
        }
    }
}

fn build_gateway(config: &RunConfig, clock: Clock) -> Result<Gateway, PipelineError> {
    let provider: Box<dyn ChatProvider> = match &config.transcript {
        Some(path) => Box::new(load_transcript(path).map_err(PipelineError::Provider)?),
        None => Box::new(HttpProvider::new(config.http_settings()?)),
    };
    Ok(Gateway::new(
        provider,
        UsageLedger::with_prices(config.provider.prices.clone()),
        clock,
        config.provider.model_id.clone(),
        config.provider.temperature,
    ))
}

struct Run<'a> {
    root: PathBuf,
    store: ArtifactStore,
    config: RunConfig,
    gateway: Gateway,
    vcs: Vcs,
    checkpoint: Option<Checkpoint>,
    started_ms: u64,
    written: usize,
    options: &'a RunOptions,
}

enum Flow {
    Continue,
    Halt,
}

impl Run<'_> {
    fn clock(&self) -> &Clock {
        self.gateway.clock()
    }

    /// Persists the usage ledger and a checkpoint for `stage`.
    fn checkpoint(&mut self, stage: Stage, mut files: Vec<String>) -> Result<Flow, PipelineError> {
        self.store.save(store::USAGE, self.gateway.ledger())?;
        files.push(store::USAGE.into());
        let ts = self.clock().now_ms();
        let ck = self
            .store
            .save_stage(self.checkpoint.as_ref(), stage, &files, ts, self.started_ms)?;
        info!(stage = %ck.stage.name(), "checkpoint");
        self.checkpoint = Some(ck);
        self.written += 1;
        Ok(match self.options.halt_after_checkpoints {
            Some(n) if self.written >= n => Flow::Halt,
            _ => Flow::Continue,
        })
    }

    fn time_limit(&self, doc: &RequirementDocument) -> (Difficulty, Duration) {
        let difficulty = classify_difficulty(doc.workflows.len());
        (difficulty, self.config.time_limit(difficulty))
    }

    fn app_name(&self) -> String {
        self.config.app_name.clone().unwrap_or_else(|| {
            self.root
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "app".into())
        })
    }

    /// Runs every stage after the current checkpoint.
    fn drive(&mut self, requirements: Option<&str>, stop_after_map: bool) -> Result<RunReport, PipelineError> {
        let policy = self.config.retry_policy();
        loop {
            let order = match self.checkpoint.as_ref().map(|c| &c.stage) {
                Some(Stage::MapDone | Stage::IterationDone { .. }) => {
                    topological_order(&self.store.load::<FeatureMap>(store::FEATURE_MAP)?)?
                }
                _ => Vec::new(),
            };
            let next = resume_point(self.checkpoint.as_ref(), &order);
            let flow = match next {
                ResumePoint::Requirements => {
                    let text = requirements.ok_or_else(|| PipelineError::NothingToResume(self.root.clone()))?;
                    let req = UserRequirement::new(text, self.app_name(), &self.root)?;
                    let doc = analyze_requirements(&req, &mut self.gateway, policy)
                        .map_err(|source| PipelineError::Stage { stage: "requirements", source })?;
                    self.store.save(store::REQUIREMENT_DOCUMENT, &doc)?;
                    self.checkpoint(
                        Stage::RequirementsDone,
                        vec![CONFIG_COPY.into(), store::REQUIREMENT_DOCUMENT.into()],
                    )?
                }
                ResumePoint::Design => {
                    let doc: RequirementDocument = self.store.load(store::REQUIREMENT_DOCUMENT)?;
                    let design = construct_overall_design(&doc, &mut self.gateway, policy)
                        .map_err(|source| PipelineError::Stage { stage: "design", source })?;
                    self.store.save(store::OVERALL_DESIGN, &design)?;
                    self.checkpoint(Stage::DesignDone, vec![store::OVERALL_DESIGN.into()])?
                }
                ResumePoint::Features => {
                    let doc: RequirementDocument = self.store.load(store::REQUIREMENT_DOCUMENT)?;
                    let design: OverallDesign = self.store.load(store::OVERALL_DESIGN)?;
                    let features = extract_features(&doc, &design, &mut self.gateway, policy)
                        .map_err(|source| PipelineError::Stage { stage: "features", source })?;
                    self.store.save(store::FEATURES, &features)?;
                    self.checkpoint(Stage::FeaturesDone, vec![store::FEATURES.into()])?
                }
                ResumePoint::Map => {
                    let design: OverallDesign = self.store.load(store::OVERALL_DESIGN)?;
                    let features: FeatureList = self.store.load(store::FEATURES)?;
                    let map = plan_feature_map(
                        &features,
                        &design,
                        &mut self.gateway,
                        self.config.max_feature_sets,
                        policy,
                    )
                    .map_err(|source| PipelineError::Stage { stage: "feature map", source })?;
                    self.store.save(store::FEATURE_MAP, &map)?;
                    self.checkpoint(Stage::MapDone, vec![store::FEATURE_MAP.into()])?
                }
                ResumePoint::Iteration(set_id) => {
                    if stop_after_map {
                        return Ok(RunReport {
                            exit_code: 0,
                            halted: false,
                            summary: None,
                        });
                    }
                    self.iterate(&set_id)?
                }
                ResumePoint::Finish => return self.finish(),
                ResumePoint::Complete => {
                    let summary: Option<RunSummary> = if self.store.exists(store::RUN_SUMMARY) {
                        Some(self.store.load(store::RUN_SUMMARY)?)
                    } else {
                        None
                    };
                    return Ok(RunReport {
                        exit_code: 0,
                        halted: false,
                        summary,
                    });
                }
            };
            if let Flow::Halt = flow {
                return Ok(RunReport::halted());
            }
        }
    }

    fn deadline(&self) -> Result<Deadline, PipelineError> {
        let doc: RequirementDocument = self.store.load(store::REQUIREMENT_DOCUMENT)?;
        let (_, limit) = self.time_limit(&doc);
        Ok(Deadline(Some(self.started_ms + limit.as_millis() as u64)))
    }

    fn iterate(&mut self, set_id: &SetId) -> Result<Flow, PipelineError> {
        let mut map: FeatureMap = self.store.load(store::FEATURE_MAP)?;
        let mut design: OverallDesign = self.store.load(store::OVERALL_DESIGN)?;
        let deadline = self.deadline()?;
        let b = &self.config.build;
        let runner = BuildRunner::new(
            b.command.clone(),
            Duration::from_secs(b.timeout_seconds),
            &b.error_pattern,
        )?;
        let mut env = IterationEnv {
            workspace: Workspace::new(&self.root),
            gateway: &mut self.gateway,
            runner: &runner,
            vcs: &self.vcs,
            limits: IterationLimits {
                max_turns: self.config.limits.coding_max_turns,
                debug_max_attempts: self.config.limits.debug_max_attempts,
            },
            policy: self.config.retry_policy(),
            deadline,
        };
        let result = run_iteration(&mut env, &mut map, &mut design, set_id).map_err(|source| {
            PipelineError::Iteration {
                set: set_id.clone(),
                source,
            }
        })?;
        let record_file = iteration_record_file(set_id);
        self.store.save(&record_file, &result.record)?;
        let mut files = vec![record_file];
        if let Some(traj) = &result.trajectory {
            let f = trajectory_file(set_id);
            self.store.save(&f, traj)?;
            files.push(f);
        }
        self.store.save(store::FEATURE_MAP, &map)?;
        self.store.save(store::OVERALL_DESIGN, &design)?;
        files.push(store::FEATURE_MAP.into());
        files.push(store::OVERALL_DESIGN.into());
        self.checkpoint(
            Stage::IterationDone {
                set_id: set_id.clone(),
            },
            files,
        )
    }

    fn finish(&mut self) -> Result<RunReport, PipelineError> {
        let doc: RequirementDocument = self.store.load(store::REQUIREMENT_DOCUMENT)?;
        let map: FeatureMap = self.store.load(store::FEATURE_MAP)?;
        let (difficulty, limit) = self.time_limit(&doc);
        let mut sets = Vec::new();
        for id in self.checkpoint.as_ref().map(|c| c.completed_sets.clone()).unwrap_or_default() {
            let record: IterationRecord = self.store.load(&iteration_record_file(&id))?;
            sets.push(SetSummary {
                set_id: id,
                outcome: record.outcome,
                commit_id: record.commit_id,
            });
        }
        let all_done = map.sets.len() == sets.len() && sets.iter().all(|s| s.outcome == Outcome::Done);
        let ledger = self.gateway.ledger();
        let summary = RunSummary {
            app_name: self.app_name(),
            workflow_count: doc.workflows.len(),
            difficulty,
            time_limit_minutes: limit.as_secs_f64() / 60.0,
            started_ms: self.started_ms,
            finished_ms: self.clock().now_ms(),
            sets,
            all_done,
            total_usd: ledger.report().ok().map(|r| r.total_usd),
            llm_seconds: ledger.entries.iter().map(|e| e.wall_clock_seconds).sum(),
        };
        self.store.save(store::RUN_SUMMARY, &summary)?;
        if let Flow::Halt = self.checkpoint(Stage::Complete, vec![store::RUN_SUMMARY.into()])? {
            return Ok(RunReport::halted());
        }
        Ok(RunReport {
            exit_code: if all_done { 0 } else { 2 },
            halted: false,
            summary: Some(summary),
        })
    }
}

fn read_requirements(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| PipelineError::Requirements {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

fn start(
    requirements: &Path,
    workspace: &Path,
    mut config: RunConfig,
    options: &RunOptions,
    stop_after_map: bool,
) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let text = read_requirements(requirements)?;
    if !workspace.is_dir() {
        return Err(RequirementError::NotADirectory(workspace.to_path_buf()).into());
    }
    if let Some(t) = &config.transcript {
        config.transcript = Some(fs::canonicalize(t).map_err(|e| {
            PipelineError::Provider(GatewayError::MalformedTranscript(format!("{}: {e}", t.display())))
        })?);
    }
    let root = workspace.to_path_buf();
    let store = ArtifactStore::open(&root)?;
    let _lock = store.lock()?;
    if store.load_checkpoint()?.is_some() {
        return Err(PipelineError::AlreadyStarted(root));
    }
    let clock = config.clock();
    let gateway = build_gateway(&config, clock.clone())?;
    let vcs = Vcs::new(clock.clone());
    vcs.init_repo(&root)?;
    store.save(CONFIG_COPY, &config)?;
    let started_ms = clock.now_ms();
    let mut run = Run {
        root,
        store,
        config,
        gateway,
        vcs,
        checkpoint: None,
        started_ms,
        written: 0,
        options,
    };
    run.drive(Some(&text), stop_after_map)
}

/// Full run on `workspace`, which starts as the scaffold project and is
/// developed in place.
pub fn cmd_run(
    requirements: &Path,
    workspace: &Path,
    config: RunConfig,
    options: &RunOptions,
) -> Result<RunReport, PipelineError> {
    start(requirements, workspace, config, options, false)
}

/// Runs the planning stages only, stopping once the feature map exists.
pub fn cmd_plan(
    requirements: &Path,
    workspace: &Path,
    config: RunConfig,
    options: &RunOptions,
) -> Result<RunReport, PipelineError> {
    start(requirements, workspace, config, options, true)
}

/// Continues a run from its last checkpoint. Uncommitted work from an
/// interrupted iteration is discarded first.
pub fn cmd_resume(workspace: &Path, options: &RunOptions) -> Result<RunReport, PipelineError> {
    let root = workspace.to_path_buf();
    if !root.join(crate::vcs::METADATA_DIR).is_dir() {
        return Err(PipelineError::NothingToResume(root));
    }
    let store = ArtifactStore::open(&root)?;
    let _lock = store.lock()?;
    let checkpoint = store
        .load_checkpoint()?
        .ok_or_else(|| PipelineError::NothingToResume(root.clone()))?;
    let config: RunConfig = store.load(CONFIG_COPY)?;
    config.validate()?;
    let clock = config.clock();
    clock.restore(checkpoint.timestamp_ms);
    // a real clock keeps running; shift the start so the remaining budget is preserved
    let started_ms = clock
        .peek_ms()
        .saturating_sub(checkpoint.timestamp_ms.saturating_sub(checkpoint.started_ms));
    let mut gateway = build_gateway(&config, clock.clone())?;
    let ledger: UsageLedger = store.load(store::USAGE)?;
    gateway.restore_ledger(ledger).map_err(PipelineError::Provider)?;
    let vcs = Vcs::new(clock);
    if checkpoint.stage != Stage::Complete {
        vcs.init_repo(&root)?;
        vcs.reset_to_head(&root)?;
    }
    let mut run = Run {
        root,
        store,
        config,
        gateway,
        vcs,
        checkpoint: Some(checkpoint),
        started_ms,
        written: 0,
        options,
    };
    run.drive(None, false)
}

/// Status table of the feature map, one row per set in topological order.
pub fn status_table(map: &FeatureMap, records: &[IterationRecord]) -> String {
    let order = topological_order(map).unwrap_or_else(|_| map.sets.iter().map(|s| s.id.clone()).collect());
    let mut out = format!("{:<6} {:<12} {:<9} {:>5} {:>6}  {}\n", "set", "status", "outcome", "turns", "builds", "features");
    for id in order {
        let Some(set) = map.set(&id) else { continue };
        let record = records.iter().find(|r| r.set_id == id);
        let members: Vec<&str> = set.member_ids.iter().map(|f| f.as_str()).collect();
        let _ = writeln!(
            out,
            "{:<6} {:<12} {:<9} {:>5} {:>6}  {}",
            id.as_str(),
            status_name(set.implementation_context.status),
            record.map_or("-".to_string(), |r| format!("{:?}", r.outcome).to_lowercase()),
            record.map_or("-".to_string(), |r| r.turns.to_string()),
            record.map_or("-".to_string(), |r| r.build_attempts.to_string()),
            members.join(", ")
        );
    }
    out
}

fn load_records(store: &ArtifactStore, map: &FeatureMap) -> Result<Vec<IterationRecord>, PipelineError> {
    let mut records = Vec::new();
    for s in &map.sets {
        let f = iteration_record_file(&s.id);
        if store.exists(&f) {
            records.push(store.load(&f)?);
        }
    }
    Ok(records)
}

/// DOT only with `dot`; otherwise the status table followed by the DOT graph.
pub fn cmd_inspect(workspace: &Path, dot: bool) -> Result<String, PipelineError> {
    let store = ArtifactStore::open(workspace)?;
    let checkpoint = store
        .load_checkpoint()?
        .ok_or_else(|| PipelineError::NothingToResume(workspace.to_path_buf()))?;
    if !store.exists(store::FEATURE_MAP) {
        return Ok(format!("checkpoint: {}\nno feature map yet\n", checkpoint.stage.name()));
    }
    let map: FeatureMap = store.load(store::FEATURE_MAP)?;
    if dot {
        return Ok(map.to_dot());
    }
    let records = load_records(&store, &map)?;
    Ok(format!(
        "checkpoint: {}\n\n{}\n{}",
        checkpoint.stage.name(),
        status_table(&map, &records),
        map.to_dot()
    ))
}

/// Aggregates human scores with the run's recorded cost and time.
pub fn cmd_metrics(workspace: &Path, scores: &Path) -> Result<MetricsReport, PipelineError> {
    let store = ArtifactStore::open(workspace)?;
    let scores = ScoresFile::load(scores)?;
    let ledger: UsageLedger = if store.exists(store::USAGE) {
        store.load(store::USAGE)?
    } else {
        UsageLedger::default()
    };
    let cost = ledger.report().map(|r| r.total_usd).unwrap_or(0.0);
    let summary: Option<RunSummary> = if store.exists(store::RUN_SUMMARY) {
        Some(store.load(store::RUN_SUMMARY)?)
    } else {
        None
    };
    let minutes = match &summary {
        Some(s) => s.finished_ms.saturating_sub(s.started_ms) as f64 / 60_000.0,
        None => ledger.entries.iter().map(|e| e.wall_clock_seconds).sum::<f64>() / 60.0,
    };
    let build_success = if store.exists(store::FEATURE_MAP) {
        let map: FeatureMap = store.load(store::FEATURE_MAP)?;
        let mut records = load_records(&store, &map)?;
        records.sort_by_key(|r| r.finished_ms);
        records
            .iter()
            .rev()
            .find(|r| r.build_attempts > 0)
            .is_some_and(|r| r.final_build_success)
    } else {
        false
    };
    Ok(compute_metrics(&scores, cost, minutes, build_success)?)
}
