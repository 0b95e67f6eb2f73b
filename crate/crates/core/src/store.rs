//! Checkpointed artifact persistence under `<workspace>/.evodev/`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ids::SetId;
use crate::vcs::METADATA_DIR;

pub const REQUIREMENT_DOCUMENT: &str = "requirement_document.json";
pub const OVERALL_DESIGN: &str = "overall_design.json";
pub const FEATURES: &str = "features.json";
pub const FEATURE_MAP: &str = "feature_map.json";
pub const USAGE: &str = "usage.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const RUN_SUMMARY: &str = "run_summary.json";
const LOCK: &str = "lock";

pub fn iteration_record_file(set: &SetId) -> String {
    format!("iterations/{set}.json")
}

pub fn trajectory_file(set: &SetId) -> String {
    format!("iterations/{set}.trajectory.json")
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot serialize {file}: {detail}")]
    Serialize { file: String, detail: String },
    #[error("{file} does not round-trip through JSON")]
    RoundTrip { file: String },
    #[error("artifact {file} is corrupt: {detail}")]
    Corrupt { file: String, detail: String },
    #[error("checkpoint cannot move from {from} back to {to}")]
    NonMonotone { from: String, to: String },
    #[error("workspace is locked by running process {pid}")]
    Locked { pid: u32 },
}

fn io(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stage {
    RequirementsDone,
    DesignDone,
    FeaturesDone,
    MapDone,
    IterationDone { set_id: SetId },
    Complete,
}

impl Stage {
    fn rank(&self) -> u8 {
        match self {
            Stage::RequirementsDone => 0,
            Stage::DesignDone => 1,
            Stage::FeaturesDone => 2,
            Stage::MapDone => 3,
            Stage::IterationDone { .. } => 4,
            Stage::Complete => 5,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Stage::RequirementsDone => "requirements_done".into(),
            Stage::DesignDone => "design_done".into(),
            Stage::FeaturesDone => "features_done".into(),
            Stage::MapDone => "map_done".into(),
            Stage::IterationDone { set_id } => format!("iteration_done({set_id})"),
            Stage::Complete => "complete".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub stage: Stage,
    pub timestamp_ms: u64,
    /// Clock reading when the run began; bounds the remaining time budget on resume.
    pub started_ms: u64,
    /// Sets whose iteration has been finalized, in execution order.
    pub completed_sets: Vec<SetId>,
    pub digests: BTreeMap<String, String>,
}

/// Where a run continues from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResumePoint {
    Requirements,
    Design,
    Features,
    Map,
    Iteration(SetId),
    Finish,
    Complete,
}

/// Next stage after `checkpoint`; `order` is the feature map's topological order.
pub fn resume_point(checkpoint: Option<&Checkpoint>, order: &[SetId]) -> ResumePoint {
    let Some(ck) = checkpoint else {
        return ResumePoint::Requirements;
    };
    match ck.stage {
        Stage::RequirementsDone => ResumePoint::Design,
        Stage::DesignDone => ResumePoint::Features,
        Stage::FeaturesDone => ResumePoint::Map,
        Stage::MapDone | Stage::IterationDone { .. } => order
            .iter()
            .find(|s| !ck.completed_sets.contains(s))
            .map_or(ResumePoint::Finish, |s| ResumePoint::Iteration(s.clone())),
        Stage::Complete => ResumePoint::Complete,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Pretty JSON with a trailing newline. Struct fields serialize in declaration
/// order and all maps are ordered, so output is byte-stable.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

#[derive(Debug)]
pub struct ArtifactStore {
    dir: PathBuf,
    #[cfg(test)]
    crash_before_rename: bool,
}

impl ArtifactStore {
    pub fn open(workspace: &Path) -> Result<Self, StoreError> {
        let dir = workspace.join(METADATA_DIR);
        fs::create_dir_all(dir.join("iterations")).map_err(|e| io(&dir, e))?;
        Ok(Self {
            dir,
            #[cfg(test)]
            crash_before_rename: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn exists(&self, file: &str) -> bool {
        self.dir.join(file).is_file()
    }

    fn write_atomic(&self, file: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let target = self.dir.join(file);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
        }
        let name = target.file_name().unwrap_or_default().to_string_lossy();
        let tmp = target.with_file_name(format!(".{name}.tmp"));
        let mut f = fs::File::create(&tmp).map_err(|e| io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| io(&tmp, e))?;
        f.sync_all().map_err(|e| io(&tmp, e))?;
        drop(f);
        #[cfg(test)]
        if self.crash_before_rename {
            return Err(io(&tmp, std::io::Error::other("simulated crash")));
        }
        fs::rename(&tmp, &target).map_err(|e| io(&target, e))
    }

    /// Serializes `value` to `file`, refusing values that do not survive a
    /// JSON round trip.
    pub fn save<T>(&self, file: &str, value: &T) -> Result<String, StoreError>
    where
        T: Serialize + DeserializeOwned + PartialEq,
    {
        let text = to_json(value).map_err(|e| StoreError::Serialize {
            file: file.into(),
            detail: e.to_string(),
        })?;
        let back: T = serde_json::from_str(&text).map_err(|_| StoreError::RoundTrip {
            file: file.into(),
        })?;
        if &back != value {
            return Err(StoreError::RoundTrip { file: file.into() });
        }
        self.write_atomic(file, text.as_bytes())?;
        Ok(sha256_hex(text.as_bytes()))
    }

    pub fn load<T: DeserializeOwned>(&self, file: &str) -> Result<T, StoreError> {
        let path = self.dir.join(file);
        let text = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            file: file.into(),
            detail: e.to_string(),
        })
    }

    fn digest_of(&self, file: &str) -> Result<String, StoreError> {
        let path = self.dir.join(file);
        let bytes = fs::read(&path).map_err(|e| io(&path, e))?;
        Ok(sha256_hex(&bytes))
    }

    /// Records that `stage` finished, with digests of `files` as they are on
    /// disk now. Earlier digests are kept.
    pub fn save_stage(
        &self,
        previous: Option<&Checkpoint>,
        stage: Stage,
        files: &[String],
        timestamp_ms: u64,
        started_ms: u64,
    ) -> Result<Checkpoint, StoreError> {
        let mut digests = previous.map(|c| c.digests.clone()).unwrap_or_default();
        let mut completed_sets = previous.map(|c| c.completed_sets.clone()).unwrap_or_default();
        if let Some(prev) = previous {
            let repeated = matches!(&stage, Stage::IterationDone { set_id } if completed_sets.contains(set_id));
            if stage.rank() < prev.stage.rank() || repeated || (prev.stage == stage && stage != Stage::Complete) {
                return Err(StoreError::NonMonotone {
                    from: prev.stage.name(),
                    to: stage.name(),
                });
            }
        }
        if let Stage::IterationDone { set_id } = &stage {
            completed_sets.push(set_id.clone());
        }
        for f in files {
            digests.insert(f.clone(), self.digest_of(f)?);
        }
        let checkpoint = Checkpoint {
            stage,
            timestamp_ms,
            started_ms,
            completed_sets,
            digests,
        };
        let text = to_json(&checkpoint).map_err(|e| StoreError::Serialize {
            file: CHECKPOINT.into(),
            detail: e.to_string(),
        })?;
        self.write_atomic(CHECKPOINT, text.as_bytes())?;
        Ok(checkpoint)
    }

    /// Reads the checkpoint and verifies every recorded digest.
    pub fn load_checkpoint(&self) -> Result<Option<Checkpoint>, StoreError> {
        let path = self.dir.join(CHECKPOINT);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io(&path, e)),
        };
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            file: CHECKPOINT.into(),
            detail: e.to_string(),
        })?;
        for (file, want) in &ck.digests {
            let got = match fs::read(self.dir.join(file)) {
                Ok(bytes) => sha256_hex(&bytes),
                Err(e) => {
                    return Err(StoreError::Corrupt {
                        file: file.clone(),
                        detail: e.to_string(),
                    })
                }
            };
            if &got != want {
                return Err(StoreError::Corrupt {
                    file: file.clone(),
                    detail: format!("digest {got} does not match recorded {want}"),
                });
            }
        }
        Ok(Some(ck))
    }

    /// Takes the single-writer lock, reclaiming it from a dead owner.
    pub fn lock(&self) -> Result<WorkspaceLock, StoreError> {
        let path = self.dir.join(LOCK);
        for _ in 0..2 {
            match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    write!(f, "{}", std::process::id()).map_err(|e| io(&path, e))?;
                    return Ok(WorkspaceLock { path });
                }
                Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                    let owner = fs::read_to_string(&path)
                        .ok()
                        .and_then(|s| s.trim().parse::<u32>().ok());
                    match owner {
                        Some(pid) if pid_alive(pid) => return Err(StoreError::Locked { pid }),
                        _ => {
                            let _ = fs::remove_file(&path);
                        }
                    }
                }
                Err(e) => return Err(io(&path, e)),
            }
        }
        Err(io(&path, std::io::Error::other("could not acquire lock")))
    }
}

fn pid_alive(pid: u32) -> bool {
    if pid == 0 || pid > i32::MAX as u32 {
        return false;
    }
    // SAFETY: signal 0 only probes for existence.
    let rc = unsafe { libc::kill(pid as libc::pid_t, 0) };
    rc == 0 || std::io::Error::last_os_error().raw_os_error() == Some(libc::EPERM)
}

/// Removes the lock file when dropped.
#[derive(Debug)]
pub struct WorkspaceLock {
    path: PathBuf,
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::requirements::{BusinessWorkflow, RequirementDocument};

    fn doc() -> RequirementDocument {
        RequirementDocument {
            app_summary: "Timer".into(),
            workflows: vec![BusinessWorkflow {
                id: "WF-1".into(),
                name: "Start".into(),
                description: "Start a timer".into(),
            }],
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let digest = store.save(REQUIREMENT_DOCUMENT, &doc()).unwrap();
        let back: RequirementDocument = store.load(REQUIREMENT_DOCUMENT).unwrap();
        assert_eq!(back, doc());
        let ck = store
            .save_stage(None, Stage::RequirementsDone, &[REQUIREMENT_DOCUMENT.into()], 1, 0)
            .unwrap();
        assert_eq!(ck.digests[REQUIREMENT_DOCUMENT], digest);
        let bytes = fs::read(store.dir().join(REQUIREMENT_DOCUMENT)).unwrap();
        assert_eq!(sha256_hex(&bytes), digest);
        assert_eq!(store.load_checkpoint().unwrap(), Some(ck));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        assert!(store.save("x.json", &vec![f64::NAN]).is_err());
        assert!(!store.exists("x.json"));
    }

    #[test]
    fn crash_before_rename_keeps_old_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = ArtifactStore::open(dir.path()).unwrap();
        store.save(REQUIREMENT_DOCUMENT, &doc()).unwrap();
        let ck = store
            .save_stage(None, Stage::RequirementsDone, &[REQUIREMENT_DOCUMENT.into()], 1, 0)
            .unwrap();
        let before = fs::read(store.dir().join(REQUIREMENT_DOCUMENT)).unwrap();
        let ck_before = fs::read(store.dir().join(CHECKPOINT)).unwrap();

        store.crash_before_rename = true;
        let mut changed = doc();
        changed.app_summary = "Other".into();
        assert!(store.save(REQUIREMENT_DOCUMENT, &changed).is_err());
        assert!(store.save_stage(Some(&ck), Stage::DesignDone, &[], 2, 0).is_err());

        assert_eq!(fs::read(store.dir().join(REQUIREMENT_DOCUMENT)).unwrap(), before);
        assert_eq!(fs::read(store.dir().join(CHECKPOINT)).unwrap(), ck_before);
        store.crash_before_rename = false;
        assert_eq!(store.load_checkpoint().unwrap(), Some(ck));
    }

    #[test]
    fn tampering_is_reported_with_file_name() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        store.save(FEATURES, &doc()).unwrap();
        store
            .save_stage(None, Stage::FeaturesDone, &[FEATURES.into()], 1, 0)
            .unwrap();
        fs::write(store.dir().join(FEATURES), "{}").unwrap();
        match store.load_checkpoint() {
            Err(StoreError::Corrupt { file, .. }) => assert_eq!(file, FEATURES),
            other => panic!("expected corruption, got {other:?}"),
        }
    }

    #[test]
    fn stages_are_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let ck = store.save_stage(None, Stage::MapDone, &[], 1, 0).unwrap();
        assert!(store.save_stage(Some(&ck), Stage::DesignDone, &[], 2, 0).is_err());
        let fs1 = Stage::IterationDone { set_id: "FS-1".into() };
        let ck = store.save_stage(Some(&ck), fs1.clone(), &[], 2, 0).unwrap();
        assert!(store.save_stage(Some(&ck), fs1, &[], 3, 0).is_err());
        let ck = store
            .save_stage(Some(&ck), Stage::IterationDone { set_id: "FS-2".into() }, &[], 3, 0)
            .unwrap();
        assert_eq!(ck.completed_sets, vec![SetId::from("FS-1"), SetId::from("FS-2")]);
    }

    #[test]
    fn resume_points() {
        let order: Vec<SetId> = ["FS-1", "FS-2", "FS-3"].map(SetId::from).to_vec();
        assert_eq!(resume_point(None, &order), ResumePoint::Requirements);
        let mut ck = Checkpoint {
            stage: Stage::MapDone,
            timestamp_ms: 0,
            started_ms: 0,
            completed_sets: vec![],
            digests: BTreeMap::new(),
        };
        assert_eq!(resume_point(Some(&ck), &order), ResumePoint::Iteration("FS-1".into()));
        ck.stage = Stage::IterationDone { set_id: "FS-1".into() };
        ck.completed_sets = vec!["FS-1".into()];
        assert_eq!(resume_point(Some(&ck), &order), ResumePoint::Iteration("FS-2".into()));
        ck.completed_sets = order.clone();
        assert_eq!(resume_point(Some(&ck), &order), ResumePoint::Finish);
        ck.stage = Stage::Complete;
        assert_eq!(resume_point(Some(&ck), &order), ResumePoint::Complete);
        ck.stage = Stage::DesignDone;
        assert_eq!(resume_point(Some(&ck), &order), ResumePoint::Features);
    }

    #[test]
    fn lock_is_exclusive_and_stale_locks_are_reclaimed() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let held = store.lock().unwrap();
        assert!(matches!(store.lock(), Err(StoreError::Locked { .. })));
        drop(held);
        // a pid far above pid_max cannot be alive
        fs::write(store.dir().join(LOCK), "2147483000").unwrap();
        let _lock = store.lock().unwrap();
        let owner = fs::read_to_string(store.dir().join(LOCK)).unwrap();
        assert_eq!(owner, std::process::id().to_string());
    }
}
