//! Feature-driven iterative development engine.
//!
//! A run turns a free-text requirements description plus a scaffold project
//! into working software in four planning stages (requirements, overall
//! design, features, feature map) followed by one development iteration per
//! feature set. Every stage artifact is checkpointed under `.evodev/` so a
//! run can be resumed deterministically.

pub mod build;
pub mod clock;
pub mod config;
pub mod design;
pub mod ids;
pub mod iteration;
pub mod llm;
pub mod metrics;
pub mod pipeline;
pub mod planning;
pub mod prompts;
mod repair;
pub mod requirements;
pub mod store;
pub mod tools;
pub mod vcs;

mod violation;

pub use clock::Clock;
pub use config::RunConfig;
pub use design::{DataEntity, DesignSlice, OverallDesign, UiComponent};
pub use ids::{DesignId, FeatureId, SetId};
pub use iteration::{DevelopmentPlan, IterationRecord, Outcome, Trajectory};
pub use llm::{ChatMessage, CompletionRequest, Gateway, Role, ToolSchema, UsageLedger};
pub use metrics::{classify_difficulty, compute_productivity, Difficulty, MetricsReport};
pub use pipeline::{RunReport, RunSummary};
pub use planning::{Feature, FeatureDependency, FeatureMap, FeatureSet};
pub use repair::{RetryPolicy, StageError};
pub use requirements::{BusinessWorkflow, RequirementDocument, UserRequirement};
pub use violation::Violation;
