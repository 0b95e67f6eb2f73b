//! Feature extraction, feature-set grouping and the Feature Map DAG.

mod context;
mod feature;
mod map;

pub use context::{assemble_iteration_context, AncestorLayer, IterationContext, SetLayer};
pub use feature::{
    extract_features, renumber_features, validate_features, DependencyKind, Feature,
    FeatureDependency, FeatureList,
};
pub use map::{
    ancestors, build_feature_map, plan_feature_map, topological_order, validate_feature_map,
    BusinessContext, FeatureMap, FeatureSet, ImplementationContext, MapError, SetInterface,
    SetStatus, status_name, DEFAULT_MAX_SETS,
};
