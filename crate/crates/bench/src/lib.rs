//! Input builders shared by the benchmarks.

use evodev_core::design::DesignSlice;
use evodev_core::ids::{FeatureId, SetId};
use evodev_core::planning::{
    BusinessContext, DependencyKind, Feature, FeatureDependency, FeatureMap, FeatureSet,
    ImplementationContext,
};

/// `sets` feature sets with `per_set` features each; set i depends on every earlier set.
pub fn layered_map(sets: usize, per_set: usize) -> (FeatureMap, Vec<Feature>, Vec<FeatureDependency>) {
    let features: Vec<Feature> = (1..=sets * per_set)
        .map(|i| Feature {
            id: FeatureId::from(format!("F-{i}").as_str()),
            name: format!("feature {i}"),
            business_workflow: String::new(),
            business_rules: vec![],
            ui_flow: String::new(),
            data_flow: String::new(),
            contained_ui_ids: vec![],
            contained_data_ids: vec![],
        })
        .collect();
    let map = FeatureMap {
        max_sets: sets,
        sets: (0..sets)
            .map(|s| FeatureSet {
                id: SetId::from(format!("FS-{}", s + 1).as_str()),
                member_ids: features[s * per_set..(s + 1) * per_set].iter().map(|f| f.id.clone()).collect(),
                business_context: BusinessContext::default(),
                design_slice: DesignSlice::default(),
                implementation_context: ImplementationContext::default(),
            })
            .collect(),
        edges: (0..sets)
            .flat_map(|b| (0..b).map(move |a| (a, b)))
            .map(|(a, b)| (SetId::from(format!("FS-{}", a + 1).as_str()), SetId::from(format!("FS-{}", b + 1).as_str())))
            .collect(),
    };
    let deps = (per_set..features.len())
        .map(|i| FeatureDependency {
            prerequisite: features[i - per_set].id.clone(),
            dependent: features[i].id.clone(),
            kind: DependencyKind::Business,
            rationale: String::new(),
        })
        .collect();
    (map, features, deps)
}

/// A Kotlin-ish source file of roughly `lines` lines with one unique marker line.
pub fn source_file(lines: usize) -> String {
    let mut out = String::new();
    for i in 0..lines {
        if i == lines / 2 {
            out.push_str("    val marker = computeMarker(state)\n");
        } else {
            out.push_str(&format!("    val v{i} = compute({i},  state)\n"));
        }
    }
    out
}
