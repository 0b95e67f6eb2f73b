use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::design::OverallDesign;
use crate::ids::{parse_numbered, DesignId, DesignNamespace, FeatureId};
use crate::llm::{ChatMessage, Gateway};
use crate::prompts;
use crate::repair::{request_valid, RetryPolicy, StageError};
use crate::requirements::RequirementDocument;
use crate::violation::Violation;

/// One client-valued function in the feature specification schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub id: FeatureId,
    pub name: String,
    pub business_workflow: String,
    #[serde(default)]
    pub business_rules: Vec<String>,
    #[serde(default)]
    pub ui_flow: String,
    #[serde(default)]
    pub data_flow: String,
    #[serde(default)]
    pub contained_ui_ids: Vec<DesignId>,
    #[serde(default)]
    pub contained_data_ids: Vec<DesignId>,
}

impl Feature {
    pub fn design_ids(&self) -> impl Iterator<Item = &DesignId> {
        self.contained_ui_ids.iter().chain(&self.contained_data_ids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DependencyKind {
    Business,
    Technical,
}

/// `prerequisite` has to exist before `dependent` can be built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDependency {
    pub prerequisite: FeatureId,
    pub dependent: FeatureId,
    pub kind: DependencyKind,
    #[serde(default)]
    pub rationale: String,
}

/// `features.json`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureList {
    pub features: Vec<Feature>,
    #[serde(default)]
    pub dependencies: Vec<FeatureDependency>,
}

pub fn validate_features(list: &FeatureList, design: &OverallDesign) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for f in &list.features {
        if parse_numbered("F", f.id.as_str()).is_none() {
            out.push(Violation::new(f.id.as_str(), "id-format", "feature ids are F-<n>"));
        }
        if !ids.insert(&f.id) {
            out.push(Violation::new(f.id.as_str(), "duplicate-id", "id used more than once"));
        }
        if f.name.trim().is_empty() {
            out.push(Violation::new(f.id.as_str(), "non-empty", "feature has no name"));
        }
        for (ids, ns) in [
            (&f.contained_ui_ids, DesignNamespace::Ui),
            (&f.contained_data_ids, DesignNamespace::Data),
        ] {
            for id in ids {
                let resolves = id.namespace() == Some(ns)
                    && match ns {
                        DesignNamespace::Ui => design.component(id).is_some(),
                        DesignNamespace::Data => design.entity(id).is_some(),
                    };
                if !resolves {
                    out.push(Violation::new(
                        f.id.as_str(),
                        "unresolved-design-id",
                        format!("{id} is not a {} element of the overall design", ns.prefix()),
                    ));
                }
            }
        }
    }
    if list.features.is_empty() {
        out.push(Violation::new("features", "non-empty", "no features extracted"));
    }
    for d in &list.dependencies {
        let field = format!("{}->{}", d.prerequisite, d.dependent);
        if d.prerequisite == d.dependent {
            out.push(Violation::new(
                field.clone(),
                "self-dependency",
                format!("{} cannot depend on itself", d.prerequisite),
            ));
        }
        for end in [&d.prerequisite, &d.dependent] {
            if !ids.contains(end) {
                out.push(Violation::new(
                    field.clone(),
                    "unknown-feature",
                    format!("{end} is not an extracted feature"),
                ));
            }
        }
    }
    out
}

/// Renumbers features to F-1..F-n in listed order and rewrites dependency
/// endpoints. Expects ids to be unique.
pub fn renumber_features(list: &mut FeatureList) {
    let mut map = HashMap::new();
    for (i, f) in list.features.iter_mut().enumerate() {
        let new = FeatureId::canonical(i + 1);
        map.insert(f.id.clone(), new.clone());
        f.id = new;
    }
    for d in &mut list.dependencies {
        if let Some(n) = map.get(&d.prerequisite) {
            d.prerequisite = n.clone();
        }
        if let Some(n) = map.get(&d.dependent) {
            d.dependent = n.clone();
        }
    }
}

pub fn extract_features(
    doc: &RequirementDocument,
    design: &OverallDesign,
    gateway: &mut Gateway,
    policy: RetryPolicy,
) -> Result<FeatureList, StageError> {
    let doc_json = serde_json::to_string_pretty(doc).expect("document serializes");
    let design_json = serde_json::to_string_pretty(design).expect("design serializes");
    let request = gateway.request(
        vec![
            ChatMessage::system(prompts::FEATURE_EXTRACTOR),
            ChatMessage::user(format!(
                "Requirement document:\n```json\n{doc_json}\n```\n\nOverall design:\n```json\n{design_json}\n```"
            )),
        ],
        Vec::new(),
    );
    let mut list: FeatureList = request_valid(
        gateway,
        "features",
        "feature_extractor",
        request,
        policy,
        |l: &FeatureList| validate_features(l, design),
    )?;
    renumber_features(&mut list);
    Ok(list)
}
