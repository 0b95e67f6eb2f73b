use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::feature::{Feature, FeatureDependency, FeatureList};
use crate::design::{extract_design_slice, DesignError, DesignSlice, OverallDesign};
use crate::ids::{parse_numbered, DesignId, FeatureId, SetId};
use crate::llm::{ChatMessage, Gateway};
use crate::prompts;
use crate::repair::{request_valid, RetryPolicy, StageError};
use crate::violation::Violation;

pub const DEFAULT_MAX_SETS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetStatus {
    Pending,
    InProgress,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetInterface {
    pub to_set: SetId,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusinessContext {
    pub feature_summaries: String,
    pub interfaces: Vec<SetInterface>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImplementationContext {
    pub status: SetStatus,
    pub diffs: String,
    pub modified_files: Vec<String>,
}

impl Default for ImplementationContext {
    fn default() -> Self {
        Self {
            status: SetStatus::Pending,
            diffs: String::new(),
            modified_files: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub id: SetId,
    pub member_ids: Vec<FeatureId>,
    pub business_context: BusinessContext,
    pub design_slice: DesignSlice,
    pub implementation_context: ImplementationContext,
}

impl FeatureSet {
    /// Moves the status along pending -> in_progress -> {done, failed}.
    pub fn transition(&mut self, to: SetStatus) -> Result<(), MapError> {
        use SetStatus::*;
        let from = self.implementation_context.status;
        match (from, to) {
            (Pending, InProgress) | (InProgress, Done) | (InProgress, Failed) => {
                self.implementation_context.status = to;
                Ok(())
            }
            _ => Err(MapError::BadTransition {
                set: self.id.clone(),
                from,
                to,
            }),
        }
    }
}

/// Feature sets connected by prerequisite -> dependent edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub max_sets: usize,
    pub sets: Vec<FeatureSet>,
    pub edges: Vec<(SetId, SetId)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("feature map contains a cycle")]
    Cycle,
    #[error("unknown feature set {0}")]
    UnknownSet(SetId),
    #[error("prerequisite set {ancestor} of {set} is {status:?}, not done")]
    AncestorNotDone {
        set: SetId,
        ancestor: SetId,
        status: SetStatus,
    },
    #[error("set {set} cannot move from {from:?} to {to:?}")]
    BadTransition {
        set: SetId,
        from: SetStatus,
        to: SetStatus,
    },
    #[error(transparent)]
    Design(#[from] DesignError),
}

impl FeatureMap {
    pub fn set(&self, id: &SetId) -> Option<&FeatureSet> {
        self.sets.iter().find(|s| &s.id == id)
    }

    pub fn set_mut(&mut self, id: &SetId) -> Option<&mut FeatureSet> {
        self.sets.iter_mut().find(|s| &s.id == id)
    }

    /// Graphviz rendering, one node per set.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph feature_map {\n    rankdir=LR;\n");
        for s in &self.sets {
            let members: Vec<&str> = s.member_ids.iter().map(FeatureId::as_str).collect();
            let _ = writeln!(
                out,
                "    \"{}\" [label=\"{}\\n{}\\n({})\"];",
                s.id,
                s.id,
                members.join(", "),
                status_name(s.implementation_context.status)
            );
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "    \"{a}\" -> \"{b}\";");
        }
        out.push_str("}\n");
        out
    }
}

pub fn status_name(s: SetStatus) -> &'static str {
    match s {
        SetStatus::Pending => "pending",
        SetStatus::InProgress => "in_progress",
        SetStatus::Done => "done",
        SetStatus::Failed => "failed",
    }
}

/// Every set from which `target` is reachable, excluding `target` itself
/// unless it lies on a cycle.
pub fn ancestors(map: &FeatureMap, target: &SetId) -> BTreeSet<SetId> {
    let mut preds: HashMap<&SetId, Vec<&SetId>> = HashMap::new();
    for (a, b) in &map.edges {
        preds.entry(b).or_default().push(a);
    }
    let mut seen = BTreeSet::new();
    let mut stack = vec![target];
    while let Some(node) = stack.pop() {
        for p in preds.get(node).into_iter().flatten() {
            if seen.insert((*p).clone()) {
                stack.push(p);
            }
        }
    }
    seen
}

fn has_cycle(map: &FeatureMap) -> bool {
    let ids: HashSet<&SetId> = map.sets.iter().map(|s| &s.id).collect();
    let mut indegree: HashMap<&SetId, usize> = ids.iter().map(|id| (*id, 0)).collect();
    let mut succ: HashMap<&SetId, Vec<&SetId>> = HashMap::new();
    for (a, b) in &map.edges {
        if ids.contains(a) && ids.contains(b) {
            succ.entry(a).or_default().push(b);
            *indegree.get_mut(b).unwrap() += 1;
        }
    }
    let mut ready: Vec<&SetId> = indegree.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
    let mut visited = 0;
    while let Some(n) = ready.pop() {
        visited += 1;
        for s in succ.get(n).into_iter().flatten() {
            let d = indegree.get_mut(s).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.push(s);
            }
        }
    }
    visited < ids.len()
}

/// Checks partition, acyclicity, the set cap and dependency preservation.
/// Rule names: `duplicate-set`, `empty-set`, `unknown-edge-endpoint`,
/// `cycle`, `unknown-member`, `duplicate-member`, `unassigned-feature`,
/// `cap`, `dependency-order`.
pub fn validate_feature_map(
    map: &FeatureMap,
    features: &[Feature],
    deps: &[FeatureDependency],
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut set_ids = HashSet::new();
    for s in &map.sets {
        if !set_ids.insert(&s.id) {
            out.push(Violation::new(s.id.as_str(), "duplicate-set", "set id used twice"));
        }
        if s.member_ids.is_empty() {
            out.push(Violation::new(s.id.as_str(), "empty-set", "set has no features"));
        }
    }
    for (a, b) in &map.edges {
        for end in [a, b] {
            if !set_ids.contains(end) {
                out.push(Violation::new(
                    format!("{a}->{b}"),
                    "unknown-edge-endpoint",
                    format!("{end} is not a set of this map"),
                ));
            }
        }
    }
    if has_cycle(map) {
        out.push(Violation::new("edges", "cycle", "set graph is not acyclic"));
    }

    let known: HashSet<&FeatureId> = features.iter().map(|f| &f.id).collect();
    let mut home: BTreeMap<&FeatureId, Vec<&SetId>> = BTreeMap::new();
    for s in &map.sets {
        for m in &s.member_ids {
            if !known.contains(m) {
                out.push(Violation::new(
                    s.id.as_str(),
                    "unknown-member",
                    format!("{m} is not an extracted feature"),
                ));
            }
            home.entry(m).or_default().push(&s.id);
        }
    }
    for f in features {
        match home.get(&f.id).map(Vec::len).unwrap_or(0) {
            0 => out.push(Violation::new(
                f.id.as_str(),
                "unassigned-feature",
                "feature belongs to no set",
            )),
            1 => {}
            _ => out.push(Violation::new(
                f.id.as_str(),
                "duplicate-member",
                "feature belongs to more than one set",
            )),
        }
    }
    if map.sets.len() > map.max_sets {
        out.push(Violation::new(
            "sets",
            "cap",
            format!("{} sets exceed the cap of {}", map.sets.len(), map.max_sets),
        ));
    }

    let unique_home = |id: &FeatureId| match home.get(id).map(Vec::as_slice) {
        Some([s]) => Some(*s),
        _ => None,
    };
    for d in deps {
        let (Some(pre), Some(dep)) = (unique_home(&d.prerequisite), unique_home(&d.dependent))
        else {
            continue;
        };
        if pre != dep && !ancestors(map, dep).contains(pre) {
            out.push(Violation::new(
                format!("{}->{}", d.prerequisite, d.dependent),
                "dependency-order",
                format!(
                    "prerequisite {} sits in {pre}, which does not precede {dep} holding {}",
                    d.prerequisite, d.dependent
                ),
            ));
        }
    }
    out
}

/// Kahn's algorithm; among ready sets the lexicographically smallest id
/// goes first.
pub fn topological_order(map: &FeatureMap) -> Result<Vec<SetId>, MapError> {
    let mut indegree: BTreeMap<&SetId, usize> = map.sets.iter().map(|s| (&s.id, 0)).collect();
    let mut succ: HashMap<&SetId, Vec<&SetId>> = HashMap::new();
    for (a, b) in &map.edges {
        if indegree.contains_key(a) && indegree.contains_key(b) {
            succ.entry(a).or_default().push(b);
            *indegree.get_mut(b).unwrap() += 1;
        }
    }
    let mut ready: BTreeSet<&SetId> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(k, _)| *k)
        .collect();
    let mut order = Vec::with_capacity(indegree.len());
    while let Some(next) = ready.pop_first() {
        order.push(next.clone());
        for s in succ.get(next).into_iter().flatten() {
            let d = indegree.get_mut(s).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(s);
            }
        }
    }
    if order.len() < indegree.len() {
        return Err(MapError::Cycle);
    }
    Ok(order)
}

/// Derives every layer of a map from a grouping. Interfaces come from
/// feature dependencies that cross from a set into another one.
pub fn build_feature_map(
    groups: &[(SetId, Vec<FeatureId>)],
    edges: &[(SetId, SetId)],
    features: &FeatureList,
    design: &OverallDesign,
    max_sets: usize,
) -> Result<FeatureMap, DesignError> {
    let by_id: HashMap<&FeatureId, &Feature> = features.features.iter().map(|f| (&f.id, f)).collect();
    let mut home: HashMap<&FeatureId, &SetId> = HashMap::new();
    for (set, members) in groups {
        for m in members {
            home.entry(m).or_insert(set);
        }
    }
    let mut sets = Vec::with_capacity(groups.len());
    for (set_id, members) in groups {
        let mut summaries = String::new();
        let mut design_ids: Vec<DesignId> = Vec::new();
        for m in members {
            let Some(f) = by_id.get(m) else { continue };
            let _ = writeln!(summaries, "{} {}: {}", f.id, f.name, f.business_workflow);
            for id in f.design_ids() {
                if !design_ids.contains(id) {
                    design_ids.push(id.clone());
                }
            }
        }
        let interfaces = features
            .dependencies
            .iter()
            .filter_map(|d| {
                let from = home.get(&d.prerequisite)?;
                let to = home.get(&d.dependent)?;
                if *from != set_id || *to == set_id {
                    return None;
                }
                let dep_name = by_id.get(&d.dependent).map(|f| f.name.as_str()).unwrap_or("");
                let pre_name = by_id.get(&d.prerequisite).map(|f| f.name.as_str()).unwrap_or("");
                Some(SetInterface {
                    to_set: (*to).clone(),
                    text: format!(
                        "{} {dep_name} relies on {} {pre_name}: {}",
                        d.dependent, d.prerequisite, d.rationale
                    ),
                })
            })
            .collect();
        sets.push(FeatureSet {
            id: set_id.clone(),
            member_ids: members.clone(),
            business_context: BusinessContext {
                feature_summaries: summaries,
                interfaces,
            },
            design_slice: extract_design_slice(design, &design_ids)?,
            implementation_context: ImplementationContext::default(),
        });
    }
    Ok(FeatureMap {
        max_sets,
        sets,
        edges: edges.to_vec(),
    })
}

#[derive(Debug, Deserialize)]
struct PlannedSet {
    id: SetId,
    member_ids: Vec<FeatureId>,
}

#[derive(Debug, Deserialize)]
struct PlannerOutput {
    sets: Vec<PlannedSet>,
    #[serde(default)]
    edges: Vec<(SetId, SetId)>,
}

/// Renumbers planner output to FS-1..FS-n and builds the map, or returns
/// what is wrong with it.
fn realize(
    out: &PlannerOutput,
    features: &FeatureList,
    design: &OverallDesign,
    max_sets: usize,
) -> Result<FeatureMap, Vec<Violation>> {
    let mut rename = HashMap::new();
    let mut problems = Vec::new();
    for (i, s) in out.sets.iter().enumerate() {
        if parse_numbered("FS", s.id.as_str()).is_none() {
            problems.push(Violation::new(s.id.as_str(), "id-format", "set ids are FS-<n>"));
        }
        if rename.insert(s.id.clone(), SetId::canonical(i + 1)).is_some() {
            problems.push(Violation::new(s.id.as_str(), "duplicate-set", "set id used twice"));
        }
    }
    if !problems.is_empty() {
        return Err(problems);
    }
    let groups: Vec<(SetId, Vec<FeatureId>)> = out
        .sets
        .iter()
        .map(|s| (rename[&s.id].clone(), s.member_ids.clone()))
        .collect();
    let map_id = |id: &SetId| rename.get(id).cloned().unwrap_or_else(|| id.clone());
    let edges: Vec<(SetId, SetId)> = out.edges.iter().map(|(a, b)| (map_id(a), map_id(b))).collect();
    let map = build_feature_map(&groups, &edges, features, design, max_sets)
        .map_err(|e| vec![Violation::new("sets", "design-slice", e.to_string())])?;
    let violations = validate_feature_map(&map, &features.features, &features.dependencies);
    if violations.is_empty() {
        Ok(map)
    } else {
        Err(violations)
    }
}

pub fn plan_feature_map(
    features: &FeatureList,
    design: &OverallDesign,
    gateway: &mut Gateway,
    max_sets: usize,
    policy: RetryPolicy,
) -> Result<FeatureMap, StageError> {
    let features_json = serde_json::to_string_pretty(features).expect("features serialize");
    let request = gateway.request(
        vec![
            ChatMessage::system(prompts::FEATURE_PLANNER.replace("{cap}", &max_sets.to_string())),
            ChatMessage::user(format!("Features and dependencies:\n```json\n{features_json}\n```")),
        ],
        Vec::new(),
    );
    let planned: PlannerOutput = request_valid(
        gateway,
        "feature map",
        "feature_planner",
        request,
        policy,
        |out: &PlannerOutput| realize(out, features, design, max_sets).err().unwrap_or_default(),
    )?;
    Ok(realize(&planned, features, design, max_sets).expect("accepted plan realizes"))
}
