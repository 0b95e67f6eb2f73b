//! Architect stage and the overall-design registry.
//!
//! The registry is append-only: ids are issued once and never removed or
//! renamed. Later iterations attach free-text increments to existing
//! elements or append new ones under the next free number.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{DesignId, DesignNamespace, SetId};
use crate::llm::{ChatMessage, Gateway};
use crate::prompts;
use crate::repair::{request_valid, RetryPolicy, StageError};
use crate::requirements::RequirementDocument;
use crate::violation::{render_violations, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Page,
    Component,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Increment {
    pub set_id: SetId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiComponent {
    pub id: DesignId,
    pub name: String,
    pub kind: ComponentKind,
    #[serde(default)]
    pub parent_page: Option<DesignId>,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub increments: Vec<Increment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    /// Semantic type tag, e.g. `duration`, `text`, `timestamp`.
    #[serde(rename = "type")]
    pub type_tag: String,
    #[serde(default)]
    pub default: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataEntity {
    pub id: DesignId,
    pub name: String,
    #[serde(default)]
    pub attributes: Vec<Attribute>,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub increments: Vec<Increment>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverallDesign {
    pub components: Vec<UiComponent>,
    pub entities: Vec<DataEntity>,
}

/// Copies of registry entries handed to one feature set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSlice {
    pub components: Vec<UiComponent>,
    pub entities: Vec<DataEntity>,
}

impl DesignSlice {
    pub fn ids(&self) -> Vec<DesignId> {
        self.components
            .iter()
            .map(|c| c.id.clone())
            .chain(self.entities.iter().map(|e| e.id.clone()))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty() && self.entities.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DesignError {
    #[error("unknown design id {0}")]
    UnknownId(DesignId),
    #[error("design id {0} is already taken")]
    IdCollision(DesignId),
    #[error("design invalid after merge:\n{}", render_violations(.0))]
    Invalid(Vec<Violation>),
}

impl OverallDesign {
    pub fn component(&self, id: &DesignId) -> Option<&UiComponent> {
        self.components.iter().find(|c| &c.id == id)
    }

    pub fn entity(&self, id: &DesignId) -> Option<&DataEntity> {
        self.entities.iter().find(|e| &e.id == id)
    }

    pub fn contains(&self, id: &DesignId) -> bool {
        self.component(id).is_some() || self.entity(id).is_some()
    }

    pub fn all_ids(&self) -> Vec<DesignId> {
        self.components
            .iter()
            .map(|c| c.id.clone())
            .chain(self.entities.iter().map(|e| e.id.clone()))
            .collect()
    }

    fn next_free(&self, ns: DesignNamespace) -> DesignId {
        let max = self
            .all_ids()
            .iter()
            .filter(|id| id.namespace() == Some(ns))
            .filter_map(DesignId::number)
            .max()
            .unwrap_or(0);
        DesignId::canonical(ns, max as usize + 1)
    }

    /// Indented text rendering: pages with their components, then entities.
    pub fn render_tree(&self) -> String {
        let mut out = String::new();
        let mut placed = HashSet::new();
        for page in self.components.iter().filter(|c| c.kind == ComponentKind::Page) {
            render_component(&mut out, page, 0);
            placed.insert(&page.id);
            for child in self
                .components
                .iter()
                .filter(|c| c.parent_page.as_ref() == Some(&page.id))
            {
                render_component(&mut out, child, 1);
                placed.insert(&child.id);
            }
        }
        for orphan in self.components.iter().filter(|c| !placed.contains(&c.id)) {
            render_component(&mut out, orphan, 0);
        }
        for e in &self.entities {
            let _ = writeln!(out, "{} {} (entity)", e.id, e.name);
            for a in &e.attributes {
                let default = a.default.as_deref().map(|d| format!(" = {d}")).unwrap_or_default();
                let _ = writeln!(out, "    .{}: {}{}", a.name, a.type_tag, default);
            }
            for inc in &e.increments {
                let _ = writeln!(out, "    + [{}] {}", inc.set_id, inc.text);
            }
        }
        out
    }
}

fn render_component(out: &mut String, c: &UiComponent, depth: usize) {
    let pad = "    ".repeat(depth);
    let kind = match c.kind {
        ComponentKind::Page => "page",
        ComponentKind::Component => "component",
    };
    let _ = writeln!(out, "{pad}{} {} ({kind})", c.id, c.name);
    for inc in &c.increments {
        let _ = writeln!(out, "{pad}    + [{}] {}", inc.set_id, inc.text);
    }
}

pub fn validate_design(design: &OverallDesign) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for c in &design.components {
        if c.id.namespace() != Some(DesignNamespace::Ui) {
            out.push(Violation::new(c.id.as_str(), "id-format", "UI element ids are UI-<n>"));
        }
        if !seen.insert(&c.id) {
            out.push(Violation::new(c.id.as_str(), "duplicate-id", "id used more than once"));
        }
    }
    for e in &design.entities {
        if e.id.namespace() != Some(DesignNamespace::Data) {
            out.push(Violation::new(e.id.as_str(), "id-format", "data entity ids are DM-<n>"));
        }
        if !seen.insert(&e.id) {
            out.push(Violation::new(e.id.as_str(), "duplicate-id", "id used more than once"));
        }
        let mut names = HashSet::new();
        for a in &e.attributes {
            if !names.insert(a.name.as_str()) {
                out.push(Violation::new(
                    e.id.as_str(),
                    "duplicate-attribute",
                    format!("attribute {} declared twice", a.name),
                ));
            }
        }
    }
    let kinds: HashMap<&DesignId, ComponentKind> =
        design.components.iter().map(|c| (&c.id, c.kind)).collect();
    for c in &design.components {
        match (c.kind, &c.parent_page) {
            (ComponentKind::Page, Some(p)) => out.push(Violation::new(
                c.id.as_str(),
                "page-with-parent",
                format!("page declares parent {p}"),
            )),
            (ComponentKind::Component, None) => out.push(Violation::new(
                c.id.as_str(),
                "missing-parent",
                "component has no parent page",
            )),
            (ComponentKind::Component, Some(p)) => match kinds.get(p) {
                None => out.push(Violation::new(
                    c.id.as_str(),
                    "unresolved-parent",
                    format!("parent page {p} does not exist"),
                )),
                Some(ComponentKind::Component) => out.push(Violation::new(
                    c.id.as_str(),
                    "parent-kind",
                    format!("parent {p} is a component, not a page"),
                )),
                Some(ComponentKind::Page) => {}
            },
            (ComponentKind::Page, None) => {}
        }
    }
    if !design.components.iter().any(|c| c.kind == ComponentKind::Page) {
        out.push(Violation::new("components", "no-page", "design has no page"));
    }
    out
}

/// Renumbers UI-* and DM-* ids to their listed order and remaps parents.
/// Expects ids to be unique.
pub fn renumber_design(design: &mut OverallDesign) {
    let mut map = HashMap::new();
    for (i, c) in design.components.iter_mut().enumerate() {
        let new = DesignId::canonical(DesignNamespace::Ui, i + 1);
        map.insert(c.id.clone(), new.clone());
        c.id = new;
    }
    for (i, e) in design.entities.iter_mut().enumerate() {
        e.id = DesignId::canonical(DesignNamespace::Data, i + 1);
    }
    for c in &mut design.components {
        if let Some(p) = &c.parent_page {
            if let Some(new) = map.get(p) {
                c.parent_page = Some(new.clone());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewComponent {
    #[serde(default)]
    pub id: Option<DesignId>,
    pub name: String,
    pub kind: ComponentKind,
    #[serde(default)]
    pub parent_page: Option<DesignId>,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewEntity {
    #[serde(default)]
    pub id: Option<DesignId>,
    pub name: String,
    #[serde(default)]
    pub attributes: Vec<Attribute>,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncrementTarget {
    Target(DesignId),
    NewComponent(NewComponent),
    NewEntity(NewEntity),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignIncrement {
    #[serde(flatten)]
    pub target: IncrementTarget,
    pub text: String,
}

/// Applies increments from one iteration. Existing elements gain an entry
/// tagged with `set_id`; new elements get the next free number in their
/// namespace. Nothing is removed or renamed.
pub fn merge_incremental_design(
    design: &OverallDesign,
    increments: &[DesignIncrement],
    set_id: &SetId,
) -> Result<OverallDesign, DesignError> {
    let mut merged = design.clone();
    for inc in increments {
        let entry = Increment {
            set_id: set_id.clone(),
            text: inc.text.clone(),
        };
        match &inc.target {
            IncrementTarget::Target(id) => {
                if let Some(c) = merged.components.iter_mut().find(|c| &c.id == id) {
                    c.increments.push(entry);
                } else if let Some(e) = merged.entities.iter_mut().find(|e| &e.id == id) {
                    e.increments.push(entry);
                } else {
                    return Err(DesignError::UnknownId(id.clone()));
                }
            }
            IncrementTarget::NewComponent(nc) => {
                if let Some(id) = nc.id.as_ref().filter(|id| merged.contains(id)) {
                    return Err(DesignError::IdCollision(id.clone()));
                }
                let id = merged.next_free(DesignNamespace::Ui);
                merged.components.push(UiComponent {
                    id,
                    name: nc.name.clone(),
                    kind: nc.kind,
                    parent_page: nc.parent_page.clone(),
                    description: nc.description.clone(),
                    increments: vec![entry],
                });
            }
            IncrementTarget::NewEntity(ne) => {
                if let Some(id) = ne.id.as_ref().filter(|id| merged.contains(id)) {
                    return Err(DesignError::IdCollision(id.clone()));
                }
                let id = merged.next_free(DesignNamespace::Data);
                merged.entities.push(DataEntity {
                    id,
                    name: ne.name.clone(),
                    attributes: ne.attributes.clone(),
                    description: ne.description.clone(),
                    increments: vec![entry],
                });
            }
        }
    }
    let violations = validate_design(&merged);
    if !violations.is_empty() {
        return Err(DesignError::Invalid(violations));
    }
    Ok(merged)
}

/// Copies the named elements, plus the parent page of every named
/// component, in registry order.
pub fn extract_design_slice(
    design: &OverallDesign,
    ids: &[DesignId],
) -> Result<DesignSlice, DesignError> {
    let mut wanted: BTreeSet<&DesignId> = BTreeSet::new();
    for id in ids {
        if let Some(c) = design.component(id) {
            wanted.insert(&c.id);
            if let Some(parent) = &c.parent_page {
                wanted.insert(parent);
            }
        } else if let Some(e) = design.entity(id) {
            wanted.insert(&e.id);
        } else {
            return Err(DesignError::UnknownId(id.clone()));
        }
    }
    Ok(DesignSlice {
        components: design
            .components
            .iter()
            .filter(|c| wanted.contains(&c.id))
            .cloned()
            .collect(),
        entities: design
            .entities
            .iter()
            .filter(|e| wanted.contains(&e.id))
            .cloned()
            .collect(),
    })
}

pub fn construct_overall_design(
    doc: &RequirementDocument,
    gateway: &mut Gateway,
    policy: RetryPolicy,
) -> Result<OverallDesign, StageError> {
    let doc_json = serde_json::to_string_pretty(doc).expect("requirement document serializes");
    let request = gateway.request(
        vec![
            ChatMessage::system(prompts::ARCHITECT),
            ChatMessage::user(format!("Requirement document:\n```json\n{doc_json}\n```")),
        ],
        Vec::new(),
    );
    let mut design: OverallDesign =
        request_valid(gateway, "design", "architect", request, policy, validate_design)?;
    renumber_design(&mut design);
    Ok(design)
}
