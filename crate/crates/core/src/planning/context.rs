use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::map::{
    ancestors, topological_order, BusinessContext, FeatureMap, ImplementationContext, MapError,
    SetStatus,
};
use crate::design::{extract_design_slice, DesignSlice, OverallDesign};
use crate::ids::SetId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetLayer {
    pub set_id: SetId,
    pub business: BusinessContext,
    pub design: DesignSlice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AncestorLayer {
    pub set_id: SetId,
    pub business: BusinessContext,
    pub design: DesignSlice,
    pub implementation: ImplementationContext,
}

/// Everything the chief programmer and programmer see for one iteration:
/// the set itself plus every transitive prerequisite set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationContext {
    pub current: SetLayer,
    /// In topological order.
    pub ancestors: Vec<AncestorLayer>,
}

/// Design slices are re-extracted from `design` so increments merged by
/// earlier iterations are visible.
pub fn assemble_iteration_context(
    map: &FeatureMap,
    set_id: &SetId,
    design: &OverallDesign,
) -> Result<IterationContext, MapError> {
    let set = map
        .set(set_id)
        .ok_or_else(|| MapError::UnknownSet(set_id.clone()))?;
    let ancestor_ids = ancestors(map, set_id);
    if ancestor_ids.contains(set_id) {
        return Err(MapError::Cycle);
    }
    let order = topological_order(map)?;
    let mut layers = Vec::new();
    for id in order.iter().filter(|id| ancestor_ids.contains(*id)) {
        let a = map.set(id).expect("ordered ids come from the map");
        let status = a.implementation_context.status;
        if status != SetStatus::Done {
            return Err(MapError::AncestorNotDone {
                set: set_id.clone(),
                ancestor: id.clone(),
                status,
            });
        }
        layers.push(AncestorLayer {
            set_id: id.clone(),
            business: a.business_context.clone(),
            design: extract_design_slice(design, &a.design_slice.ids())?,
            implementation: a.implementation_context.clone(),
        });
    }
    Ok(IterationContext {
        current: SetLayer {
            set_id: set_id.clone(),
            business: set.business_context.clone(),
            design: extract_design_slice(design, &set.design_slice.ids())?,
        },
        ancestors: layers,
    })
}

impl IterationContext {
    /// Business and design layers as prompt text.
    pub fn render_design_context(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "## Current feature set {}", self.current.set_id);
        render_layer(&mut out, &self.current.business, &self.current.design);
        for a in &self.ancestors {
            let _ = writeln!(out, "\n## Preceding feature set {}", a.set_id);
            render_layer(&mut out, &a.business, &a.design);
        }
        out
    }

    /// Implementation layers of the preceding sets as prompt text.
    pub fn render_implementation_context(&self) -> String {
        let mut out = String::new();
        for a in &self.ancestors {
            let _ = writeln!(
                out,
                "## {} ({})\nModified files: {}\n```diff\n{}```",
                a.set_id,
                super::map::status_name(a.implementation.status),
                if a.implementation.modified_files.is_empty() {
                    "none".to_string()
                } else {
                    a.implementation.modified_files.join(", ")
                },
                a.implementation.diffs
            );
        }
        if out.is_empty() {
            out.push_str("No earlier iterations.\n");
        }
        out
    }
}

fn render_layer(out: &mut String, business: &BusinessContext, design: &DesignSlice) {
    let _ = writeln!(out, "Features:\n{}", business.feature_summaries.trim_end());
    for i in &business.interfaces {
        let _ = writeln!(out, "Interface towards {}: {}", i.to_set, i.text);
    }
    let design_json = serde_json::to_string_pretty(design).expect("slice serializes");
    let _ = writeln!(out, "Design:\n```json\n{design_json}\n```");
}
