//! Unified hierarchical category vocabulary with per-source-dataset mappings.
//!
//! The category hierarchy is a single-parent forest. A taxonomy is immutable
//! after load; edits happen by building a new instance.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid taxonomy: {0}")]
    Invalid(ValidationReport),
    #[error("unknown category id: {0}")]
    UnknownCategory(String),
    #[error("unmapped category: dataset {dataset:?} has no mapping for {source_id:?}")]
    Unmapped { dataset: String, source_id: String },
}

/// One category in the unified vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryNode {
    pub id: String,
    #[serde(rename = "name")]
    pub display_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
}

/// Maps a category of one source dataset onto the unified vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceMapping {
    pub dataset: String,
    pub source_id: String,
    pub target_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    DuplicateId,
    DanglingParent,
    Cycle,
    MappingToUnknownNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ViolationKind::DuplicateId => "duplicate id",
            ViolationKind::DanglingParent => "dangling parent",
            ViolationKind::Cycle => "cycle detected",
            ViolationKind::MappingToUnknownNode => "mapping to unknown node",
        };
        write!(f, "{kind}: {}", self.detail)
    }
}

/// All structural violations found in a candidate taxonomy. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        let lines: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", lines.join("; "))
    }
}

/// On-disk shape of a taxonomy document.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TaxonomyFile {
    nodes: Vec<CategoryNode>,
    #[serde(default)]
    mappings: Vec<SourceMapping>,
}

/// The unified category forest plus source-dataset mappings.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    nodes: Vec<CategoryNode>,
    index: HashMap<String, usize>,
    source_mappings: HashMap<(String, String), String>,
}

impl PartialEq for Taxonomy {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.source_mappings == other.source_mappings
    }
}

impl Taxonomy {
    /// Build a taxonomy from raw parts, rejecting any structural violation.
    pub fn from_parts(
        nodes: Vec<CategoryNode>,
        mappings: Vec<SourceMapping>,
    ) -> Result<Self, TaxonomyError> {
        let report = validate_parts(&nodes, &mappings);
        if !report.is_empty() {
            return Err(TaxonomyError::Invalid(report));
        }
        let index: HashMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let source_mappings = mappings
            .into_iter()
            .map(|m| ((m.dataset, m.source_id), m.target_id))
            .collect();
        Ok(Self { nodes, index, source_mappings })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            TaxonomyError::Parse { source, .. } => TaxonomyError::Parse {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        let file: TaxonomyFile = serde_json::from_str(text).map_err(|source| TaxonomyError::Parse {
            path: "<inline>".to_string(),
            source,
        })?;
        Self::from_parts(file.nodes, file.mappings)
    }

    /// Serialize to the taxonomy document format. `load(save(t))` reproduces `t`.
    pub fn to_json(&self) -> String {
        let mut mappings: Vec<SourceMapping> = self
            .source_mappings
            .iter()
            .map(|((dataset, source_id), target_id)| SourceMapping {
                dataset: dataset.clone(),
                source_id: source_id.clone(),
                target_id: target_id.clone(),
            })
            .collect();
        mappings.sort_by(|a, b| (&a.dataset, &a.source_id).cmp(&(&b.dataset, &b.source_id)));
        let file = TaxonomyFile { nodes: self.nodes.clone(), mappings };
        serde_json::to_string_pretty(&file).expect("taxonomy serialization cannot fail")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TaxonomyError> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|source| TaxonomyError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn node(&self, id: &str) -> Option<&CategoryNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn nodes(&self) -> &[CategoryNode] {
        &self.nodes
    }

    pub fn roots(&self) -> impl Iterator<Item = &CategoryNode> {
        self.nodes.iter().filter(|n| n.parent_id.is_none())
    }

    /// Strict ancestors of `id`, nearest first, excluding `id` itself.
    pub fn ancestors(&self, id: &str) -> Result<Vec<&str>, TaxonomyError> {
        let mut node = self
            .node(id)
            .ok_or_else(|| TaxonomyError::UnknownCategory(id.to_string()))?;
        let mut out = Vec::new();
        while let Some(parent) = &node.parent_id {
            // acyclicity is established at construction time
            node = self.node(parent).expect("validated parent link");
            out.push(node.id.as_str());
        }
        Ok(out)
    }

    /// True when `ancestor` is a strict ancestor of `id`.
    pub fn is_ancestor(&self, ancestor: &str, id: &str) -> Result<bool, TaxonomyError> {
        Ok(self.ancestors(id)?.contains(&ancestor))
    }

    /// Resolve a source dataset category onto the unified vocabulary.
    ///
    /// An explicit mapping entry wins; otherwise source ids that already name
    /// a unified category map to themselves. Returns `None` when unmapped.
    pub fn map_source(&self, dataset: &str, source_cat: &str) -> Option<&str> {
        if let Some(target) = self
            .source_mappings
            .get(&(dataset.to_string(), source_cat.to_string()))
        {
            return Some(target.as_str());
        }
        self.index
            .get(source_cat)
            .map(|&i| self.nodes[i].id.as_str())
    }

    /// Like [`map_source`](Self::map_source) but unmapped categories are an error.
    pub fn map_source_strict(&self, dataset: &str, source_cat: &str) -> Result<&str, TaxonomyError> {
        self.map_source(dataset, source_cat)
            .ok_or_else(|| TaxonomyError::Unmapped {
                dataset: dataset.to_string(),
                source_id: source_cat.to_string(),
            })
    }

    pub fn mappings(&self) -> &HashMap<(String, String), String> {
        &self.source_mappings
    }

    /// Re-check all invariants; empty iff the taxonomy is structurally sound.
    pub fn validate(&self) -> ValidationReport {
        let mappings: Vec<SourceMapping> = self
            .source_mappings
            .iter()
            .map(|((dataset, source_id), target_id)| SourceMapping {
                dataset: dataset.clone(),
                source_id: source_id.clone(),
                target_id: target_id.clone(),
            })
            .collect();
        validate_parts(&self.nodes, &mappings)
    }
}

/// Collect every violation in a candidate node/mapping list.
pub fn validate_parts(nodes: &[CategoryNode], mappings: &[SourceMapping]) -> ValidationReport {
    let mut violations = Vec::new();

    let mut seen: HashMap<&str, usize> = HashMap::new();
    for n in nodes {
        *seen.entry(n.id.as_str()).or_insert(0) += 1;
    }
    let mut dup_ids: Vec<&str> = seen
        .iter()
        .filter(|(_, &c)| c > 1)
        .map(|(&id, _)| id)
        .collect();
    dup_ids.sort_unstable();
    for id in dup_ids {
        violations.push(Violation {
            kind: ViolationKind::DuplicateId,
            detail: format!("node id {id:?} appears more than once"),
        });
    }

    for n in nodes {
        if let Some(p) = &n.parent_id {
            if !seen.contains_key(p.as_str()) {
                violations.push(Violation {
                    kind: ViolationKind::DanglingParent,
                    detail: format!("node {:?} references missing parent {:?}", n.id, p),
                });
            }
        }
    }

    // Cycle check over parent links. Walk up from each node; a walk longer
    // than the node count can only mean a cycle. Duplicate ids resolve to the
    // first definition for the purpose of this walk.
    let mut first_def: HashMap<&str, &CategoryNode> = HashMap::new();
    for n in nodes {
        first_def.entry(n.id.as_str()).or_insert(n);
    }
    let mut in_cycle: Vec<&str> = Vec::new();
    for n in nodes {
        let mut hops = 0usize;
        let mut cur = n;
        let mut cyclic = false;
        while let Some(p) = &cur.parent_id {
            if p == &n.id {
                cyclic = true;
                break;
            }
            match first_def.get(p.as_str()) {
                Some(next) => cur = next,
                None => break, // dangling, reported above
            }
            hops += 1;
            if hops > nodes.len() {
                cyclic = true;
                break;
            }
        }
        if cyclic {
            in_cycle.push(n.id.as_str());
        }
    }
    in_cycle.sort_unstable();
    in_cycle.dedup();
    for id in in_cycle {
        violations.push(Violation {
            kind: ViolationKind::Cycle,
            detail: format!("node {id:?} participates in a parent cycle"),
        });
    }

    for m in mappings {
        if !seen.contains_key(m.target_id.as_str()) {
            violations.push(Violation {
                kind: ViolationKind::MappingToUnknownNode,
                detail: format!(
                    "mapping ({:?}, {:?}) targets unknown node {:?}",
                    m.dataset, m.source_id, m.target_id
                ),
            });
        }
    }

    ValidationReport { violations }
}
