//! Registry of disjoint detector heads and merge with a verifiable
//! non-regression contract.
//!
//! A head here is any output source that owns an exclusive set of categories.
//! Replacing one head must leave every other category's merged output
//! byte-identical; `non_regression_diff` checks exactly that.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{Detection, DetectionSet};

#[derive(Debug, Error)]
pub enum FederationError {
    #[error("head {head_id:?} owns no categories")]
    EmptyCategories { head_id: String },
    #[error("category overlap: {}", format_conflicts(.conflicts))]
    CategoryOverlap { conflicts: Vec<(String, String)> },
    #[error("version must increase when replacing head {head_id:?}: {existing} -> {attempted}")]
    VersionNotIncreased { head_id: String, existing: u64, attempted: u64 },
    #[error("unknown head {head_id:?}")]
    UnknownHead { head_id: String },
    #[error("head {head_id:?} does not own {category:?}")]
    NotOwned { head_id: String, category: String },
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
}

fn format_conflicts(conflicts: &[(String, String)]) -> String {
    conflicts
        .iter()
        .map(|(cat, owner)| format!("{cat} (owned by {owner})"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// One detector head: an identifier, a monotonically increasing version, and
/// the category set it owns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub head_id: String,
    pub version: u64,
    pub categories: BTreeSet<String>,
}

impl HeadSpec {
    pub fn new(head_id: impl Into<String>, version: u64, categories: impl IntoIterator<Item = String>) -> Self {
        Self { head_id: head_id.into(), version, categories: categories.into_iter().collect() }
    }
}

/// Immutable registry of heads with pairwise disjoint category ownership.
///
/// Registration returns a fresh registry, so readers always observe either
/// the old or the new state, never a mix.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HeadRegistry {
    heads: BTreeMap<String, HeadSpec>,
    category_index: HashMap<String, String>,
}

impl HeadRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn heads(&self) -> impl Iterator<Item = &HeadSpec> {
        self.heads.values()
    }

    pub fn head(&self, head_id: &str) -> Option<&HeadSpec> {
        self.heads.get(head_id)
    }

    /// Owning head of a category, if any head claims it.
    pub fn owner(&self, category: &str) -> Option<&str> {
        self.category_index.get(category).map(String::as_str)
    }

    /// Register a new head or replace an existing one.
    ///
    /// Replacement (same `head_id`) requires a strictly larger version; the
    /// ownership swap is atomic. Claiming a category owned by a different
    /// head is an error naming every conflict.
    pub fn register(&self, head: HeadSpec) -> Result<HeadRegistry, FederationError> {
        if head.categories.is_empty() {
            return Err(FederationError::EmptyCategories { head_id: head.head_id });
        }
        if let Some(existing) = self.heads.get(&head.head_id) {
            if head.version <= existing.version {
                return Err(FederationError::VersionNotIncreased {
                    head_id: head.head_id,
                    existing: existing.version,
                    attempted: head.version,
                });
            }
        }
        let conflicts: Vec<(String, String)> = head
            .categories
            .iter()
            .filter_map(|cat| {
                self.category_index
                    .get(cat)
                    .filter(|owner| **owner != head.head_id)
                    .map(|owner| (cat.clone(), owner.clone()))
            })
            .collect();
        if !conflicts.is_empty() {
            return Err(FederationError::CategoryOverlap { conflicts });
        }

        let mut next = self.clone();
        if let Some(old) = next.heads.remove(&head.head_id) {
            for cat in &old.categories {
                next.category_index.remove(cat);
            }
        }
        for cat in &head.categories {
            next.category_index.insert(cat.clone(), head.head_id.clone());
        }
        next.heads.insert(head.head_id.clone(), head);
        Ok(next)
    }

    /// Register a specialized head, carving its categories out of `donor`'s
    /// ownership in the same atomic step.
    ///
    /// The donor models a default head owning every otherwise unclaimed
    /// category; it is dropped from the registry if nothing remains.
    pub fn register_carving(&self, head: HeadSpec, donor: &str) -> Result<HeadRegistry, FederationError> {
        let donor_head = self
            .heads
            .get(donor)
            .ok_or_else(|| FederationError::UnknownHead { head_id: donor.to_string() })?
            .clone();
        let mut next = self.clone();
        let remaining: BTreeSet<String> =
            donor_head.categories.difference(&head.categories).cloned().collect();
        for cat in donor_head.categories.difference(&remaining) {
            next.category_index.remove(cat);
        }
        if remaining.is_empty() {
            next.heads.remove(donor);
        } else {
            next.heads.get_mut(donor).expect("donor present").categories = remaining;
        }
        next.register(head)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FederationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| FederationError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let heads: Vec<HeadSpec> = serde_json::from_str(&text).map_err(|source| FederationError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        let mut registry = HeadRegistry::new();
        for head in heads {
            registry = registry.register(head)?;
        }
        Ok(registry)
    }

    pub fn to_json(&self) -> String {
        let heads: Vec<&HeadSpec> = self.heads.values().collect();
        serde_json::to_string_pretty(&heads).expect("registry serialization")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FederationError> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|source| FederationError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }
}

/// Merge per-head outputs into one canonical detection set.
///
/// Every detection is tagged with its head id. A head emitting a category it
/// does not own is rejected; heads without outputs contribute nothing.
pub fn merge(
    registry: &HeadRegistry,
    outputs: &BTreeMap<String, DetectionSet>,
) -> Result<DetectionSet, FederationError> {
    let mut merged: Vec<Detection> = Vec::new();
    for (head_id, set) in outputs {
        let head = registry
            .head(head_id)
            .ok_or_else(|| FederationError::UnknownHead { head_id: head_id.clone() })?;
        for det in &set.detections {
            if !head.categories.contains(&det.category) {
                return Err(FederationError::NotOwned {
                    head_id: head_id.clone(),
                    category: det.category.clone(),
                });
            }
            let mut tagged = det.clone();
            tagged.head_id = Some(head_id.clone());
            merged.push(tagged);
        }
    }
    let mut out = DetectionSet::new(merged);
    out.sort_canonical();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffStatus {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

/// One detection-level difference between two merged outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub image_id: String,
    pub category: String,
    /// What changed: "score", "added", or "removed".
    pub field: String,
}

/// Outcome of a non-regression comparison after a head swap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub status: DiffStatus,
    /// Categories with differences that belong to the changed head.
    pub changed_categories: Vec<String>,
    /// Differences outside the changed head's ownership; any entry fails the
    /// contract.
    pub foreign_differences: Vec<DiffEntry>,
}

impl DiffReport {
    pub fn passed(&self) -> bool {
        self.status == DiffStatus::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diff serialization")
    }
}

fn detection_key(d: &Detection) -> (String, String, [u8; 32]) {
    let mut coords = [0u8; 32];
    for (i, v) in [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h].iter().enumerate() {
        coords[i * 8..(i + 1) * 8].copy_from_slice(&v.to_bits().to_be_bytes());
    }
    (d.image_id.clone(), d.category.clone(), coords)
}

/// Compare two merged outputs after a single head changed.
///
/// Differences are partitioned by category: everything inside
/// `changed_head.categories` is expected churn, anything else fails.
pub fn non_regression_diff(before: &DetectionSet, after: &DetectionSet, changed_head: &HeadSpec) -> DiffReport {
    non_regression_diff_within(before, after, &changed_head.categories)
}

/// Non-regression comparison against an explicit set of allowed categories.
pub fn non_regression_diff_within(
    before: &DetectionSet,
    after: &DetectionSet,
    allowed: &BTreeSet<String>,
) -> DiffReport {
    type Key = (String, String, [u8; 32]);
    let collect = |set: &DetectionSet| -> BTreeMap<Key, Vec<f64>> {
        let mut m: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
        for d in &set.detections {
            m.entry(detection_key(d)).or_default().push(d.score);
        }
        for scores in m.values_mut() {
            scores.sort_by(f64::total_cmp);
        }
        m
    };
    let before_map = collect(before);
    let after_map = collect(after);

    let mut diffs: Vec<DiffEntry> = Vec::new();
    for (key, scores) in &before_map {
        match after_map.get(key) {
            None => diffs.push(DiffEntry {
                image_id: key.0.clone(),
                category: key.1.clone(),
                field: "removed".into(),
            }),
            Some(other) if other != scores => diffs.push(DiffEntry {
                image_id: key.0.clone(),
                category: key.1.clone(),
                field: "score".into(),
            }),
            Some(_) => {}
        }
    }
    for key in after_map.keys() {
        if !before_map.contains_key(key) {
            diffs.push(DiffEntry {
                image_id: key.0.clone(),
                category: key.1.clone(),
                field: "added".into(),
            });
        }
    }

    let mut changed_categories: BTreeSet<String> = BTreeSet::new();
    let mut foreign_differences = Vec::new();
    for diff in diffs {
        if allowed.contains(&diff.category) {
            changed_categories.insert(diff.category);
        } else {
            foreign_differences.push(diff);
        }
    }
    DiffReport {
        status: if foreign_differences.is_empty() { DiffStatus::Pass } else { DiffStatus::Fail },
        changed_categories: changed_categories.into_iter().collect(),
        foreign_differences,
    }
}
