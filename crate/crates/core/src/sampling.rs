//! Long-tail rebalancing: class-aware upsampling and dataset downsampling.
//!
//! Plans are pure data (image id -> repeat count) so they can be inspected,
//! stored, and replayed deterministically.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Annotation, CategorySets, Dataset, DatasetError, FederatedSets, ImageRecord};

/// Default minimum per-category instance floor for upsampling.
pub const DEFAULT_MIN_INSTANCES: u64 = 2000;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("minimum instance floor must be at least 1")]
    FloorTooSmall,
    #[error("cannot plan over an empty dataset")]
    EmptyDataset,
    #[error("target out of range: {target} not in 1..={max}")]
    TargetOutOfRange { target: u64, max: u64 },
    #[error("plan references unknown image {id:?}")]
    UnknownImage { id: String },
    #[error("replicated image id {id:?} collides with an existing image")]
    ReplicaCollision { id: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
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

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
struct RepeatRecord {
    image_id: String,
    count: u32,
}

/// A replication plan over a dataset's images.
///
/// A count of 0 drops the image, k replicates it k times. The plan is a pure
/// function of (dataset, parameters, seed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPlan {
    pub n_min: Option<u64>,
    pub target_images: Option<u64>,
    pub seed: Option<u64>,
    pub repeats: BTreeMap<String, u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_min: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_images: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    repeats: Vec<RepeatRecord>,
}

impl SamplingPlan {
    pub fn to_json(&self) -> String {
        let file = PlanFile {
            n_min: self.n_min,
            target_images: self.target_images,
            seed: self.seed,
            repeats: self
                .repeats
                .iter()
                .map(|(image_id, &count)| RepeatRecord { image_id: image_id.clone(), count })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("plan serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, SamplingError> {
        let file: PlanFile = serde_json::from_str(text).map_err(|source| SamplingError::Parse {
            path: "<inline>".to_string(),
            source,
        })?;
        Ok(Self {
            n_min: file.n_min,
            target_images: file.target_images,
            seed: file.seed,
            repeats: file.repeats.into_iter().map(|r| (r.image_id, r.count)).collect(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SamplingError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SamplingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SamplingError> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|source| SamplingError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }
}

/// Per-category repeat factor: `ceil(n_min / n_c)`.
fn repeat_factor(n_min: u64, count: u64) -> u32 {
    debug_assert!(count >= 1);
    n_min.div_ceil(count).max(1) as u32
}

/// Plan class-aware upsampling so every category present in `d` reaches at
/// least `n_min` instances.
///
/// Each image is replicated by the maximum repeat factor of any category it
/// contains; annotation-free images keep a count of 1. No randomness.
pub fn plan_upsample(d: &Dataset, n_min: u64) -> Result<SamplingPlan, SamplingError> {
    if n_min < 1 {
        return Err(SamplingError::FloorTooSmall);
    }
    if d.images().is_empty() {
        return Err(SamplingError::EmptyDataset);
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for a in d.annotations() {
        *counts.entry(a.category.as_str()).or_insert(0) += 1;
    }
    let factors: HashMap<&str, u32> = counts
        .iter()
        .map(|(&c, &n)| (c, repeat_factor(n_min, n)))
        .collect();

    let mut repeats: BTreeMap<String, u32> =
        d.images().iter().map(|img| (img.id.clone(), 1)).collect();
    for a in d.annotations() {
        let f = factors[a.category.as_str()];
        let entry = repeats.get_mut(&a.image_id).expect("validated annotation");
        *entry = (*entry).max(f);
    }
    Ok(SamplingPlan { n_min: Some(n_min), target_images: None, seed: None, repeats })
}

/// Plan a uniform downsample to exactly `target_images` kept images.
pub fn plan_downsample(d: &Dataset, target_images: u64, seed: u64) -> Result<SamplingPlan, SamplingError> {
    let total = d.images().len() as u64;
    if target_images < 1 || target_images > total {
        return Err(SamplingError::TargetOutOfRange { target: target_images, max: total });
    }
    // Partial Fisher-Yates over image positions keeps the draw reproducible.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = d.images().len();
    let k = target_images as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let kept: Vec<usize> = idx[..k].to_vec();

    let mut repeats: BTreeMap<String, u32> =
        d.images().iter().map(|img| (img.id.clone(), 0)).collect();
    for i in kept {
        *repeats.get_mut(&d.images()[i].id).expect("by construction") = 1;
    }
    Ok(SamplingPlan {
        n_min: None,
        target_images: Some(target_images),
        seed: Some(seed),
        repeats,
    })
}

/// Materialize a plan: replicate each image `count` times with `#k` suffixed
/// ids, carrying annotations and federated memberships along.
///
/// Images absent from the plan keep a single copy.
pub fn apply(plan: &SamplingPlan, d: &Dataset) -> Result<Dataset, SamplingError> {
    for id in plan.repeats.keys() {
        if !d.contains_image(id) {
            return Err(SamplingError::UnknownImage { id: id.clone() });
        }
    }

    // replica ids per original image, in dataset order
    let mut replicas: HashMap<&str, Vec<String>> = HashMap::new();
    let mut images: Vec<ImageRecord> = Vec::new();
    for img in d.images() {
        let count = plan.repeats.get(&img.id).copied().unwrap_or(1);
        let ids: Vec<String> = match count {
            0 => Vec::new(),
            1 => vec![img.id.clone()],
            k => (1..=k).map(|i| format!("{}#{i}", img.id)).collect(),
        };
        for id in &ids {
            if id != &img.id && d.contains_image(id) {
                return Err(SamplingError::ReplicaCollision { id: id.clone() });
            }
            images.push(ImageRecord {
                id: id.clone(),
                width: img.width,
                height: img.height,
                source: img.source.clone(),
            });
        }
        replicas.insert(img.id.as_str(), ids);
    }

    let mut annotations: Vec<Annotation> = Vec::new();
    for a in d.annotations() {
        for id in &replicas[a.image_id.as_str()] {
            annotations.push(Annotation {
                image_id: id.clone(),
                category: a.category.clone(),
                bbox: a.bbox,
            });
        }
    }

    let federated: Option<FederatedSets> = d.federated.as_ref().map(|fed| {
        fed.iter()
            .map(|(category, sets)| {
                let expand = |ids: &std::collections::BTreeSet<String>| {
                    ids.iter()
                        .flat_map(|id| replicas[id.as_str()].iter().cloned())
                        .collect()
                };
                (
                    category.clone(),
                    CategorySets { positive: expand(&sets.positive), negative: expand(&sets.negative) },
                )
            })
            .collect()
    });

    Ok(Dataset::new(d.name.clone(), d.taxonomy_version.clone(), images, annotations, federated)?)
}

/// One row of the before/after distribution report, ranked by original count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistributionRow {
    pub rank: usize,
    pub category: String,
    pub count_before: usize,
    pub count_after: usize,
}

/// Per-category counts before and after applying a plan, ranked by the
/// original counts (largest first).
pub fn distribution_report(before: &Dataset, after: &Dataset) -> Vec<DistributionRow> {
    let after_counts: HashMap<String, usize> = after.histogram().into_iter().collect();
    before
        .histogram()
        .into_iter()
        .enumerate()
        .map(|(i, (category, count_before))| DistributionRow {
            rank: i + 1,
            count_after: after_counts.get(&category).copied().unwrap_or(0),
            category,
            count_before,
        })
        .collect()
}
