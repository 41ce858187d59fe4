//! Ground-truth detection datasets under the unified taxonomy.
//!
//! A dataset ties image records to box annotations and, optionally, to
//! per-category federated positive/negative image sets. Instances are
//! immutable once loaded or merged.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;
use crate::taxonomy::Taxonomy;

#[derive(Debug, Error)]
pub enum DatasetError {
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
    #[error("degenerate box on image {image_id:?} (annotation #{index}): w={w}, h={h}")]
    DegenerateBox { image_id: String, index: usize, w: f64, h: f64 },
    #[error("annotation #{index} references unknown image {image_id:?}")]
    UnknownImage { image_id: String, index: usize },
    #[error("unmapped category: dataset {dataset:?} has no mapping for {category:?}")]
    UnmappedCategory { dataset: String, category: String },
    #[error("duplicate image id {id:?}")]
    DuplicateImageId { id: String },
    #[error("invalid image {id:?}: width and height must be positive")]
    BadImageDimensions { id: String },
    #[error("federated sets for {category:?} reference unknown image {image_id:?}")]
    FederatedUnknownImage { category: String, image_id: String },
    #[error("federated sets for {category:?} are not disjoint: {image_id:?} is both positive and negative")]
    FederatedOverlap { category: String, image_id: String },
    #[error("image id collision after namespacing: {id:?}")]
    IdCollision { id: String },
    #[error("conflicting image dimensions for {id:?}: {a:?} vs {b:?}")]
    ConflictingDimensions { id: String, a: (u32, u32), b: (u32, u32) },
    #[error("cannot merge zero datasets")]
    EmptyMerge,
}

/// One image entry. Pixels are never stored, only geometry and provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub id: String,
    pub width: u32,
    pub height: u32,
    /// Originating dataset name.
    pub source: String,
}

/// One ground-truth box, already expressed in unified category ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub image_id: String,
    pub category: String,
    pub bbox: BBox,
}

/// Per-category federated evaluation sets.
///
/// `positive` images are exhaustively annotated for the category, `negative`
/// images are verified to contain no instance. The two sets are disjoint.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorySets {
    pub positive: BTreeSet<String>,
    pub negative: BTreeSet<String>,
}

pub type FederatedSets = BTreeMap<String, CategorySets>;

/// An immutable ground-truth dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub taxonomy_version: String,
    images: Vec<ImageRecord>,
    image_index: HashMap<String, usize>,
    annotations: Vec<Annotation>,
    pub federated: Option<FederatedSets>,
}

// ---------------------------------------------------------------------------
// wire format

#[derive(Debug, Serialize, Deserialize)]
struct ImageFileRecord {
    id: String,
    width: u32,
    height: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationFileRecord {
    image_id: String,
    category: String,
    bbox: [f64; 4],
}

#[derive(Debug, Serialize, Deserialize)]
struct FederatedFileRecord {
    category: String,
    #[serde(default)]
    positive: Vec<String>,
    #[serde(default)]
    negative: Vec<String>,
}

/// On-disk shape of a dataset document.
#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetFile {
    pub dataset_name: String,
    #[serde(default)]
    pub taxonomy_version: String,
    images: Vec<ImageFileRecord>,
    annotations: Vec<AnnotationFileRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    federated: Option<Vec<FederatedFileRecord>>,
}

/// Loader behavior for categories that do not resolve in the taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnmappedPolicy {
    /// Fail loading (default): silent drops corrupt merges.
    #[default]
    Error,
    /// Drop the annotation and record a warning.
    Drop,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        taxonomy_version: impl Into<String>,
        images: Vec<ImageRecord>,
        annotations: Vec<Annotation>,
        federated: Option<FederatedSets>,
    ) -> Result<Self, DatasetError> {
        let mut image_index = HashMap::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if img.width == 0 || img.height == 0 {
                return Err(DatasetError::BadImageDimensions { id: img.id.clone() });
            }
            if image_index.insert(img.id.clone(), i).is_some() {
                return Err(DatasetError::DuplicateImageId { id: img.id.clone() });
            }
        }
        for (index, ann) in annotations.iter().enumerate() {
            if !image_index.contains_key(&ann.image_id) {
                return Err(DatasetError::UnknownImage { image_id: ann.image_id.clone(), index });
            }
        }
        if let Some(fed) = &federated {
            for (category, sets) in fed {
                for id in sets.positive.iter().chain(sets.negative.iter()) {
                    if !image_index.contains_key(id) {
                        return Err(DatasetError::FederatedUnknownImage {
                            category: category.clone(),
                            image_id: id.clone(),
                        });
                    }
                }
                if let Some(id) = sets.positive.intersection(&sets.negative).next() {
                    return Err(DatasetError::FederatedOverlap {
                        category: category.clone(),
                        image_id: id.clone(),
                    });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            taxonomy_version: taxonomy_version.into(),
            images,
            image_index,
            annotations,
            federated,
        })
    }

    /// Load a dataset document, resolving all categories through `taxonomy`.
    ///
    /// Returns the dataset plus human-readable warnings (clamped boxes,
    /// dropped annotations under [`UnmappedPolicy::Drop`]).
    pub fn load(
        path: impl AsRef<Path>,
        taxonomy: &Taxonomy,
        unmapped: UnmappedPolicy,
    ) -> Result<(Self, Vec<String>), DatasetError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: DatasetFile = serde_json::from_str(&text).map_err(|source| DatasetError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_file(file, taxonomy, unmapped)
    }

    /// Build a dataset from an already parsed document.
    pub fn from_file(
        file: DatasetFile,
        taxonomy: &Taxonomy,
        unmapped: UnmappedPolicy,
    ) -> Result<(Self, Vec<String>), DatasetError> {
        let mut warnings = Vec::new();
        let source = file.dataset_name.clone();

        let images: Vec<ImageRecord> = file
            .images
            .into_iter()
            .map(|i| ImageRecord { id: i.id, width: i.width, height: i.height, source: source.clone() })
            .collect();
        let dims: HashMap<&str, (u32, u32)> =
            images.iter().map(|i| (i.id.as_str(), (i.width, i.height))).collect();

        let mut annotations = Vec::with_capacity(file.annotations.len());
        for (index, raw) in file.annotations.into_iter().enumerate() {
            let [x, y, w, h] = raw.bbox;
            if !(w > 0.0 && h > 0.0 && x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
                return Err(DatasetError::DegenerateBox { image_id: raw.image_id, index, w, h });
            }
            let category = match taxonomy.map_source(&source, &raw.category) {
                Some(c) => c.to_string(),
                None => match unmapped {
                    UnmappedPolicy::Error => {
                        return Err(DatasetError::UnmappedCategory {
                            dataset: source,
                            category: raw.category,
                        })
                    }
                    UnmappedPolicy::Drop => {
                        warnings.push(format!(
                            "dropped annotation #{index}: no mapping for category {:?} in dataset {:?}",
                            raw.category, source
                        ));
                        continue;
                    }
                },
            };
            let &(iw, ih) = dims
                .get(raw.image_id.as_str())
                .ok_or_else(|| DatasetError::UnknownImage { image_id: raw.image_id.clone(), index })?;
            let bbox = BBox { x, y, w, h };
            let clamped = bbox
                .clamp_to(iw as f64, ih as f64)
                .map_err(|_| DatasetError::DegenerateBox { image_id: raw.image_id.clone(), index, w, h })?;
            if clamped != bbox {
                warnings.push(format!(
                    "clamped box on image {:?} (annotation #{index}) to image bounds",
                    raw.image_id
                ));
            }
            annotations.push(Annotation { image_id: raw.image_id, category, bbox: clamped });
        }

        let federated = match file.federated {
            None => None,
            Some(records) => {
                let mut out: FederatedSets = BTreeMap::new();
                for rec in records {
                    let category = taxonomy
                        .map_source(&source, &rec.category)
                        .map(str::to_string)
                        .ok_or_else(|| DatasetError::UnmappedCategory {
                            dataset: source.clone(),
                            category: rec.category.clone(),
                        })?;
                    let entry = out.entry(category).or_default();
                    entry.positive.extend(rec.positive);
                    entry.negative.extend(rec.negative);
                }
                Some(out)
            }
        };

        let ds = Dataset::new(file.dataset_name, file.taxonomy_version, images, annotations, federated)?;
        Ok((ds, warnings))
    }

    pub fn to_file(&self) -> DatasetFile {
        DatasetFile {
            dataset_name: self.name.clone(),
            taxonomy_version: self.taxonomy_version.clone(),
            images: self
                .images
                .iter()
                .map(|i| ImageFileRecord { id: i.id.clone(), width: i.width, height: i.height })
                .collect(),
            annotations: self
                .annotations
                .iter()
                .map(|a| AnnotationFileRecord {
                    image_id: a.image_id.clone(),
                    category: a.category.clone(),
                    bbox: a.bbox.into(),
                })
                .collect(),
            federated: self.federated.as_ref().map(|fed| {
                fed.iter()
                    .map(|(category, sets)| FederatedFileRecord {
                        category: category.clone(),
                        positive: sets.positive.iter().cloned().collect(),
                        negative: sets.negative.iter().cloned().collect(),
                    })
                    .collect()
            }),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let text = serde_json::to_string_pretty(&self.to_file()).expect("dataset serialization");
        std::fs::write(path.as_ref(), text).map_err(|source| DatasetError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn image(&self, id: &str) -> Option<&ImageRecord> {
        self.image_index.get(id).map(|&i| &self.images[i])
    }

    pub fn contains_image(&self, id: &str) -> bool {
        self.image_index.contains_key(id)
    }

    /// Per-category instance counts, sorted by count descending then id.
    pub fn histogram(&self) -> Vec<(String, usize)> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for a in &self.annotations {
            *counts.entry(a.category.as_str()).or_insert(0) += 1;
        }
        let mut out: Vec<(String, usize)> =
            counts.into_iter().map(|(c, n)| (c.to_string(), n)).collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// Merge datasets under one taxonomy. Image ids are namespaced by their
    /// source (`source/id`) and federated sets are unioned per category.
    pub fn merge(datasets: &[Dataset], _taxonomy: &Taxonomy) -> Result<Dataset, DatasetError> {
        if datasets.is_empty() {
            return Err(DatasetError::EmptyMerge);
        }
        let mut images: Vec<ImageRecord> = Vec::new();
        let mut seen: HashMap<String, (u32, u32)> = HashMap::new();
        let mut annotations: Vec<Annotation> = Vec::new();
        let mut federated: FederatedSets = BTreeMap::new();
        let mut any_federated = false;

        for ds in datasets {
            for img in &ds.images {
                let id = format!("{}/{}", img.source, img.id);
                if let Some(&(w, h)) = seen.get(&id) {
                    if (w, h) != (img.width, img.height) {
                        return Err(DatasetError::ConflictingDimensions {
                            id,
                            a: (w, h),
                            b: (img.width, img.height),
                        });
                    }
                    return Err(DatasetError::IdCollision { id });
                }
                seen.insert(id.clone(), (img.width, img.height));
                images.push(ImageRecord {
                    id,
                    width: img.width,
                    height: img.height,
                    source: img.source.clone(),
                });
            }
            for ann in &ds.annotations {
                let source = &ds.image(&ann.image_id).expect("validated annotation").source;
                annotations.push(Annotation {
                    image_id: format!("{source}/{}", ann.image_id),
                    category: ann.category.clone(),
                    bbox: ann.bbox,
                });
            }
            if let Some(fed) = &ds.federated {
                any_federated = true;
                for (category, sets) in fed {
                    let entry = federated.entry(category.clone()).or_default();
                    for id in &sets.positive {
                        let source = &ds.image(id).expect("validated federated id").source;
                        entry.positive.insert(format!("{source}/{id}"));
                    }
                    for id in &sets.negative {
                        let source = &ds.image(id).expect("validated federated id").source;
                        entry.negative.insert(format!("{source}/{id}"));
                    }
                }
            }
        }

        let names: Vec<&str> = datasets.iter().map(|d| d.name.as_str()).collect();
        Dataset::new(
            names.join("+"),
            datasets[0].taxonomy_version.clone(),
            images,
            annotations,
            if any_federated { Some(federated) } else { None },
        )
    }
}
