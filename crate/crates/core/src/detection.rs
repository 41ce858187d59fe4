//! Model detections and the detections document format.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;

#[derive(Debug, Error)]
pub enum DetectionError {
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
    #[error("detection #{index} has score {score} outside [0, 1]")]
    ScoreOutOfRange { index: usize, score: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Model,
    Propagated,
}

/// Where a detection came from: raw model output or hierarchy propagation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_category: Option<String>,
}

impl Provenance {
    pub fn model() -> Self {
        Self { origin: Origin::Model, from_category: None }
    }

    pub fn propagated(from: impl Into<String>) -> Self {
        Self { origin: Origin::Propagated, from_category: Some(from.into()) }
    }
}

/// One scored, categorized box on an image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub category: String,
    pub bbox: BBox,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Detection {
    pub fn new(image_id: impl Into<String>, category: impl Into<String>, bbox: BBox, score: f64) -> Self {
        Self {
            image_id: image_id.into(),
            category: category.into(),
            bbox,
            score,
            head_id: None,
            provenance: None,
        }
    }
}

/// A collection of detections, zero or more per image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DetectionSet {
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn new(detections: Vec<Detection>) -> Self {
        Self { detections }
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DetectionError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DetectionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            DetectionError::Parse { source, .. } => DetectionError::Parse {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, DetectionError> {
        let set: DetectionSet = serde_json::from_str(text).map_err(|source| DetectionError::Parse {
            path: "<inline>".to_string(),
            source,
        })?;
        set.validate_scores()?;
        Ok(set)
    }

    /// Check score bounds on detections built outside the loaders.
    pub fn validate(&self) -> Result<(), DetectionError> {
        self.validate_scores()
    }

    fn validate_scores(&self) -> Result<(), DetectionError> {
        for (index, d) in self.detections.iter().enumerate() {
            if !(0.0..=1.0).contains(&d.score) || d.score.is_nan() {
                return Err(DetectionError::ScoreOutOfRange { index, score: d.score });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("detection serialization")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DetectionError> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|source| DetectionError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    pub fn image_ids(&self) -> BTreeSet<&str> {
        self.detections.iter().map(|d| d.image_id.as_str()).collect()
    }

    pub fn categories(&self) -> BTreeSet<&str> {
        self.detections.iter().map(|d| d.category.as_str()).collect()
    }

    /// Sort into the canonical order: image id, category, score descending,
    /// then box coordinates and head id as total tie-breaks.
    pub fn sort_canonical(&mut self) {
        self.detections.sort_by(|a, b| {
            a.image_id
                .cmp(&b.image_id)
                .then_with(|| a.category.cmp(&b.category))
                .then_with(|| b.score.total_cmp(&a.score))
                .then_with(|| a.bbox.cmp_coords(&b.bbox))
                .then_with(|| a.head_id.cmp(&b.head_id))
        });
    }
}
