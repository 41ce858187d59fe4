//! Non-neural machinery of a large-vocabulary object detection platform:
//! taxonomy unification, dataset merging and rebalancing, detection metrics
//! with federated evaluation, hierarchical label propagation, disjoint
//! detector-head federation, and a crowd annotation micro-task orchestrator
//! with cost/latency accounting.
//!
//! Everything here is deterministic: randomized operations take explicit
//! seeds, collections serialize in canonical order, and repeated runs
//! reproduce outputs byte for byte.

pub mod dataset;
pub mod detection;
pub mod evaluation;
pub mod federation;
pub mod geometry;
pub mod pipeline;
pub mod postprocess;
pub mod sampling;
pub mod taxonomy;

pub use dataset::{Annotation, Dataset, FederatedSets, ImageRecord};
pub use detection::{Detection, DetectionSet};
pub use geometry::{iou, BBox};
pub use taxonomy::Taxonomy;
