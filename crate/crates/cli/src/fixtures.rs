//! Synthetic dataset/detection generators for benchmarks and load tests.

use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};

use genodkit_core::dataset::{Annotation, Dataset, ImageRecord};
use genodkit_core::detection::{Detection, DetectionSet};
use genodkit_core::geometry::BBox;
use genodkit_core::taxonomy::{CategoryNode, Taxonomy};

pub fn category_name(i: usize) -> String {
    format!("c{i:04}")
}

/// Flat taxonomy with `n_categories` root categories.
pub fn synthetic_taxonomy(n_categories: usize) -> Taxonomy {
    let nodes = (0..n_categories)
        .map(|i| CategoryNode {
            id: category_name(i),
            display_name: format!("Category {i}"),
            parent_id: None,
        })
        .collect();
    Taxonomy::from_parts(nodes, vec![]).expect("flat taxonomy is valid")
}

/// Ground truth plus detections for evaluation benchmarks.
///
/// Roughly half the detections track a ground-truth box with a small offset;
/// the rest are scattered false positives. Deterministic given the seed.
pub fn synthetic_eval_fixture(
    n_images: usize,
    n_categories: usize,
    n_detections: usize,
    seed: u64,
) -> (Dataset, DetectionSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images: Vec<ImageRecord> = (0..n_images)
        .map(|i| ImageRecord {
            id: format!("img{i:06}"),
            width: 640,
            height: 480,
            source: "bench".into(),
        })
        .collect();

    let n_gt = (n_detections / 2).max(1);
    let mut annotations = Vec::with_capacity(n_gt);
    for k in 0..n_gt {
        let image = k % n_images;
        let category = k % n_categories;
        let x = rng.random_range(0.0..560.0);
        let y = rng.random_range(0.0..400.0);
        let w = rng.random_range(30.0..80.0);
        let h = rng.random_range(30.0..80.0);
        annotations.push(Annotation {
            image_id: images[image].id.clone(),
            category: category_name(category),
            bbox: BBox::new(x, y, w, h).expect("in-range box"),
        });
    }
    let gt = Dataset::new("bench", "v1", images.clone(), annotations, None)
        .expect("well-formed fixture");

    let mut detections = Vec::with_capacity(n_detections);
    for k in 0..n_detections {
        let det = if k < n_gt * 7 / 10 {
            // near-match of a ground-truth box
            let a = &gt.annotations()[k];
            let dx = rng.random_range(-4.0..4.0);
            let dy = rng.random_range(-4.0..4.0);
            Detection::new(
                a.image_id.clone(),
                a.category.clone(),
                BBox::new((a.bbox.x + dx).max(0.0), (a.bbox.y + dy).max(0.0), a.bbox.w, a.bbox.h)
                    .expect("shifted box"),
                rng.random_range(0.3..1.0),
            )
        } else {
            let image = rng.random_range(0..n_images);
            let category = rng.random_range(0..n_categories);
            Detection::new(
                gt.images()[image].id.clone(),
                category_name(category),
                BBox::new(
                    rng.random_range(0.0..560.0),
                    rng.random_range(0.0..400.0),
                    rng.random_range(20.0..60.0),
                    rng.random_range(20.0..60.0),
                )
                .expect("in-range box"),
                rng.random_range(0.0..1.0),
            )
        };
        detections.push(det);
    }

    (gt, DetectionSet::new(detections))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_deterministic_and_sized() {
        let (gt_a, dets_a) = synthetic_eval_fixture(50, 20, 400, 9);
        let (gt_b, dets_b) = synthetic_eval_fixture(50, 20, 400, 9);
        assert_eq!(gt_a, gt_b);
        assert_eq!(dets_a, dets_b);
        assert_eq!(gt_a.images().len(), 50);
        assert_eq!(dets_a.len(), 400);
        assert_eq!(gt_a.annotations().len(), 200);
    }

    #[test]
    fn fixture_categories_resolve_in_taxonomy() {
        let tax = synthetic_taxonomy(20);
        let (gt, dets) = synthetic_eval_fixture(10, 20, 100, 1);
        for a in gt.annotations() {
            assert!(tax.contains(&a.category));
        }
        for d in &dets.detections {
            assert!(tax.contains(&d.category));
        }
    }
}
