//! Greedy one-to-one matching of detections to ground truths.

use std::collections::HashMap;

use crate::dataset::{Annotation, CategorySets};
use crate::detection::Detection;
use crate::geometry::iou;

use super::EvalError;

/// Outcome of one detection after matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchLabel {
    /// Matched a ground truth; carries the index into the ground-truth slice.
    Tp { gt_index: usize },
    Fp,
    /// On an image outside the category's federated positive/negative sets.
    Ignored,
}

/// Result of matching one category's detections against its ground truths.
#[derive(Debug, Clone)]
pub struct MatchResult {
    /// Detection labels in canonical (score-descending) order.
    pub labels: Vec<MatchLabel>,
    /// Input index of each canonically ordered detection.
    pub det_order: Vec<usize>,
    /// Matched flag per input ground truth.
    pub gt_matched: Vec<bool>,
    /// Number of evaluable ground truths.
    pub n_gt: usize,
}

/// Canonical processing order: score descending, ties broken by image id,
/// box coordinates, and finally input position, so results do not depend on
/// input ordering.
fn canonical_order(dets: &[Detection]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    idx.sort_by(|&a, &b| {
        dets[b]
            .score
            .total_cmp(&dets[a].score)
            .then_with(|| dets[a].image_id.cmp(&dets[b].image_id))
            .then_with(|| dets[a].bbox.cmp_coords(&dets[b].bbox))
            .then_with(|| a.cmp(&b))
    });
    idx
}

/// Match one category's detections against its ground truths.
///
/// Detections are processed in canonical score order; each takes the
/// unmatched same-image ground truth with the highest IoU at or above
/// `iou_thresh` (lowest index on ties), otherwise counts as a false positive.
/// When `federated` sets are given, detections and ground truths on images in
/// neither set are excluded from scoring.
pub fn match_category(
    dets: &[Detection],
    gts: &[Annotation],
    federated: Option<&CategorySets>,
    iou_thresh: f64,
) -> Result<MatchResult, EvalError> {
    if !(iou_thresh > 0.0 && iou_thresh <= 1.0) {
        return Err(EvalError::BadIouThreshold(iou_thresh));
    }
    let category = dets
        .first()
        .map(|d| d.category.as_str())
        .or_else(|| gts.first().map(|g| g.category.as_str()));
    if let Some(cat) = category {
        if let Some(d) = dets.iter().find(|d| d.category != cat) {
            return Err(EvalError::MixedCategories {
                expected: cat.to_string(),
                found: d.category.clone(),
            });
        }
        if let Some(g) = gts.iter().find(|g| g.category != cat) {
            return Err(EvalError::MixedCategories {
                expected: cat.to_string(),
                found: g.category.clone(),
            });
        }
    }

    let in_protocol = |image: &str| match federated {
        None => true,
        Some(sets) => sets.positive.contains(image) || sets.negative.contains(image),
    };

    // evaluable ground truths per image
    let mut gt_by_image: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut n_gt = 0usize;
    for (i, g) in gts.iter().enumerate() {
        if in_protocol(&g.image_id) {
            gt_by_image.entry(g.image_id.as_str()).or_default().push(i);
            n_gt += 1;
        }
    }

    let order = canonical_order(dets);
    let mut labels = Vec::with_capacity(order.len());
    let mut gt_matched = vec![false; gts.len()];

    for &di in &order {
        let det = &dets[di];
        if !in_protocol(&det.image_id) {
            labels.push(MatchLabel::Ignored);
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        if let Some(candidates) = gt_by_image.get(det.image_id.as_str()) {
            for &gi in candidates {
                if gt_matched[gi] {
                    continue;
                }
                let overlap = iou(&det.bbox, &gts[gi].bbox);
                if overlap < iou_thresh {
                    continue;
                }
                // strictly-greater keeps the lowest gt index on ties
                let better = match best {
                    None => true,
                    Some((_, b)) => overlap > b,
                };
                if better {
                    best = Some((gi, overlap));
                }
            }
        }
        match best {
            Some((gi, _)) => {
                gt_matched[gi] = true;
                labels.push(MatchLabel::Tp { gt_index: gi });
            }
            None => labels.push(MatchLabel::Fp),
        }
    }

    Ok(MatchResult { labels, det_order: order, gt_matched, n_gt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use std::collections::BTreeSet;

    fn gt(image: &str, x: f64) -> Annotation {
        Annotation {
            image_id: image.into(),
            category: "c".into(),
            bbox: BBox::new(x, 0.0, 10.0, 10.0).unwrap(),
        }
    }

    fn det(image: &str, x: f64, score: f64) -> Detection {
        Detection::new(image, "c", BBox::new(x, 0.0, 10.0, 10.0).unwrap(), score)
    }

    #[test]
    fn exact_box_is_true_positive() {
        let m = match_category(&[det("i", 0.0, 0.9)], &[gt("i", 0.0)], None, 0.5).unwrap();
        assert_eq!(m.labels, vec![MatchLabel::Tp { gt_index: 0 }]);
        assert_eq!(m.n_gt, 1);
    }

    #[test]
    fn one_ground_truth_matches_at_most_once() {
        let dets = vec![det("i", 0.0, 0.8), det("i", 0.0, 0.9)];
        let m = match_category(&dets, &[gt("i", 0.0)], None, 0.5).unwrap();
        // canonical order puts the 0.9 detection first
        assert_eq!(m.det_order, vec![1, 0]);
        assert_eq!(m.labels, vec![MatchLabel::Tp { gt_index: 0 }, MatchLabel::Fp]);
    }

    #[test]
    fn below_threshold_is_false_positive() {
        // boxes offset by 6 of 10 px: IoU = 4/16 = 0.25 < 0.5
        let m = match_category(&[det("i", 6.0, 0.9)], &[gt("i", 0.0)], None, 0.5).unwrap();
        assert_eq!(m.labels, vec![MatchLabel::Fp]);
        assert_eq!(m.gt_matched, vec![false]);
    }

    #[test]
    fn highest_iou_wins_with_lowest_index_tiebreak() {
        let gts = vec![gt("i", 0.0), gt("i", 2.0)];
        // detection at x=2 overlaps gt1 fully and gt0 partially
        let m = match_category(&[det("i", 2.0, 0.9)], &gts, None, 0.5).unwrap();
        assert_eq!(m.labels, vec![MatchLabel::Tp { gt_index: 1 }]);
    }

    #[test]
    fn mixed_categories_rejected() {
        let mut other = det("i", 0.0, 0.5);
        other.category = "other".into();
        let err = match_category(&[det("i", 0.0, 0.9), other], &[], None, 0.5).unwrap_err();
        assert!(matches!(err, EvalError::MixedCategories { .. }));
    }

    #[test]
    fn federated_out_of_protocol_detections_ignored() {
        let sets = CategorySets {
            positive: BTreeSet::from(["i".to_string()]),
            negative: BTreeSet::from(["neg".to_string()]),
        };
        let dets = vec![det("i", 0.0, 0.9), det("elsewhere", 0.0, 0.95), det("neg", 0.0, 0.8)];
        let m = match_category(&dets, &[gt("i", 0.0)], Some(&sets), 0.5).unwrap();
        // canonical: elsewhere@0.95, i@0.9, neg@0.8
        assert_eq!(m.labels, vec![
            MatchLabel::Ignored,
            MatchLabel::Tp { gt_index: 0 },
            MatchLabel::Fp,
        ]);
        assert_eq!(m.n_gt, 1);
    }
}
