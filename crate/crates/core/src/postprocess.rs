//! Inference-time detection transforms: hierarchy label propagation,
//! non-maximum suppression, score thresholding, triggering, and
//! category-based result filtering.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::detection::{Detection, DetectionSet, Provenance};
use crate::evaluation::RankedItem;
use crate::geometry::iou;
use crate::taxonomy::Taxonomy;

#[derive(Debug, Error)]
pub enum PostprocessError {
    #[error("IoU threshold {0} outside (0, 1]")]
    BadIouThreshold(f64),
    #[error("score threshold {0} outside [0, 1]")]
    BadScoreThreshold(f64),
    #[error("unknown category id: {0}")]
    UnknownCategory(String),
    #[error("unknown image id: {0}")]
    UnknownImage(String),
    #[error("segment must name at least one category")]
    EmptySegment,
}

fn check_iou_thresh(t: f64) -> Result<(), PostprocessError> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(PostprocessError::BadIouThreshold(t))
    }
}

/// Copy every detection's box and score to each ancestor of its category,
/// then deduplicate per (image, category).
///
/// Within a group, detections whose boxes overlap at `dedup_iou` or above are
/// reduced greedily to the highest score; on ties input detections win over
/// propagated copies. The default `dedup_iou` of 1.0 only collapses exact
/// duplicate boxes.
pub fn propagate(
    ds: &DetectionSet,
    taxonomy: &Taxonomy,
    dedup_iou: f64,
) -> Result<DetectionSet, PostprocessError> {
    check_iou_thresh(dedup_iou)?;

    struct Candidate {
        det: Detection,
        emitted: bool,
        input_idx: usize,
    }

    let mut groups: BTreeMap<(String, String), Vec<Candidate>> = BTreeMap::new();
    for (input_idx, det) in ds.detections.iter().enumerate() {
        let ancestors = taxonomy
            .ancestors(&det.category)
            .map_err(|_| PostprocessError::UnknownCategory(det.category.clone()))?;

        let mut original = det.clone();
        if original.provenance.is_none() {
            original.provenance = Some(Provenance::model());
        }
        groups
            .entry((det.image_id.clone(), det.category.clone()))
            .or_default()
            .push(Candidate { det: original, emitted: false, input_idx });

        for ancestor in ancestors {
            let mut copy = det.clone();
            copy.category = ancestor.to_string();
            copy.provenance = Some(Provenance::propagated(det.category.clone()));
            groups
                .entry((det.image_id.clone(), ancestor.to_string()))
                .or_default()
                .push(Candidate { det: copy, emitted: true, input_idx });
        }
    }

    let mut out = Vec::new();
    for (_, mut candidates) in groups {
        candidates.sort_by(|a, b| {
            b.det
                .score
                .total_cmp(&a.det.score)
                .then_with(|| a.emitted.cmp(&b.emitted))
                .then_with(|| a.input_idx.cmp(&b.input_idx))
        });
        let mut kept: Vec<Detection> = Vec::new();
        for cand in candidates {
            if kept.iter().all(|k| iou(&k.bbox, &cand.det.bbox) < dedup_iou) {
                kept.push(cand.det);
            }
        }
        out.extend(kept);
    }
    Ok(DetectionSet::new(out))
}

/// Per-(image, category) greedy non-maximum suppression.
///
/// Output detections keep their input order; the kept set is always a subset
/// of the input.
pub fn nms(ds: &DetectionSet, iou_thresh: f64) -> Result<DetectionSet, PostprocessError> {
    check_iou_thresh(iou_thresh)?;

    let mut by_group: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, det) in ds.detections.iter().enumerate() {
        by_group
            .entry((det.image_id.as_str(), det.category.as_str()))
            .or_default()
            .push(i);
    }

    let mut keep = vec![false; ds.detections.len()];
    for indices in by_group.values() {
        let mut order = indices.clone();
        order.sort_by(|&a, &b| {
            ds.detections[b]
                .score
                .total_cmp(&ds.detections[a].score)
                .then_with(|| a.cmp(&b))
        });
        let mut kept_boxes: Vec<usize> = Vec::new();
        for &i in &order {
            let suppressed = kept_boxes
                .iter()
                .any(|&k| iou(&ds.detections[k].bbox, &ds.detections[i].bbox) >= iou_thresh);
            if !suppressed {
                kept_boxes.push(i);
                keep[i] = true;
            }
        }
    }

    Ok(DetectionSet::new(
        ds.detections
            .iter()
            .enumerate()
            .filter(|(i, _)| keep[*i])
            .map(|(_, d)| d.clone())
            .collect(),
    ))
}

/// Keep detections whose score reaches their category's threshold.
///
/// Per-category entries override `default_thresh`.
pub fn filter_scores(
    ds: &DetectionSet,
    thresholds: &BTreeMap<String, f64>,
    default_thresh: f64,
) -> Result<DetectionSet, PostprocessError> {
    for &t in thresholds.values().chain(std::iter::once(&default_thresh)) {
        if !(0.0..=1.0).contains(&t) {
            return Err(PostprocessError::BadScoreThreshold(t));
        }
    }
    Ok(DetectionSet::new(
        ds.detections
            .iter()
            .filter(|d| d.score >= thresholds.get(&d.category).copied().unwrap_or(default_thresh))
            .cloned()
            .collect(),
    ))
}

/// Decide whether an image triggers a category segment.
///
/// True when some detection on the image scores at least `min_score` and its
/// category, or any ancestor of it, lies in `segment`. `known_images` is the
/// image universe; asking about an image outside it is an error.
pub fn image_trigger(
    ds: &DetectionSet,
    known_images: &BTreeSet<String>,
    image_id: &str,
    segment: &BTreeSet<String>,
    taxonomy: &Taxonomy,
    min_score: f64,
) -> Result<bool, PostprocessError> {
    if segment.is_empty() {
        return Err(PostprocessError::EmptySegment);
    }
    if !known_images.contains(image_id) {
        return Err(PostprocessError::UnknownImage(image_id.to_string()));
    }
    for det in ds.detections.iter().filter(|d| d.image_id == image_id) {
        if det.score < min_score {
            continue;
        }
        if segment.contains(&det.category) {
            return Ok(true);
        }
        let ancestors = taxonomy
            .ancestors(&det.category)
            .map_err(|_| PostprocessError::UnknownCategory(det.category.clone()))?;
        if ancestors.iter().any(|a| segment.contains(*a)) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Stable-filter ranked items to those matching the query category or one of
/// its descendants. Items with categories unknown to the taxonomy are
/// dropped.
pub fn category_filter(query: &str, items: &[RankedItem], taxonomy: &Taxonomy) -> Vec<RankedItem> {
    items
        .iter()
        .filter(|item| {
            item.category == query
                || taxonomy
                    .is_ancestor(query, &item.category)
                    .unwrap_or(false)
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::Origin;
    use crate::geometry::BBox;
    use crate::taxonomy::{CategoryNode, Taxonomy};
    use proptest::prelude::*;

    fn tax() -> Taxonomy {
        let node = |id: &str, parent: Option<&str>| CategoryNode {
            id: id.into(),
            display_name: id.into(),
            parent_id: parent.map(str::to_string),
        };
        Taxonomy::from_parts(
            vec![
                node("animal", None),
                node("bird", Some("animal")),
                node("blue_jay", Some("bird")),
                node("sofa", None),
            ],
            vec![],
        )
        .unwrap()
    }

    fn bbox(x: f64) -> BBox {
        BBox::new(x, 0.0, 10.0, 10.0).unwrap()
    }

    fn det(image: &str, cat: &str, x: f64, score: f64) -> Detection {
        Detection::new(image, cat, bbox(x), score)
    }

    #[test]
    fn propagate_adds_ancestor_labels() {
        let ds = DetectionSet::new(vec![det("i", "blue_jay", 0.0, 0.9)]);
        let out = propagate(&ds, &tax(), 1.0).unwrap();
        let mut cats: Vec<&str> = out.detections.iter().map(|d| d.category.as_str()).collect();
        cats.sort_unstable();
        assert_eq!(cats, vec!["animal", "bird", "blue_jay"]);
        for d in &out.detections {
            assert_eq!(d.score, 0.9);
            assert_eq!(d.bbox, bbox(0.0));
        }
        let bird = out.detections.iter().find(|d| d.category == "bird").unwrap();
        assert_eq!(
            bird.provenance,
            Some(Provenance::propagated("blue_jay"))
        );
    }

    #[test]
    fn propagate_keeps_root_detections_unchanged() {
        let ds = DetectionSet::new(vec![det("i", "sofa", 0.0, 0.7)]);
        let out = propagate(&ds, &tax(), 1.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.detections[0].category, "sofa");
        assert_eq!(out.detections[0].provenance.as_ref().unwrap().origin, Origin::Model);
    }

    #[test]
    fn propagate_dedups_to_max_score() {
        let ds = DetectionSet::new(vec![
            det("i", "bird", 0.0, 0.7),
            det("i", "blue_jay", 0.0, 0.9),
        ]);
        let out = propagate(&ds, &tax(), 1.0).unwrap();
        let birds: Vec<&Detection> =
            out.detections.iter().filter(|d| d.category == "bird").collect();
        assert_eq!(birds.len(), 1);
        assert_eq!(birds[0].score, 0.9);
    }

    #[test]
    fn propagate_unknown_category_errors() {
        let ds = DetectionSet::new(vec![det("i", "zeppelin", 0.0, 0.9)]);
        assert!(matches!(
            propagate(&ds, &tax(), 1.0),
            Err(PostprocessError::UnknownCategory(c)) if c == "zeppelin"
        ));
    }

    #[test]
    fn propagate_grows_category_coverage() {
        let ds = DetectionSet::new(vec![
            det("i", "blue_jay", 0.0, 0.9),
            det("i", "bird", 20.0, 0.4),
            det("j", "sofa", 0.0, 0.8),
        ]);
        let out = propagate(&ds, &tax(), 1.0).unwrap();
        let pairs = |s: &DetectionSet| {
            s.detections
                .iter()
                .map(|d| (d.image_id.clone(), d.category.clone()))
                .collect::<BTreeSet<_>>()
        };
        assert!(pairs(&out).is_superset(&pairs(&ds)));
    }

    #[test]
    fn nms_keeps_highest_of_identical_boxes() {
        let ds = DetectionSet::new(vec![det("i", "c", 0.0, 0.9), det("i", "c", 0.0, 0.8)]);
        let out = nms(&ds, 0.5).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.detections[0].score, 0.9);
    }

    #[test]
    fn nms_keeps_disjoint_boxes() {
        let ds = DetectionSet::new(vec![det("i", "c", 0.0, 0.9), det("i", "c", 50.0, 0.8)]);
        assert_eq!(nms(&ds, 0.5).unwrap().len(), 2);
    }

    #[test]
    fn nms_chain_keeps_ends() {
        // A ~ B and B ~ C overlap above threshold, A ~ C below; A > B > C
        let a = det("i", "c", 0.0, 0.9);
        let b = det("i", "c", 2.5, 0.8);
        let c = det("i", "c", 5.5, 0.7);
        assert!(iou(&a.bbox, &b.bbox) >= 0.5);
        assert!(iou(&b.bbox, &c.bbox) >= 0.5);
        assert!(iou(&a.bbox, &c.bbox) < 0.5);
        let out = nms(&DetectionSet::new(vec![a, b, c]), 0.5).unwrap();
        let xs: Vec<f64> = out.detections.iter().map(|d| d.bbox.x).collect();
        assert_eq!(xs, vec![0.0, 5.5]);
    }

    #[test]
    fn nms_is_per_category_and_per_image() {
        let ds = DetectionSet::new(vec![
            det("i", "c", 0.0, 0.9),
            det("i", "other", 0.0, 0.8),
            det("j", "c", 0.0, 0.7),
        ]);
        assert_eq!(nms(&ds, 0.5).unwrap().len(), 3);
    }

    #[test]
    fn filter_scores_override_semantics() {
        let ds = DetectionSet::new(vec![det("i", "sofa", 0.0, 0.4), det("i", "lamp", 0.0, 0.4)]);
        let mut thresholds = BTreeMap::new();
        thresholds.insert("sofa".to_string(), 0.5);
        let out = filter_scores(&ds, &thresholds, 0.3).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.detections[0].category, "lamp");

        assert_eq!(filter_scores(&ds, &BTreeMap::new(), 0.0).unwrap().len(), 2);
        assert_eq!(filter_scores(&ds, &BTreeMap::new(), 1.0).unwrap().len(), 0);
    }

    #[test]
    fn image_trigger_uses_ancestors_and_threshold() {
        let t = tax();
        let ds = DetectionSet::new(vec![det("i", "blue_jay", 0.0, 0.9), det("j", "sofa", 0.0, 0.4)]);
        let images: BTreeSet<String> =
            ["i", "j", "empty"].iter().map(|s| s.to_string()).collect();
        let segment: BTreeSet<String> = [String::from("animal")].into();

        assert!(image_trigger(&ds, &images, "i", &segment, &t, 0.5).unwrap());
        assert!(!image_trigger(&ds, &images, "empty", &segment, &t, 0.5).unwrap());

        let sofa_segment: BTreeSet<String> = [String::from("sofa")].into();
        assert!(!image_trigger(&ds, &images, "j", &sofa_segment, &t, 0.5).unwrap());
        assert!(image_trigger(&ds, &images, "j", &sofa_segment, &t, 0.3).unwrap());

        assert!(matches!(
            image_trigger(&ds, &images, "ghost", &segment, &t, 0.5),
            Err(PostprocessError::UnknownImage(_))
        ));
        assert!(matches!(
            image_trigger(&ds, &images, "i", &BTreeSet::new(), &t, 0.5),
            Err(PostprocessError::EmptySegment)
        ));
    }

    #[test]
    fn category_filter_keeps_matches_and_descendants_in_order() {
        let t = tax();
        let item = |id: &str, cat: &str| RankedItem { item: id.into(), category: cat.into() };
        let items = vec![item("i1", "sofa"), item("i2", "animal"), item("i3", "sofa")];
        let out = category_filter("sofa", &items, &t);
        assert_eq!(out, vec![item("i1", "sofa"), item("i3", "sofa")]);

        // all matching -> identity
        let all = vec![item("a", "sofa"), item("b", "sofa")];
        assert_eq!(category_filter("sofa", &all, &t), all);

        // descendant rule
        let out = category_filter("animal", &[item("x", "blue_jay")], &t);
        assert_eq!(out.len(), 1);
    }

    fn arb_detections() -> impl Strategy<Value = DetectionSet> {
        proptest::collection::vec(
            (0..3usize, 0..4usize, 0.0..30.0f64, 0.0..1.0f64),
            0..25,
        )
        .prop_map(|raw| {
            let cats = ["animal", "bird", "blue_jay", "sofa"];
            DetectionSet::new(
                raw.into_iter()
                    .map(|(img, cat, x, score)| det(&format!("img{img}"), cats[cat], x, score))
                    .collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn propagate_is_idempotent(ds in arb_detections(), dedup in prop_oneof![Just(1.0), Just(0.5)]) {
            let t = tax();
            let once = propagate(&ds, &t, dedup).unwrap();
            let twice = propagate(&once, &t, dedup).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn nms_output_subset_and_idempotent(ds in arb_detections(), thresh in 0.1..1.0f64) {
            let out = nms(&ds, thresh).unwrap();
            prop_assert!(out.len() <= ds.len());
            for d in &out.detections {
                prop_assert!(ds.detections.contains(d));
            }
            let again = nms(&out, thresh).unwrap();
            prop_assert_eq!(out, again);
        }

        #[test]
        fn category_filter_returns_subsequence(ds in arb_detections()) {
            let t = tax();
            let items: Vec<RankedItem> = ds
                .detections
                .iter()
                .enumerate()
                .map(|(i, d)| RankedItem { item: format!("r{i}"), category: d.category.clone() })
                .collect();
            let filtered = category_filter("bird", &items, &t);
            // subsequence: the filtered ids appear in the same relative order
            let mut cursor = 0usize;
            for kept in &filtered {
                let pos = items[cursor..].iter().position(|i| i.item == kept.item);
                prop_assert!(pos.is_some());
                cursor += pos.unwrap() + 1;
            }
        }
    }
}
