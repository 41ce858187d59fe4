//! Detection quality metrics: IoU matching, average precision at fixed and
//! swept IoU thresholds, weighted aggregation, federated evaluation, and
//! application-level rates.

mod ap;
mod matching;

pub use ap::{average_precision, ApMode};
pub use matching::{match_category, MatchLabel, MatchResult};

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Annotation, CategorySets, Dataset};
use crate::detection::{Detection, DetectionSet};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("IoU threshold {0} outside (0, 1]")]
    BadIouThreshold(f64),
    #[error("mixed categories in match input: expected {expected:?}, found {found:?}")]
    MixedCategories { expected: String, found: String },
    #[error("no category has evaluable ground truth")]
    NoEvaluableGroundTruth,
    #[error("cutoff k must be at least 1")]
    BadCutoff,
    #[error("defect rate needs at least one query")]
    EmptyQuerySet,
    #[error("query {query:?} has an empty result list")]
    EmptyResultList { query: String },
    #[error("{side} set contains {id:?} which is not in the universe")]
    OutsideUniverse { side: &'static str, id: String },
    #[error("baseline must be positive, got {0}")]
    BadBaseline(f64),
}

/// Where per-category weights for the weighted AP aggregate come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    /// Ground-truth instance counts in the evaluation set.
    #[default]
    InstanceCount,
    /// Every category weighs the same; the weighted aggregate equals the mean.
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub mode: ApMode,
    pub weight_source: WeightSource,
    /// IoU threshold for the headline AP50/wAP50 numbers.
    pub main_iou: f64,
    /// IoU thresholds averaged into the swept AP.
    pub sweep: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mode: ApMode::Exact,
            weight_source: WeightSource::InstanceCount,
            main_iou: 0.5,
            sweep: (0..10).map(|i| 0.5 + 0.05 * i as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryEval {
    pub category: String,
    pub n_gt: usize,
    pub weight: f64,
    pub ap50: f64,
    /// Mean AP over the swept IoU thresholds.
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_category: Vec<CategoryEval>,
    /// Categories excluded from the aggregates for lack of ground truth.
    pub zero_gt_categories: Vec<String>,
    /// Unweighted mean of per-category AP at the main IoU threshold.
    pub ap50: f64,
    /// Weighted mean of per-category AP at the main IoU threshold.
    pub wap50: f64,
    /// Mean over categories of the swept AP.
    pub ap: f64,
    pub federated: bool,
    pub config: EvalConfig,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    /// Flat per-category rows: `category,n_gt,AP50,weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,n_gt,AP50,weight\n");
        for row in &self.per_category {
            out.push_str(&format!("{},{},{},{}\n", row.category, row.n_gt, row.ap50, row.weight));
        }
        out
    }
}

/// Weighted mean of `(weight, value)` pairs.
pub fn weighted_mean(entries: &[(f64, f64)]) -> f64 {
    let total: f64 = entries.iter().map(|(w, _)| w).sum();
    if total == 0.0 {
        return 0.0;
    }
    entries.iter().map(|(w, v)| w * v).sum::<f64>() / total
}

/// Evaluate detections against ground truth, per category and aggregated.
///
/// When the dataset carries federated sets, each category is scored only on
/// its positive and negative images; detections elsewhere are ignored.
pub fn evaluate(gt: &Dataset, dets: &DetectionSet, config: &EvalConfig) -> Result<EvalReport, EvalError> {
    let federated = gt.federated.as_ref();
    let empty_sets = CategorySets::default();

    let mut categories: BTreeSet<&str> = gt.annotations().iter().map(|a| a.category.as_str()).collect();
    if let Some(fed) = federated {
        categories.extend(fed.keys().map(String::as_str));
    }
    categories.extend(dets.detections.iter().map(|d| d.category.as_str()));

    let mut gt_by_cat: HashMap<&str, Vec<Annotation>> = HashMap::new();
    for a in gt.annotations() {
        gt_by_cat.entry(a.category.as_str()).or_default().push(a.clone());
    }
    let mut det_by_cat: HashMap<&str, Vec<Detection>> = HashMap::new();
    for d in &dets.detections {
        det_by_cat.entry(d.category.as_str()).or_default().push(d.clone());
    }

    // (category, n_gt, ap50, swept ap)
    type CategoryOutcome = (String, usize, Option<f64>, Option<f64>);

    let empty_gts: Vec<Annotation> = Vec::new();
    let empty_dets: Vec<Detection> = Vec::new();
    let ordered: Vec<&str> = categories.into_iter().collect();
    let evals: Vec<Result<CategoryOutcome, EvalError>> = ordered
        .par_iter()
        .map(|&cat| {
            let cat_gts = gt_by_cat.get(cat).unwrap_or(&empty_gts);
            let cat_dets = det_by_cat.get(cat).unwrap_or(&empty_dets);
            let sets = federated.map(|fed| fed.get(cat).unwrap_or(&empty_sets));

            let main = match_category(cat_dets, cat_gts, sets, config.main_iou)?;
            let ap50 = average_precision(&main, config.mode);
            let mut sweep_total = 0.0;
            let mut sweep_n = 0usize;
            for &thresh in &config.sweep {
                let m = match_category(cat_dets, cat_gts, sets, thresh)?;
                if let Some(v) = average_precision(&m, config.mode) {
                    sweep_total += v;
                    sweep_n += 1;
                }
            }
            let ap = (sweep_n > 0).then(|| sweep_total / sweep_n as f64);
            Ok((cat.to_string(), main.n_gt, ap50, ap))
        })
        .collect();

    let mut per_category = Vec::new();
    let mut zero_gt_categories = Vec::new();
    for result in evals {
        let (category, n_gt, ap50, ap) = result?;
        match (ap50, ap) {
            (Some(ap50), Some(ap)) => {
                let weight = match config.weight_source {
                    WeightSource::InstanceCount => n_gt as f64,
                    WeightSource::Equal => 1.0,
                };
                per_category.push(CategoryEval { category, n_gt, weight, ap50, ap });
            }
            _ => zero_gt_categories.push(category),
        }
    }

    if per_category.is_empty() {
        return Err(EvalError::NoEvaluableGroundTruth);
    }

    let ap50 = per_category.iter().map(|c| c.ap50).sum::<f64>() / per_category.len() as f64;
    let wap50 = weighted_mean(
        &per_category.iter().map(|c| (c.weight, c.ap50)).collect::<Vec<_>>(),
    );
    let ap = per_category.iter().map(|c| c.ap).sum::<f64>() / per_category.len() as f64;

    Ok(EvalReport {
        per_category,
        zero_gt_categories,
        ap50,
        wap50,
        ap,
        federated: federated.is_some(),
        config: config.clone(),
    })
}

/// One retrieved item with its category, as ranked by a search backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedItem {
    pub item: String,
    pub category: String,
}

/// A query category with its ranked retrieval results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectQuery {
    pub category: String,
    pub results: Vec<RankedItem>,
}

/// Mean fraction of top-k results whose category mismatches the query.
pub fn defect_rate(queries: &[DefectQuery], k: usize) -> Result<f64, EvalError> {
    if k < 1 {
        return Err(EvalError::BadCutoff);
    }
    if queries.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    let mut total = 0.0;
    for q in queries {
        if q.results.is_empty() {
            return Err(EvalError::EmptyResultList { query: q.category.clone() });
        }
        let depth = k.min(q.results.len());
        let defects = q.results[..depth].iter().filter(|r| r.category != q.category).count();
        total += defects as f64 / depth as f64;
    }
    Ok(total / queries.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerMetrics {
    pub precision: f64,
    /// Absent when there are no ground-truth triggered images.
    pub recall: Option<f64>,
}

/// Image-level triggering precision and recall.
pub fn trigger_metrics(
    pred: &BTreeSet<String>,
    gt: &BTreeSet<String>,
    universe: &BTreeSet<String>,
) -> Result<TriggerMetrics, EvalError> {
    if let Some(id) = pred.difference(universe).next() {
        return Err(EvalError::OutsideUniverse { side: "predicted", id: id.clone() });
    }
    if let Some(id) = gt.difference(universe).next() {
        return Err(EvalError::OutsideUniverse { side: "ground-truth", id: id.clone() });
    }
    let hits = pred.intersection(gt).count() as f64;
    let precision = if pred.is_empty() { 1.0 } else { hits / pred.len() as f64 };
    let recall = (!gt.is_empty()).then(|| hits / gt.len() as f64);
    Ok(TriggerMetrics { precision, recall })
}

/// Percent reduction from `baseline` to `new`: `100 * (baseline - new) / baseline`.
///
/// Negative values mean `new` grew; callers report those as gains.
pub fn relative_reduction(baseline: f64, new: f64) -> Result<f64, EvalError> {
    if baseline <= 0.0 {
        return Err(EvalError::BadBaseline(baseline));
    }
    Ok(100.0 * (baseline - new) / baseline)
}
