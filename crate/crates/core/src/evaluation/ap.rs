//! Average precision from a match result.

use serde::{Deserialize, Serialize};

use super::matching::{MatchLabel, MatchResult};

/// How the area under the precision-recall curve is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApMode {
    /// Exact integral of the precision envelope over recall.
    #[default]
    Exact,
    /// Mean envelope precision over the 101 recalls 0.00, 0.01, ..., 1.00.
    Coco101,
}

impl std::fmt::Display for ApMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ApMode::Exact => write!(f, "exact"),
            ApMode::Coco101 => write!(f, "coco101"),
        }
    }
}

/// Precision/recall points in canonical detection order, ignored detections
/// excluded.
fn pr_points(m: &MatchResult) -> (Vec<f64>, Vec<f64>) {
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for label in &m.labels {
        match label {
            MatchLabel::Tp { .. } => tp += 1,
            MatchLabel::Fp => fp += 1,
            MatchLabel::Ignored => continue,
        }
        precisions.push(tp as f64 / (tp + fp) as f64);
        recalls.push(tp as f64 / m.n_gt as f64);
    }
    (precisions, recalls)
}

/// Precision envelope: at each point, the maximum precision at that recall or
/// any higher recall.
fn envelope(precisions: &[f64]) -> Vec<f64> {
    let mut env = precisions.to_vec();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    env
}

/// Average precision of a match result.
///
/// Returns `None` when there are no evaluable ground truths; such categories
/// are excluded from aggregate metrics rather than scored as zero.
pub fn average_precision(m: &MatchResult, mode: ApMode) -> Option<f64> {
    if m.n_gt == 0 {
        return None;
    }
    let (precisions, recalls) = pr_points(m);
    if precisions.is_empty() {
        return Some(0.0);
    }
    let env = envelope(&precisions);
    match mode {
        ApMode::Exact => {
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for (i, &r) in recalls.iter().enumerate() {
                ap += (r - prev_recall) * env[i];
                prev_recall = r;
            }
            Some(ap)
        }
        ApMode::Coco101 => {
            let mut total = 0.0;
            let mut idx = 0usize;
            for step in 0..=100u32 {
                let r = f64::from(step) / 100.0;
                while idx < recalls.len() && recalls[idx] < r {
                    idx += 1;
                }
                if idx < recalls.len() {
                    total += env[idx];
                }
            }
            Some(total / 101.0)
        }
    }
}
