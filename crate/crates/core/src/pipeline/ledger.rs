//! Cost and latency accounting for annotation runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::relative_reduction;

use super::TaskKind;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("ledger line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// One task's cost and latency. Fan-out tasks carry the summed cost of all
/// judge responses and the slowest judge's latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub task_id: String,
    pub kind: TaskKind,
    pub cost: f64,
    pub latency_s: f64,
}

/// Append-only accounting of an annotation run.
///
/// Counters for images, verified categories, and accepted boxes feed the
/// per-image and per-box ratios; aggregates are always recomputed from the
/// stored values, never cached.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
    images: u64,
    categories: u64,
    bboxes: u64,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, task_id: &str, kind: TaskKind, cost: f64, latency_s: f64) {
        self.entries.push(LedgerEntry { task_id: task_id.to_string(), kind, cost, latency_s });
    }

    /// Count one completed image with its verified categories and final boxes.
    pub fn record_image(&mut self, categories: u64, bboxes: u64) {
        self.images += 1;
        self.categories += categories;
        self.bboxes += bboxes;
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn images(&self) -> u64 {
        self.images
    }

    pub fn categories(&self) -> u64 {
        self.categories
    }

    pub fn bboxes(&self) -> u64 {
        self.bboxes
    }

    pub fn total_cost(&self) -> f64 {
        self.entries.iter().map(|e| e.cost).sum()
    }

    pub fn total_latency_s(&self) -> f64 {
        self.entries.iter().map(|e| e.latency_s).sum()
    }

    /// Two-section CSV: per-task rows, a blank line, then `metric,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task_id,kind,cost,latency_s\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{}\n", e.task_id, e.kind, e.cost, e.latency_s));
        }
        out.push('\n');
        out.push_str("metric,value\n");
        out.push_str(&format!("images,{}\n", self.images));
        out.push_str(&format!("categories,{}\n", self.categories));
        out.push_str(&format!("bboxes,{}\n", self.bboxes));
        out.push_str(&format!("total_cost,{}\n", self.total_cost()));
        out.push_str(&format!("total_latency_s,{}\n", self.total_latency_s()));
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, LedgerError> {
        let mut ledger = Ledger::new();
        let mut in_metrics = false;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let malformed = |message: &str| LedgerError::Malformed {
                line: line_no,
                message: message.to_string(),
            };
            if line.is_empty() {
                in_metrics = true;
                continue;
            }
            if line == "task_id,kind,cost,latency_s" || line == "metric,value" {
                continue;
            }
            if in_metrics {
                let (key, value) = line.split_once(',').ok_or_else(|| malformed("expected metric,value"))?;
                match key {
                    "images" => ledger.images = value.parse().map_err(|_| malformed("bad count"))?,
                    "categories" => {
                        ledger.categories = value.parse().map_err(|_| malformed("bad count"))?
                    }
                    "bboxes" => ledger.bboxes = value.parse().map_err(|_| malformed("bad count"))?,
                    // totals are recomputed from entries
                    "total_cost" | "total_latency_s" => {}
                    other => return Err(malformed(&format!("unknown metric {other:?}"))),
                }
            } else {
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != 4 {
                    return Err(malformed("expected task_id,kind,cost,latency_s"));
                }
                let kind: TaskKind = fields[1].parse().map_err(|e: String| malformed(&e))?;
                ledger.entries.push(LedgerEntry {
                    task_id: fields[0].to_string(),
                    kind,
                    cost: fields[2].parse().map_err(|_| malformed("bad cost"))?,
                    latency_s: fields[3].parse().map_err(|_| malformed("bad latency"))?,
                });
            }
        }
        Ok(ledger)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, LedgerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LedgerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv(&text)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), LedgerError> {
        std::fs::write(path.as_ref(), self.to_csv()).map_err(|source| LedgerError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }
}

/// Reference per-box economics to compare a run against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub cost_per_bbox: f64,
    pub time_per_bbox: f64,
}

/// Per-image and per-box economics of a run, with relative reductions
/// against a baseline.
///
/// Per-box fields are absent rather than divided by zero when the run
/// produced no boxes; reductions are positive when the run is cheaper or
/// faster than the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountingReport {
    pub images: u64,
    pub categories_per_img: Option<f64>,
    pub bboxes_per_img: Option<f64>,
    pub cost_per_img: Option<f64>,
    pub cost_per_bbox: Option<f64>,
    pub time_per_img: Option<f64>,
    pub time_per_bbox: Option<f64>,
    pub cost_reduction_pct: Option<f64>,
    pub latency_reduction_pct: Option<f64>,
}

pub fn accounting_report(ledger: &Ledger, baseline: Option<Baseline>) -> AccountingReport {
    let images = ledger.images();
    let per_img = |v: f64| (images > 0).then(|| v / images as f64);
    let per_bbox = |v: f64| (ledger.bboxes() > 0).then(|| v / ledger.bboxes() as f64);

    let cost_per_bbox = per_bbox(ledger.total_cost());
    let time_per_bbox = per_bbox(ledger.total_latency_s());
    let reduction = |base: f64, new: Option<f64>| {
        new.and_then(|n| relative_reduction(base, n).ok())
    };

    AccountingReport {
        images,
        categories_per_img: per_img(ledger.categories() as f64),
        bboxes_per_img: per_img(ledger.bboxes() as f64),
        cost_per_img: per_img(ledger.total_cost()),
        cost_per_bbox,
        time_per_img: per_img(ledger.total_latency_s()),
        time_per_bbox,
        cost_reduction_pct: baseline.and_then(|b| reduction(b.cost_per_bbox, cost_per_bbox)),
        latency_reduction_pct: baseline.and_then(|b| reduction(b.time_per_bbox, time_per_bbox)),
    }
}

impl AccountingReport {
    /// Plain-text rows mirroring the cost/latency comparison table shape.
    pub fn render(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            match v {
                Some(x) => format!("{x:.4}"),
                None => "n/a".to_string(),
            }
        }
        let mut out = String::new();
        out.push_str(&format!("images            {}\n", self.images));
        out.push_str(&format!("categories/img    {}\n", cell(self.categories_per_img)));
        out.push_str(&format!("bboxes/img        {}\n", cell(self.bboxes_per_img)));
        out.push_str(&format!("cost/img          {}\n", cell(self.cost_per_img)));
        out.push_str(&format!("cost/bbox         {}\n", cell(self.cost_per_bbox)));
        out.push_str(&format!("time/img          {}\n", cell(self.time_per_img)));
        out.push_str(&format!("time/bbox         {}\n", cell(self.time_per_bbox)));
        if let Some(r) = self.cost_reduction_pct {
            out.push_str(&format!("cost reduction    {r:.1}%\n"));
        }
        if let Some(r) = self.latency_reduction_pct {
            out.push_str(&format!("latency reduction {r:.1}%\n"));
        }
        out
    }
}
