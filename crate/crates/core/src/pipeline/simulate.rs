//! Simulated-judge harness: runs every image job to completion against
//! judges that answer from an oracle dataset perturbed by configured error
//! rates. Fixed seeds reproduce runs bit for bit.

use std::collections::{BTreeSet, HashMap};

use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};

use crate::dataset::{Annotation, Dataset};
use crate::detection::Detection;
use crate::evaluation::{match_category, MatchLabel};
use crate::geometry::BBox;

use super::{
    ImageJob, JudgePanel, JudgeResponse, Ledger, Marker, MicroTask, PipelineConfig, PipelineError,
    TaskKind, TaskPayload, Verdict,
};

/// Error model for simulated judges.
///
/// `miss_rate` is the chance of overlooking something real (skipping a
/// category, missing an instance, voting down a correct item);
/// `false_mark_rate` is the chance of asserting something wrong (marking an
/// absent category, approving a bad box). Boxes are drawn with up to
/// `box_noise_px` of translation per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JudgeModel {
    pub miss_rate: f64,
    pub false_mark_rate: f64,
    pub box_noise_px: f64,
    pub seed: u64,
}

impl Default for JudgeModel {
    fn default() -> Self {
        Self { miss_rate: 0.0, false_mark_rate: 0.0, box_noise_px: 0.0, seed: 0 }
    }
}

/// Per-response cost and latency for one task kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskEconomics {
    pub cost: f64,
    pub latency_s: f64,
}

/// Per-kind cost/latency table for simulated judging.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    rates: HashMap<TaskKind, TaskEconomics>,
}

impl Default for CostModel {
    fn default() -> Self {
        let mut rates = HashMap::new();
        let mut set = |kind, cost, latency_s| {
            rates.insert(kind, TaskEconomics { cost, latency_s });
        };
        set(TaskKind::CategoryDiscovery, 0.04, 25.0);
        set(TaskKind::MarkerVerification, 0.01, 5.0);
        set(TaskKind::InstanceMarking, 0.05, 35.0);
        set(TaskKind::CoverageVerification, 0.01, 6.0);
        set(TaskKind::MarkerCorrectnessVerification, 0.01, 6.0);
        set(TaskKind::BoxDrawing, 0.06, 30.0);
        set(TaskKind::BoxVerification, 0.01, 7.0);
        set(TaskKind::NegativeSetSelection, 0.01, 8.0);
        Self { rates }
    }
}

impl CostModel {
    pub fn get(&self, kind: TaskKind) -> TaskEconomics {
        self.rates
            .get(&kind)
            .copied()
            .unwrap_or(TaskEconomics { cost: 0.0, latency_s: 0.0 })
    }

    pub fn set(&mut self, kind: TaskKind, cost: f64, latency_s: f64) {
        self.rates.insert(kind, TaskEconomics { cost, latency_s });
    }
}

pub struct SimulationOutcome {
    pub recovered: Dataset,
    pub ledger: Ledger,
}

fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn center(b: &BBox) -> (f64, f64) {
    (b.x + b.w / 2.0, b.y + b.h / 2.0)
}

fn marker_at(a: &Annotation) -> Marker {
    let (x, y) = center(&a.bbox);
    Marker { x, y, dimension: a.bbox.min_dimension() }
}

/// Judges for one image, answering from the oracle annotations.
struct SimJudges<'a> {
    image_w: f64,
    image_h: f64,
    /// Salient oracle annotations on this image (at or above the floor).
    salient: Vec<&'a Annotation>,
    /// All oracle annotations on this image, any size.
    all: Vec<&'a Annotation>,
    /// Categories in the whole oracle but absent from this image.
    foreign_categories: Vec<&'a str>,
    model: &'a JudgeModel,
    costs: &'a CostModel,
    rng: ChaCha8Rng,
    judge_seq: u64,
}

impl<'a> SimJudges<'a> {
    fn err(&mut self, rate: f64) -> bool {
        self.rng.random::<f64>() < rate
    }

    fn salient_of(&self, category: &str) -> Vec<&'a Annotation> {
        self.salient.iter().copied().filter(|a| a.category == category).collect()
    }

    fn instance_at(&self, category: &str, marker: &Marker) -> Option<&'a Annotation> {
        self.salient_of(category).into_iter().find(|a| {
            let (x, y) = center(&a.bbox);
            x.to_bits() == marker.x.to_bits() && y.to_bits() == marker.y.to_bits()
        })
    }

    fn bogus_marker(&mut self) -> Marker {
        // a spot guaranteed not to be any instance center, sized to pass the
        // salience floor so verification has to catch it
        let mut x = self.image_w * 0.99 + self.rng.random::<f64>() * 0.001;
        let y = self.image_h * 0.01;
        while self.all.iter().any(|a| center(&a.bbox).0.to_bits() == x.to_bits()) {
            x += 0.001;
        }
        Marker { x, y, dimension: 64.0 }
    }

    fn vote_on(&mut self, truth: bool) -> Verdict {
        let yes = if truth { !self.err(self.model.miss_rate) } else { self.err(self.model.false_mark_rate) };
        Verdict::Vote { yes }
    }

    fn answer(&mut self, task: &MicroTask) -> Verdict {
        match &task.payload {
            TaskPayload::Discovery { known_categories } => {
                let known: BTreeSet<&str> =
                    known_categories.iter().map(String::as_str).collect();
                if self.err(self.model.false_mark_rate) {
                    let pool: Vec<&str> = self
                        .foreign_categories
                        .iter()
                        .copied()
                        .filter(|c| !known.contains(c))
                        .collect();
                    if !pool.is_empty() {
                        let pick = self.rng.random_range(0..pool.len());
                        let marker = self.bogus_marker();
                        return Verdict::Mark { category: pool[pick].to_string(), marker };
                    }
                }
                let mut undiscovered: Vec<&'a Annotation> = Vec::new();
                let mut seen = BTreeSet::new();
                for a in &self.salient {
                    if !known.contains(a.category.as_str()) && seen.insert(a.category.as_str()) {
                        undiscovered.push(a);
                    }
                }
                for a in undiscovered {
                    if !self.err(self.model.miss_rate) {
                        return Verdict::Mark {
                            category: a.category.clone(),
                            marker: marker_at(a),
                        };
                    }
                }
                Verdict::Skip
            }
            TaskPayload::MarkerCheck { category, marker } => {
                let truth = self.instance_at(category, marker).is_some();
                self.vote_on(truth)
            }
            TaskPayload::Marking { category, existing } => {
                let mut added = Vec::new();
                for a in self.salient_of(category) {
                    let m = marker_at(a);
                    let covered = existing.iter().chain(added.iter()).any(|e| e.same_spot(&m));
                    if !covered && !self.err(self.model.miss_rate) {
                        added.push(m);
                    }
                }
                if self.err(self.model.false_mark_rate) {
                    added.push(self.bogus_marker());
                }
                Verdict::Markers { added }
            }
            TaskPayload::Coverage { category, markers } => {
                let truth = self.salient_of(category).iter().all(|a| {
                    let m = marker_at(a);
                    markers.iter().any(|e| e.same_spot(&m))
                });
                self.vote_on(truth)
            }
            TaskPayload::MarkerCorrectness { category, markers } => {
                let correct = markers
                    .iter()
                    .map(|m| {
                        let truth = self.instance_at(category, m).is_some();
                        if truth {
                            !self.err(self.model.miss_rate)
                        } else {
                            self.err(self.model.false_mark_rate)
                        }
                    })
                    .collect();
                Verdict::MarkerFlags { correct }
            }
            TaskPayload::Draw { category, marker } => {
                let bbox = match self.instance_at(category, marker) {
                    Some(a) => {
                        let noise = self.model.box_noise_px;
                        let (dx, dy) = if noise > 0.0 {
                            (
                                self.rng.random_range(-noise..=noise),
                                self.rng.random_range(-noise..=noise),
                            )
                        } else {
                            (0.0, 0.0)
                        };
                        let shifted = BBox {
                            x: a.bbox.x + dx,
                            y: a.bbox.y + dy,
                            w: a.bbox.w,
                            h: a.bbox.h,
                        };
                        shifted.clamp_to(self.image_w, self.image_h).unwrap_or(a.bbox)
                    }
                    None => {
                        // nothing there; draw a plausible box around the marker
                        let side = marker.dimension.max(1.0);
                        BBox {
                            x: (marker.x - side / 2.0).max(0.0),
                            y: (marker.y - side / 2.0).max(0.0),
                            w: side,
                            h: side,
                        }
                        .clamp_to(self.image_w, self.image_h)
                        .unwrap_or(BBox { x: 0.0, y: 0.0, w: 1.0, h: 1.0 })
                    }
                };
                Verdict::Box { bbox }
            }
            TaskPayload::BoxCheck { category, bbox, .. } => {
                let truth = self
                    .salient_of(category)
                    .iter()
                    .any(|a| crate::geometry::iou(&a.bbox, bbox) >= 0.5);
                self.vote_on(truth)
            }
            TaskPayload::NegativeCheck { category } => {
                let present = self.all.iter().any(|a| &a.category == category);
                self.vote_on(!present)
            }
        }
    }
}

impl JudgePanel for SimJudges<'_> {
    fn respond(&mut self, task: &MicroTask, n: usize) -> Vec<JudgeResponse> {
        let economics = self.costs.get(task.kind);
        (0..n)
            .map(|_| {
                self.judge_seq += 1;
                JudgeResponse {
                    task_id: task.task_id.clone(),
                    judge_id: format!("sim{}", self.judge_seq),
                    verdict: self.answer(task),
                    latency_s: economics.latency_s,
                    cost: economics.cost,
                }
            })
            .collect()
    }
}

/// Run the full annotation pipeline for every oracle image against simulated
/// judges, returning the recovered dataset and the complete ledger.
pub fn simulate(
    oracle: &Dataset,
    judges: &JudgeModel,
    pipeline: &PipelineConfig,
    costs: &CostModel,
) -> Result<SimulationOutcome, PipelineError> {
    for rate in [judges.miss_rate, judges.false_mark_rate] {
        if !(0.0..=1.0).contains(&rate) {
            return Err(PipelineError::BadRate(rate));
        }
    }

    let mut by_image: HashMap<&str, Vec<&Annotation>> = HashMap::new();
    for a in oracle.annotations() {
        by_image.entry(a.image_id.as_str()).or_default().push(a);
    }
    let global_categories: BTreeSet<&str> =
        oracle.annotations().iter().map(|a| a.category.as_str()).collect();

    let mut ledger = Ledger::new();
    let mut annotations: Vec<Annotation> = Vec::new();

    for (index, image) in oracle.images().iter().enumerate() {
        let all: Vec<&Annotation> = by_image.get(image.id.as_str()).cloned().unwrap_or_default();
        let salient: Vec<&Annotation> = all
            .iter()
            .copied()
            .filter(|a| a.bbox.min_dimension() >= pipeline.min_dimension)
            .collect();
        let on_image: BTreeSet<&str> = all.iter().map(|a| a.category.as_str()).collect();
        let mut sim = SimJudges {
            image_w: image.width as f64,
            image_h: image.height as f64,
            salient,
            all,
            foreign_categories: global_categories.difference(&on_image).copied().collect(),
            model: judges,
            costs,
            rng: ChaCha8Rng::seed_from_u64(mix(judges.seed, index as u64 + 1)),
            judge_seq: 0,
        };

        let mut job = ImageJob::new(&image.id, pipeline.clone());
        // generous bound; every transition strictly advances the job
        let budget = 500 + 200 * (sim.all.len() + 1) * pipeline.max_attempts as usize;
        let mut steps = 0usize;
        while let Some(task) = job.next_task() {
            steps += 1;
            if steps > budget {
                return Err(PipelineError::Runaway { image_id: image.id.clone() });
            }
            let n = task.kind.responses_required(pipeline.overlap_k);
            let responses = sim.respond(&task, n);
            job = job.submit(&task, &responses, &mut ledger)?;
        }
        ledger.record_image(job.verified_categories().len() as u64, job.accepted_boxes().len() as u64);
        for (category, bbox) in job.accepted_boxes() {
            annotations.push(Annotation {
                image_id: image.id.clone(),
                category: category.to_string(),
                bbox,
            });
        }
    }

    let recovered = Dataset::new(
        format!("{}-recovered", oracle.name),
        oracle.taxonomy_version.clone(),
        oracle.images().to_vec(),
        annotations,
        None,
    )?;
    Ok(SimulationOutcome { recovered, ledger })
}

/// Run negative-set collection for one category over `candidates` with
/// simulated judges answering from the oracle.
///
/// An image counts as negative only when all `pipeline.overlap_k` judges
/// vote the category absent; instances of any size make an image positive.
pub fn collect_negatives_simulated(
    oracle: &Dataset,
    category: &str,
    candidates: &[String],
    judges: &JudgeModel,
    pipeline: &PipelineConfig,
    costs: &CostModel,
    ledger: &mut Ledger,
) -> Result<std::collections::BTreeSet<String>, PipelineError> {
    let mut by_image: HashMap<&str, Vec<&Annotation>> = HashMap::new();
    for a in oracle.annotations() {
        by_image.entry(a.image_id.as_str()).or_default().push(a);
    }
    let global_categories: BTreeSet<&str> =
        oracle.annotations().iter().map(|a| a.category.as_str()).collect();

    struct PerImagePanel<'a> {
        oracle: &'a Dataset,
        by_image: HashMap<&'a str, Vec<&'a Annotation>>,
        global: BTreeSet<&'a str>,
        judges: &'a JudgeModel,
        pipeline: &'a PipelineConfig,
        costs: &'a CostModel,
    }

    impl JudgePanel for PerImagePanel<'_> {
        fn respond(&mut self, task: &MicroTask, n: usize) -> Vec<JudgeResponse> {
            let image = self
                .oracle
                .image(&task.image_id)
                .expect("candidate image exists in the oracle");
            let all = self.by_image.get(task.image_id.as_str()).cloned().unwrap_or_default();
            let salient: Vec<&Annotation> = all
                .iter()
                .copied()
                .filter(|a| a.bbox.min_dimension() >= self.pipeline.min_dimension)
                .collect();
            let on_image: BTreeSet<&str> = all.iter().map(|a| a.category.as_str()).collect();
            let mut sim = SimJudges {
                image_w: image.width as f64,
                image_h: image.height as f64,
                salient,
                all,
                foreign_categories: self.global.difference(&on_image).copied().collect(),
                model: self.judges,
                costs: self.costs,
                rng: ChaCha8Rng::seed_from_u64(mix(
                    self.judges.seed,
                    hash_image_id(&task.image_id),
                )),
                judge_seq: 0,
            };
            sim.respond(task, n)
        }
    }

    let mut panel = PerImagePanel {
        oracle,
        by_image,
        global: global_categories,
        judges,
        pipeline,
        costs,
    };
    super::collect_negatives(category, candidates, pipeline.overlap_k, &mut panel, ledger)
}

fn hash_image_id(id: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Micro-averaged precision/recall of recovered annotations against the
/// oracle at IoU 0.5, counting only oracle objects at or above the floor.
pub fn recovery_metrics(oracle: &Dataset, recovered: &Dataset, min_dimension: f64) -> (f64, f64) {
    let mut categories: BTreeSet<&str> =
        oracle.annotations().iter().map(|a| a.category.as_str()).collect();
    categories.extend(recovered.annotations().iter().map(|a| a.category.as_str()));

    let mut tp = 0usize;
    let mut n_rec = 0usize;
    let mut n_gt = 0usize;
    for cat in categories {
        let gts: Vec<Annotation> = oracle
            .annotations()
            .iter()
            .filter(|a| a.category == cat && a.bbox.min_dimension() >= min_dimension)
            .cloned()
            .collect();
        let dets: Vec<Detection> = recovered
            .annotations()
            .iter()
            .filter(|a| a.category == cat)
            .map(|a| Detection::new(a.image_id.clone(), a.category.clone(), a.bbox, 1.0))
            .collect();
        n_gt += gts.len();
        n_rec += dets.len();
        let m = match_category(&dets, &gts, None, 0.5).expect("single category");
        tp += m.labels.iter().filter(|l| matches!(l, MatchLabel::Tp { .. })).count();
    }
    let precision = if n_rec == 0 { 1.0 } else { tp as f64 / n_rec as f64 };
    let recall = if n_gt == 0 { 1.0 } else { tp as f64 / n_gt as f64 };
    (precision, recall)
}
