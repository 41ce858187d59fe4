//! Crowd annotation micro-task orchestration.
//!
//! Each image runs a deterministic state machine: category discovery until
//! three consecutive skips, marker verification, per-category instance
//! marking with coverage and correctness checks, then box drawing with
//! verification and bounded retries. Verification steps fan out to
//! `overlap_k` judges and join on a majority vote; negative-set collection
//! requires unanimity.

mod ledger;
mod simulate;

pub use ledger::{accounting_report, AccountingReport, Baseline, Ledger, LedgerEntry, LedgerError};
pub use simulate::{
    collect_negatives_simulated, recovery_metrics, simulate, CostModel, JudgeModel,
    SimulationOutcome,
};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("submitted task {got:?} does not match the pending task {expected:?}")]
    TaskMismatch { expected: String, got: String },
    #[error("no task is pending; the job is done")]
    NoTaskPending,
    #[error("{kind} takes {expected} response(s), got {got}")]
    ResponseCount { kind: TaskKind, expected: usize, got: usize },
    #[error("verdict shape does not fit {kind}")]
    VerdictMismatch { kind: TaskKind },
    #[error("marker flag vector must cover {expected} markers, got {got}")]
    MarkerFlagCount { expected: usize, got: usize },
    #[error("overlap must be odd and at least 1, got {0}")]
    BadOverlap(usize),
    #[error("rate {0} outside [0, 1]")]
    BadRate(f64),
    #[error("image job for {image_id:?} exceeded the task budget; configuration does not terminate")]
    Runaway { image_id: String },
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

/// Tuning knobs of the micro-task chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Judges per verification micro-task; odd to avoid vote ties.
    pub overlap_k: usize,
    /// Box drawing attempts per marker before the marker is dropped.
    pub max_attempts: u32,
    /// Instance-marking rounds per category when coverage checks fail.
    pub marking_rounds: u32,
    /// Salience floor: the smaller box dimension required for an object to
    /// be worth annotating, in pixels.
    pub min_dimension: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { overlap_k: 3, max_attempts: 3, marking_rounds: 3, min_dimension: 55.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    CategoryDiscovery,
    MarkerVerification,
    InstanceMarking,
    CoverageVerification,
    MarkerCorrectnessVerification,
    BoxDrawing,
    BoxVerification,
    NegativeSetSelection,
}

impl TaskKind {
    /// Verification kinds fan out to `overlap_k` judges; generative kinds
    /// take a single response.
    pub fn responses_required(&self, overlap_k: usize) -> usize {
        match self {
            TaskKind::CategoryDiscovery | TaskKind::InstanceMarking | TaskKind::BoxDrawing => 1,
            TaskKind::MarkerVerification
            | TaskKind::CoverageVerification
            | TaskKind::MarkerCorrectnessVerification
            | TaskKind::BoxVerification
            | TaskKind::NegativeSetSelection => overlap_k,
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "CategoryDiscovery" => Ok(TaskKind::CategoryDiscovery),
            "MarkerVerification" => Ok(TaskKind::MarkerVerification),
            "InstanceMarking" => Ok(TaskKind::InstanceMarking),
            "CoverageVerification" => Ok(TaskKind::CoverageVerification),
            "MarkerCorrectnessVerification" => Ok(TaskKind::MarkerCorrectnessVerification),
            "BoxDrawing" => Ok(TaskKind::BoxDrawing),
            "BoxVerification" => Ok(TaskKind::BoxVerification),
            "NegativeSetSelection" => Ok(TaskKind::NegativeSetSelection),
            other => Err(format!("unknown task kind {other:?}")),
        }
    }
}

/// A point marker on an object instance. `dimension` is the implied smaller
/// dimension of the marked object in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub x: f64,
    pub y: f64,
    pub dimension: f64,
}

impl Marker {
    fn same_spot(&self, other: &Marker) -> bool {
        self.x.to_bits() == other.x.to_bits() && self.y.to_bits() == other.y.to_bits()
    }
}

/// What the judge is shown and asked, per task kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TaskPayload {
    /// Discover one new salient category; previously marked ones are shown.
    Discovery { known_categories: Vec<String> },
    /// Is this marker a correct instance of the category?
    MarkerCheck { category: String, marker: Marker },
    /// Mark every remaining instance of the category.
    Marking { category: String, existing: Vec<Marker> },
    /// Are all instances of the category marked?
    Coverage { category: String, markers: Vec<Marker> },
    /// Which of these markers are correct?
    MarkerCorrectness { category: String, markers: Vec<Marker> },
    /// Draw a box for this marker.
    Draw { category: String, marker: Marker },
    /// Does this box fit the marked object?
    BoxCheck { category: String, marker: Marker, bbox: BBox },
    /// Does the image contain no instance of the category?
    NegativeCheck { category: String },
}

/// One unit of crowd work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroTask {
    pub task_id: String,
    pub image_id: String,
    pub kind: TaskKind,
    pub payload: TaskPayload,
    pub attempt: u32,
}

/// A judge's answer to a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Verdict {
    /// Discovery: nothing new to mark.
    Skip,
    /// Discovery: a new category with its first marker.
    Mark { category: String, marker: Marker },
    /// Instance marking: additional markers beyond the ones shown.
    Markers { added: Vec<Marker> },
    /// Yes/no verification vote. For negative checks, `true` means absent.
    Vote { yes: bool },
    /// Per-marker correctness flags, parallel to the payload markers.
    MarkerFlags { correct: Vec<bool> },
    /// A drawn bounding box.
    Box { bbox: BBox },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeResponse {
    pub task_id: String,
    pub judge_id: String,
    pub verdict: Verdict,
    pub latency_s: f64,
    pub cost: f64,
}

/// Public view of an image job's lifecycle stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Discovery,
    MarkerVerify,
    Marking,
    BoxDraw,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VerifyStatus {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
struct DiscoveredCategory {
    category: String,
    marker: Marker,
    status: VerifyStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MarkStage {
    Collect,
    Coverage,
    Correctness,
}

#[derive(Debug, Clone, PartialEq)]
struct CategoryMarking {
    category: String,
    markers: Vec<Marker>,
}

#[derive(Debug, Clone, PartialEq)]
enum BoxStatus {
    NeedDraw,
    NeedVerify(BBox),
    Accepted(BBox),
    Dropped,
}

#[derive(Debug, Clone, PartialEq)]
struct BoxSlot {
    category: String,
    marker: Marker,
    attempt: u32,
    status: BoxStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Discovery,
    MarkerVerify { cursor: usize },
    Marking { cursor: usize, round: u32, stage: MarkStage },
    BoxDraw { cursor: usize },
    Done,
}

/// Per-image annotation job. `next_task` is a pure function of the state;
/// `submit` consumes the job and returns the advanced one.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageJob {
    pub image_id: String,
    pub config: PipelineConfig,
    state: State,
    consecutive_skips: u32,
    discovery_rounds: u32,
    task_seq: u64,
    discovered: Vec<DiscoveredCategory>,
    marking: Vec<CategoryMarking>,
    box_queue: Vec<BoxSlot>,
    /// Notable events: dropped markers, rejected categories, exhausted rounds.
    pub events: Vec<String>,
}

fn majority(votes: &[bool]) -> bool {
    votes.iter().filter(|&&v| v).count() * 2 > votes.len()
}

impl ImageJob {
    pub fn new(image_id: impl Into<String>, config: PipelineConfig) -> Self {
        Self {
            image_id: image_id.into(),
            config,
            state: State::Discovery,
            consecutive_skips: 0,
            discovery_rounds: 0,
            task_seq: 0,
            discovered: Vec::new(),
            marking: Vec::new(),
            box_queue: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn phase(&self) -> Phase {
        match self.state {
            State::Discovery => Phase::Discovery,
            State::MarkerVerify { .. } => Phase::MarkerVerify,
            State::Marking { .. } => Phase::Marking,
            State::BoxDraw { .. } => Phase::BoxDraw,
            State::Done => Phase::Done,
        }
    }

    pub fn is_done(&self) -> bool {
        self.state == State::Done
    }

    pub fn consecutive_skips(&self) -> u32 {
        self.consecutive_skips
    }

    /// Categories that survived marker verification.
    pub fn verified_categories(&self) -> Vec<&str> {
        self.discovered
            .iter()
            .filter(|d| d.status == VerifyStatus::Accepted)
            .map(|d| d.category.as_str())
            .collect()
    }

    /// Final accepted boxes with their categories.
    pub fn accepted_boxes(&self) -> Vec<(&str, BBox)> {
        self.box_queue
            .iter()
            .filter_map(|slot| match &slot.status {
                BoxStatus::Accepted(b) => Some((slot.category.as_str(), *b)),
                _ => None,
            })
            .collect()
    }

    fn task(&self, kind: TaskKind, payload: TaskPayload, attempt: u32) -> MicroTask {
        MicroTask {
            task_id: format!("{}:{}", self.image_id, self.task_seq + 1),
            image_id: self.image_id.clone(),
            kind,
            payload,
            attempt,
        }
    }

    /// The pending micro-task, or `None` when the job is done.
    pub fn next_task(&self) -> Option<MicroTask> {
        match &self.state {
            State::Discovery => Some(self.task(
                TaskKind::CategoryDiscovery,
                TaskPayload::Discovery {
                    known_categories: self.discovered.iter().map(|d| d.category.clone()).collect(),
                },
                self.discovery_rounds + 1,
            )),
            State::MarkerVerify { cursor } => {
                let d = &self.discovered[*cursor];
                Some(self.task(
                    TaskKind::MarkerVerification,
                    TaskPayload::MarkerCheck { category: d.category.clone(), marker: d.marker },
                    1,
                ))
            }
            State::Marking { cursor, round, stage } => {
                let cm = &self.marking[*cursor];
                let (kind, payload, attempt) = match stage {
                    MarkStage::Collect => (
                        TaskKind::InstanceMarking,
                        TaskPayload::Marking {
                            category: cm.category.clone(),
                            existing: cm.markers.clone(),
                        },
                        *round,
                    ),
                    MarkStage::Coverage => (
                        TaskKind::CoverageVerification,
                        TaskPayload::Coverage {
                            category: cm.category.clone(),
                            markers: cm.markers.clone(),
                        },
                        *round,
                    ),
                    MarkStage::Correctness => (
                        TaskKind::MarkerCorrectnessVerification,
                        TaskPayload::MarkerCorrectness {
                            category: cm.category.clone(),
                            markers: cm.markers.clone(),
                        },
                        1,
                    ),
                };
                Some(self.task(kind, payload, attempt))
            }
            State::BoxDraw { cursor } => {
                let slot = &self.box_queue[*cursor];
                match &slot.status {
                    BoxStatus::NeedDraw => Some(self.task(
                        TaskKind::BoxDrawing,
                        TaskPayload::Draw { category: slot.category.clone(), marker: slot.marker },
                        slot.attempt,
                    )),
                    BoxStatus::NeedVerify(bbox) => Some(self.task(
                        TaskKind::BoxVerification,
                        TaskPayload::BoxCheck {
                            category: slot.category.clone(),
                            marker: slot.marker,
                            bbox: *bbox,
                        },
                        slot.attempt,
                    )),
                    _ => unreachable!("cursor always rests on an unresolved slot"),
                }
            }
            State::Done => None,
        }
    }

    /// Apply judge responses to the pending task.
    ///
    /// Verification kinds require exactly `overlap_k` responses and resolve
    /// by majority; generative kinds take one. All costs and latencies are
    /// appended to the ledger (a fan-out task costs the sum and takes the
    /// slowest judge's latency).
    pub fn submit(
        mut self,
        task: &MicroTask,
        responses: &[JudgeResponse],
        ledger: &mut Ledger,
    ) -> Result<ImageJob, PipelineError> {
        let expected = self.next_task().ok_or(PipelineError::NoTaskPending)?;
        if task.task_id != expected.task_id || task.kind != expected.kind {
            return Err(PipelineError::TaskMismatch {
                expected: expected.task_id,
                got: task.task_id.clone(),
            });
        }
        let required = task.kind.responses_required(self.config.overlap_k);
        if responses.len() != required {
            return Err(PipelineError::ResponseCount {
                kind: task.kind,
                expected: required,
                got: responses.len(),
            });
        }

        let cost: f64 = responses.iter().map(|r| r.cost).sum();
        let latency: f64 = responses.iter().map(|r| r.latency_s).fold(0.0, f64::max);
        ledger.record(&task.task_id, task.kind, cost, latency);
        self.task_seq += 1;

        match task.kind {
            TaskKind::CategoryDiscovery => self.apply_discovery(task, &responses[0])?,
            TaskKind::MarkerVerification => self.apply_marker_verification(task, responses)?,
            TaskKind::InstanceMarking => self.apply_instance_marking(task, &responses[0])?,
            TaskKind::CoverageVerification => self.apply_coverage(task, responses)?,
            TaskKind::MarkerCorrectnessVerification => self.apply_correctness(task, responses)?,
            TaskKind::BoxDrawing => self.apply_box_drawing(task, &responses[0])?,
            TaskKind::BoxVerification => self.apply_box_verification(task, responses)?,
            TaskKind::NegativeSetSelection => {
                return Err(PipelineError::TaskMismatch {
                    expected: expected.task_id,
                    got: task.task_id.clone(),
                })
            }
        }
        self.normalize();
        Ok(self)
    }

    fn vote(task: &MicroTask, responses: &[JudgeResponse]) -> Result<bool, PipelineError> {
        let mut votes = Vec::with_capacity(responses.len());
        for r in responses {
            match &r.verdict {
                Verdict::Vote { yes } => votes.push(*yes),
                _ => return Err(PipelineError::VerdictMismatch { kind: task.kind }),
            }
        }
        Ok(majority(&votes))
    }

    fn apply_discovery(&mut self, task: &MicroTask, response: &JudgeResponse) -> Result<(), PipelineError> {
        self.discovery_rounds += 1;
        match &response.verdict {
            Verdict::Skip => self.consecutive_skips += 1,
            Verdict::Mark { category, marker } => {
                let duplicate = self.discovered.iter().any(|d| &d.category == category);
                if duplicate {
                    self.events.push(format!("discovery re-marked known category {category:?}"));
                    self.consecutive_skips += 1;
                } else if marker.dimension < self.config.min_dimension {
                    self.events.push(format!(
                        "discovery marker for {category:?} below the {} px salience floor",
                        self.config.min_dimension
                    ));
                    self.consecutive_skips += 1;
                } else {
                    self.discovered.push(DiscoveredCategory {
                        category: category.clone(),
                        marker: *marker,
                        status: VerifyStatus::Pending,
                    });
                    self.consecutive_skips = 0;
                }
            }
            _ => return Err(PipelineError::VerdictMismatch { kind: task.kind }),
        }
        if self.consecutive_skips >= 3 {
            self.state = State::MarkerVerify { cursor: 0 };
        }
        Ok(())
    }

    fn apply_marker_verification(
        &mut self,
        task: &MicroTask,
        responses: &[JudgeResponse],
    ) -> Result<(), PipelineError> {
        let State::MarkerVerify { cursor } = self.state else { unreachable!() };
        let accepted = Self::vote(task, responses)?;
        let d = &mut self.discovered[cursor];
        d.status = if accepted { VerifyStatus::Accepted } else { VerifyStatus::Rejected };
        if !accepted {
            self.events
                .push(format!("marker for {:?} rejected at verification", d.category));
        }
        self.state = State::MarkerVerify { cursor: cursor + 1 };
        Ok(())
    }

    fn apply_instance_marking(&mut self, task: &MicroTask, response: &JudgeResponse) -> Result<(), PipelineError> {
        let State::Marking { cursor, round, .. } = self.state else { unreachable!() };
        let Verdict::Markers { added } = &response.verdict else {
            return Err(PipelineError::VerdictMismatch { kind: task.kind });
        };
        let cm = &mut self.marking[cursor];
        for marker in added {
            if marker.dimension < self.config.min_dimension {
                self.events.push(format!(
                    "marker for {:?} below the salience floor, skipped",
                    cm.category
                ));
                continue;
            }
            if cm.markers.iter().any(|m| m.same_spot(marker)) {
                continue;
            }
            cm.markers.push(*marker);
        }
        self.state = State::Marking { cursor, round, stage: MarkStage::Coverage };
        Ok(())
    }

    fn apply_coverage(&mut self, task: &MicroTask, responses: &[JudgeResponse]) -> Result<(), PipelineError> {
        let State::Marking { cursor, round, .. } = self.state else { unreachable!() };
        let covered = Self::vote(task, responses)?;
        self.state = if covered {
            State::Marking { cursor, round, stage: MarkStage::Correctness }
        } else if round < self.config.marking_rounds {
            State::Marking { cursor, round: round + 1, stage: MarkStage::Collect }
        } else {
            self.events.push(format!(
                "coverage still incomplete for {:?} after {round} rounds",
                self.marking[cursor].category
            ));
            State::Marking { cursor, round, stage: MarkStage::Correctness }
        };
        Ok(())
    }

    fn apply_correctness(&mut self, task: &MicroTask, responses: &[JudgeResponse]) -> Result<(), PipelineError> {
        let State::Marking { cursor, .. } = self.state else { unreachable!() };
        let n = self.marking[cursor].markers.len();
        let mut keep_votes = vec![0usize; n];
        for r in responses {
            let Verdict::MarkerFlags { correct } = &r.verdict else {
                return Err(PipelineError::VerdictMismatch { kind: task.kind });
            };
            if correct.len() != n {
                return Err(PipelineError::MarkerFlagCount { expected: n, got: correct.len() });
            }
            for (i, &ok) in correct.iter().enumerate() {
                if ok {
                    keep_votes[i] += 1;
                }
            }
        }
        let cm = &mut self.marking[cursor];
        let mut kept = Vec::with_capacity(n);
        for (i, marker) in cm.markers.drain(..).enumerate() {
            if keep_votes[i] * 2 > responses.len() {
                kept.push(marker);
            } else {
                self.events
                    .push(format!("marker for {:?} removed as incorrect", cm.category));
            }
        }
        cm.markers = kept;
        self.state = State::Marking { cursor: cursor + 1, round: 1, stage: MarkStage::Collect };
        Ok(())
    }

    fn apply_box_drawing(&mut self, task: &MicroTask, response: &JudgeResponse) -> Result<(), PipelineError> {
        let State::BoxDraw { cursor } = self.state else { unreachable!() };
        let Verdict::Box { bbox } = &response.verdict else {
            return Err(PipelineError::VerdictMismatch { kind: task.kind });
        };
        self.box_queue[cursor].status = BoxStatus::NeedVerify(*bbox);
        Ok(())
    }

    fn apply_box_verification(&mut self, task: &MicroTask, responses: &[JudgeResponse]) -> Result<(), PipelineError> {
        let State::BoxDraw { cursor } = self.state else { unreachable!() };
        let accepted = Self::vote(task, responses)?;
        let slot = &mut self.box_queue[cursor];
        let BoxStatus::NeedVerify(bbox) = slot.status.clone() else { unreachable!() };
        if accepted {
            slot.status = BoxStatus::Accepted(bbox);
            self.state = State::BoxDraw { cursor: cursor + 1 };
        } else if slot.attempt >= self.config.max_attempts {
            slot.status = BoxStatus::Dropped;
            self.events.push(format!(
                "marker for {:?} dropped after {} rejected box attempts",
                slot.category, slot.attempt
            ));
            self.state = State::BoxDraw { cursor: cursor + 1 };
        } else {
            slot.attempt += 1;
            slot.status = BoxStatus::NeedDraw;
        }
        Ok(())
    }

    /// Skip over exhausted phases so `next_task` always rests on real work.
    fn normalize(&mut self) {
        loop {
            match self.state {
                State::MarkerVerify { cursor } if cursor >= self.discovered.len() => {
                    self.marking = self
                        .discovered
                        .iter()
                        .filter(|d| d.status == VerifyStatus::Accepted)
                        .map(|d| CategoryMarking {
                            category: d.category.clone(),
                            markers: vec![d.marker],
                        })
                        .collect();
                    self.state = if self.marking.is_empty() {
                        State::Done
                    } else {
                        State::Marking { cursor: 0, round: 1, stage: MarkStage::Collect }
                    };
                }
                State::Marking { cursor, .. } if cursor >= self.marking.len() => {
                    self.box_queue = self
                        .marking
                        .iter()
                        .flat_map(|cm| {
                            cm.markers.iter().map(|&marker| BoxSlot {
                                category: cm.category.clone(),
                                marker,
                                attempt: 1,
                                status: BoxStatus::NeedDraw,
                            })
                        })
                        .collect();
                    self.state = State::BoxDraw { cursor: 0 };
                }
                State::BoxDraw { cursor } => {
                    if cursor >= self.box_queue.len() {
                        self.state = State::Done;
                        continue;
                    }
                    match self.box_queue[cursor].status {
                        BoxStatus::Accepted(_) | BoxStatus::Dropped => {
                            self.state = State::BoxDraw { cursor: cursor + 1 };
                        }
                        _ => break,
                    }
                }
                _ => break,
            }
        }
    }
}

/// A pool of judges answering micro-tasks; implemented by crowd-platform
/// adapters and by the simulator.
pub trait JudgePanel {
    fn respond(&mut self, task: &MicroTask, n: usize) -> Vec<JudgeResponse>;
}

/// Collect the images of `candidates` that `overlap_k` judges unanimously
/// verify as free of `category`.
///
/// Unanimity rather than majority: a single missed instance poisons
/// federated evaluation, so any "present" vote excludes the image.
pub fn collect_negatives(
    category: &str,
    candidates: &[String],
    overlap_k: usize,
    judges: &mut dyn JudgePanel,
    ledger: &mut Ledger,
) -> Result<BTreeSet<String>, PipelineError> {
    if overlap_k == 0 || overlap_k.is_multiple_of(2) {
        return Err(PipelineError::BadOverlap(overlap_k));
    }
    let mut negatives = BTreeSet::new();
    for image_id in candidates {
        let task = MicroTask {
            task_id: format!("neg:{category}:{image_id}"),
            image_id: image_id.clone(),
            kind: TaskKind::NegativeSetSelection,
            payload: TaskPayload::NegativeCheck { category: category.to_string() },
            attempt: 1,
        };
        let responses = judges.respond(&task, overlap_k);
        if responses.len() != overlap_k {
            return Err(PipelineError::ResponseCount {
                kind: TaskKind::NegativeSetSelection,
                expected: overlap_k,
                got: responses.len(),
            });
        }
        let cost: f64 = responses.iter().map(|r| r.cost).sum();
        let latency: f64 = responses.iter().map(|r| r.latency_s).fold(0.0, f64::max);
        ledger.record(&task.task_id, task.kind, cost, latency);
        let mut absent = true;
        for r in &responses {
            match &r.verdict {
                Verdict::Vote { yes } => absent &= *yes,
                _ => {
                    return Err(PipelineError::VerdictMismatch {
                        kind: TaskKind::NegativeSetSelection,
                    })
                }
            }
        }
        if absent {
            negatives.insert(image_id.clone());
        }
    }
    Ok(negatives)
}
