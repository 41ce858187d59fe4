//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test -p genodkit --test acceptance -- --test-threads=1 --nocapture`
//! to see the per-criterion lines in order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::sync::Arc;
use std::time::Instant;

use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};

use genodkit::fixtures::{category_name, synthetic_eval_fixture, synthetic_taxonomy};
use genodkit::service::{Service, ServiceConfig};
use genodkit_core::dataset::{Annotation, CategorySets, Dataset, FederatedSets, ImageRecord};
use genodkit_core::detection::{Detection, DetectionSet};
use genodkit_core::evaluation::{
    average_precision, evaluate, match_category, relative_reduction, weighted_mean, ApMode,
    EvalConfig, MatchLabel, MatchResult,
};
use genodkit_core::federation::{merge as fed_merge, HeadRegistry, HeadSpec};
use genodkit_core::geometry::BBox;
use genodkit_core::pipeline::{simulate, recovery_metrics, CostModel, JudgeModel, PipelineConfig};
use genodkit_core::postprocess::propagate;
use genodkit_core::sampling::{apply, plan_upsample};
use genodkit_core::taxonomy::{CategoryNode, Taxonomy};

struct Criterion {
    name: &'static str,
    started: Instant,
    failures: Vec<String>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Self { name, started: Instant::now(), failures: Vec::new() }
    }

    fn require(&mut self, condition: bool, detail: impl Display) {
        if !condition {
            self.failures.push(detail.to_string());
        }
    }

    fn require_close(&mut self, actual: f64, expected: f64, tol: f64, what: impl Display) {
        if (actual - expected).abs() > tol {
            self.failures.push(format!("{what}: got {actual}, want {expected} (tol {tol})"));
        }
    }

    fn finish(self) {
        let elapsed = self.started.elapsed().as_secs_f64();
        if self.failures.is_empty() {
            println!("acceptance {}: PASS ({elapsed:.2}s)", self.name);
        } else {
            println!("acceptance {}: FAIL ({} issue(s))", self.name, self.failures.len());
            for f in &self.failures {
                println!("  - {f}");
            }
            panic!("acceptance criterion {} failed", self.name);
        }
    }
}

fn bbox(x: f64, y: f64, w: f64, h: f64) -> BBox {
    BBox::new(x, y, w, h).unwrap()
}

// ---------------------------------------------------------------------------
// 1. weighted-AP aggregation arithmetic

#[test]
fn c01_weighted_ap_arithmetic() {
    let mut c = Criterion::new("01 weighted-ap-arithmetic");
    let started = Instant::now();

    let weighted = weighted_mean(&[(10.0, 0.5), (30.0, 0.9)]);
    c.require_close(weighted, 0.8, 1e-9, "wAP50 with weights {10, 30}");

    let equal = weighted_mean(&[(1.0, 0.5), (1.0, 0.9)]);
    c.require_close(equal, 0.7, 1e-9, "wAP50 with equal weights");
    c.require_close(equal, (0.5 + 0.9) / 2.0, 1e-9, "equal weights reduce to the mean");

    c.require(started.elapsed().as_secs_f64() < 1.0, "runtime exceeded 1s");
    c.finish();
}

// ---------------------------------------------------------------------------
// 2. AP oracle equivalence on random instances

/// Brute-force exact AP: every true positive contributes the best precision
/// over all cut-offs at or past it, scaled by one recall step.
fn ap_exact_oracle(flags: &[bool], n_gt: usize) -> f64 {
    let n = flags.len();
    let precision_at = |j: usize| {
        let tp = flags[..=j].iter().filter(|&&t| t).count();
        tp as f64 / (j + 1) as f64
    };
    let mut total = 0.0;
    for (i, &is_tp) in flags.iter().enumerate() {
        if !is_tp {
            continue;
        }
        let mut best = 0.0f64;
        for j in i..n {
            best = best.max(precision_at(j));
        }
        total += best;
    }
    total / n_gt as f64
}

/// Brute-force 101-point AP: for each recall threshold scan every cut-off.
fn ap_coco101_oracle(flags: &[bool], n_gt: usize) -> f64 {
    let n = flags.len();
    let mut total = 0.0;
    for step in 0..=100u32 {
        let r = f64::from(step) / 100.0;
        let mut best = 0.0f64;
        for j in 0..n {
            let tp = flags[..=j].iter().filter(|&&t| t).count();
            let recall = tp as f64 / n_gt as f64;
            if recall >= r {
                best = best.max(tp as f64 / (j + 1) as f64);
            }
        }
        total += best;
    }
    total / 101.0
}

fn tp_flags(m: &MatchResult) -> Vec<bool> {
    m.labels
        .iter()
        .filter_map(|l| match l {
            MatchLabel::Tp { .. } => Some(true),
            MatchLabel::Fp => Some(false),
            MatchLabel::Ignored => None,
        })
        .collect()
}

#[test]
fn c02_ap_oracle_equivalence() {
    let mut c = Criterion::new("02 ap-oracle-equivalence");
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_817);
    let mut evaluated = 0usize;
    let mut attempts = 0usize;

    while evaluated < 500 {
        attempts += 1;
        assert!(attempts < 5_000, "oracle fixture generation stalled");
        let n_images = rng.random_range(1..=20usize);
        let n_gts = rng.random_range(0..=12usize);
        let n_dets = rng.random_range(0..=50usize);

        let gts: Vec<Annotation> = (0..n_gts)
            .map(|_| Annotation {
                image_id: format!("img{}", rng.random_range(0..n_images)),
                category: "c".into(),
                bbox: bbox(
                    rng.random_range(0.0..80.0),
                    rng.random_range(0.0..80.0),
                    rng.random_range(5.0..30.0),
                    rng.random_range(5.0..30.0),
                ),
            })
            .collect();
        let dets: Vec<Detection> = (0..n_dets)
            .map(|_| {
                Detection::new(
                    format!("img{}", rng.random_range(0..n_images)),
                    "c",
                    bbox(
                        rng.random_range(0.0..80.0),
                        rng.random_range(0.0..80.0),
                        rng.random_range(5.0..30.0),
                        rng.random_range(5.0..30.0),
                    ),
                    rng.random_range(0.0..1.0),
                )
            })
            .collect();

        let m = match_category(&dets, &gts, None, 0.5).unwrap();
        if m.n_gt == 0 {
            continue;
        }
        evaluated += 1;
        let flags = tp_flags(&m);

        let exact = average_precision(&m, ApMode::Exact).unwrap();
        let exact_oracle = ap_exact_oracle(&flags, m.n_gt);
        c.require(
            (exact - exact_oracle).abs() <= 1e-6,
            format!("exact AP {exact} vs oracle {exact_oracle} on instance {evaluated}"),
        );

        let coco = average_precision(&m, ApMode::Coco101).unwrap();
        let coco_oracle = ap_coco101_oracle(&flags, m.n_gt);
        c.require(
            (coco - coco_oracle).abs() <= 1e-6,
            format!("coco101 AP {coco} vs oracle {coco_oracle} on instance {evaluated}"),
        );
    }

    c.require(evaluated >= 500, format!("only {evaluated} instances evaluated"));
    c.require(started.elapsed().as_secs_f64() < 30.0, "runtime exceeded 30s");
    c.finish();
}

// ---------------------------------------------------------------------------
// 3. hand-derived AP fixture

#[test]
fn c03_hand_derived_ap_fixture() {
    let mut c = Criterion::new("03 hand-derived-ap-fixture");

    // two ground truths on separate images; detections land TP, FP, TP in
    // score order
    let gts = vec![
        Annotation { image_id: "a".into(), category: "c".into(), bbox: bbox(0.0, 0.0, 10.0, 10.0) },
        Annotation { image_id: "b".into(), category: "c".into(), bbox: bbox(0.0, 0.0, 10.0, 10.0) },
    ];
    let dets = vec![
        Detection::new("a", "c", bbox(0.0, 0.0, 10.0, 10.0), 0.9),
        Detection::new("a", "c", bbox(40.0, 40.0, 10.0, 10.0), 0.8),
        Detection::new("b", "c", bbox(0.0, 0.0, 10.0, 10.0), 0.7),
    ];
    let m = match_category(&dets, &gts, None, 0.5).unwrap();
    c.require(
        tp_flags(&m) == vec![true, false, true],
        format!("expected TP,FP,TP sequence, got {:?}", m.labels),
    );

    let exact = average_precision(&m, ApMode::Exact).unwrap();
    c.require_close(exact, 0.83333, 1e-5, "exact-mode AP");

    let coco = average_precision(&m, ApMode::Coco101).unwrap();
    c.require_close(coco, 0.83498, 1e-5, "coco101-mode AP");

    c.finish();
}

// ---------------------------------------------------------------------------
// 4. federated invariance

#[test]
fn c04_federated_invariance() {
    let mut c = Criterion::new("04 federated-invariance");

    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // 8 images; category "c" is federated over the first three only
        let images: Vec<ImageRecord> = (0..8)
            .map(|i| ImageRecord {
                id: format!("img{i}"),
                width: 200,
                height: 200,
                source: "t".into(),
            })
            .collect();
        let mut federated: FederatedSets = BTreeMap::new();
        federated.insert(
            "c".to_string(),
            CategorySets {
                positive: ["img0".to_string(), "img1".to_string()].into(),
                negative: ["img2".to_string()].into(),
            },
        );
        let n_gt = rng.random_range(1..=4usize);
        let gts: Vec<Annotation> = (0..n_gt)
            .map(|_| Annotation {
                image_id: format!("img{}", rng.random_range(0..2usize)),
                category: "c".into(),
                bbox: bbox(
                    rng.random_range(0.0..150.0),
                    rng.random_range(0.0..150.0),
                    rng.random_range(10.0..40.0),
                    rng.random_range(10.0..40.0),
                ),
            })
            .collect();
        let gt = Dataset::new("t", "v1", images, gts, Some(federated)).unwrap();

        let mut base_dets: Vec<Detection> = (0..rng.random_range(1..=6usize))
            .map(|_| {
                Detection::new(
                    format!("img{}", rng.random_range(0..3usize)),
                    "c",
                    bbox(
                        rng.random_range(0.0..150.0),
                        rng.random_range(0.0..150.0),
                        rng.random_range(10.0..40.0),
                        rng.random_range(10.0..40.0),
                    ),
                    rng.random_range(0.0..1.0),
                )
            })
            .collect();

        let before = evaluate(&gt, &DetectionSet::new(base_dets.clone()), &EvalConfig::default())
            .unwrap();

        // inject >= 100 detections on images outside the federated sets
        for _ in 0..110 {
            base_dets.push(Detection::new(
                format!("img{}", rng.random_range(3..8usize)),
                "c",
                bbox(
                    rng.random_range(0.0..150.0),
                    rng.random_range(0.0..150.0),
                    rng.random_range(10.0..40.0),
                    rng.random_range(10.0..40.0),
                ),
                rng.random_range(0.0..1.0),
            ));
        }
        let after =
            evaluate(&gt, &DetectionSet::new(base_dets), &EvalConfig::default()).unwrap();

        let ap_before = before.per_category[0].ap50;
        let ap_after = after.per_category[0].ap50;
        c.require(
            ap_before == ap_after,
            format!("seed {seed}: AP changed {ap_before} -> {ap_after}"),
        );
        c.require(
            before.wap50 == after.wap50,
            format!("seed {seed}: wAP50 changed {} -> {}", before.wap50, after.wap50),
        );
    }

    c.finish();
}

// ---------------------------------------------------------------------------
// 5. class-aware sampling floor at desk scale

#[test]
fn c05_sampling_floor() {
    let mut c = Criterion::new("05 class-aware-sampling-floor");
    let n_min = 20u64;

    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(50_000 + seed);
        // long-tailed draw: category k appears with weight ~ 2^-k, images
        // occasionally carry a second label
        let n_images = rng.random_range(5..60usize);
        let mut images = Vec::new();
        let mut annotations = Vec::new();
        for i in 0..n_images {
            let id = format!("img{i}");
            images.push(ImageRecord { id: id.clone(), width: 100, height: 100, source: "t".into() });
            let mut cats = vec![rng.random_range(0..64u32).leading_zeros() as usize - 26];
            if rng.random_range(0..5u32) == 0 {
                cats.push(rng.random_range(0..6usize));
            }
            for cat in cats {
                annotations.push(Annotation {
                    image_id: id.clone(),
                    category: format!("c{cat}"),
                    bbox: bbox(0.0, 0.0, 10.0, 10.0),
                });
            }
        }
        let d = Dataset::new("t", "v1", images, annotations, None).unwrap();
        let before: BTreeMap<String, usize> = d.histogram().into_iter().collect();

        let plan = plan_upsample(&d, n_min).unwrap();
        let rebalanced = apply(&plan, &d).unwrap();
        let after: BTreeMap<String, usize> = rebalanced.histogram().into_iter().collect();

        for (cat, &n_before) in &before {
            let n_after = after.get(cat).copied().unwrap_or(0);
            c.require(
                n_after as u64 >= n_min,
                format!("seed {seed}: {cat} reached only {n_after} < {n_min}"),
            );
            c.require(
                n_after >= n_before,
                format!("seed {seed}: {cat} decreased {n_before} -> {n_after}"),
            );
        }
    }
    c.finish();
}

// ---------------------------------------------------------------------------
// 6. label propagation mechanism

fn three_level_taxonomy() -> Taxonomy {
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

#[test]
fn c06_label_propagation() {
    let mut c = Criterion::new("06 label-propagation");
    let taxonomy = three_level_taxonomy();

    // ancestor-level ground truth, leaf-only detections with perfect boxes
    let images: Vec<ImageRecord> = (0..4)
        .map(|i| ImageRecord { id: format!("img{i}"), width: 300, height: 300, source: "t".into() })
        .collect();
    let gts: Vec<Annotation> = (0..4)
        .map(|i| Annotation {
            image_id: format!("img{i}"),
            category: "bird".into(),
            bbox: bbox(10.0 + i as f64, 20.0, 50.0, 60.0),
        })
        .collect();
    let gt = Dataset::new("t", "v1", images, gts, None).unwrap();
    let dets = DetectionSet::new(
        (0..4)
            .map(|i| {
                Detection::new(format!("img{i}"), "blue_jay", bbox(10.0 + i as f64, 20.0, 50.0, 60.0), 0.9)
            })
            .collect(),
    );

    let config = EvalConfig::default();
    let before = evaluate(&gt, &dets, &config).unwrap();
    let bird_before = before.per_category.iter().find(|e| e.category == "bird").unwrap();
    c.require_close(bird_before.ap50, 0.0, 0.0, "ancestor AP before propagation");

    let propagated = propagate(&dets, &taxonomy, 1.0).unwrap();
    let after = evaluate(&gt, &propagated, &config).unwrap();
    let bird_after = after.per_category.iter().find(|e| e.category == "bird").unwrap();
    c.require_close(bird_after.ap50, 1.0, 0.0, "ancestor AP after propagation");

    // idempotence on random detection sets
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cats = ["animal", "bird", "blue_jay", "sofa"];
    for trial in 0..100 {
        let dets: Vec<Detection> = (0..rng.random_range(0..25usize))
            .map(|_| {
                Detection::new(
                    format!("img{}", rng.random_range(0..3usize)),
                    cats[rng.random_range(0..cats.len())],
                    bbox(
                        rng.random_range(0.0..200.0),
                        rng.random_range(0.0..200.0),
                        rng.random_range(5.0..50.0),
                        rng.random_range(5.0..50.0),
                    ),
                    rng.random_range(0.0..1.0),
                )
            })
            .collect();
        let set = DetectionSet::new(dets);
        let once = propagate(&set, &taxonomy, 1.0).unwrap();
        let twice = propagate(&once, &taxonomy, 1.0).unwrap();
        c.require(once == twice, format!("trial {trial}: propagation not idempotent"));
    }

    c.finish();
}

// ---------------------------------------------------------------------------
// 7. federation non-regression

#[test]
fn c07_federation_non_regression() {
    let mut c = Criterion::new("07 federation-non-regression");

    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(70_000 + seed);
        // three heads over nine categories
        let categories: Vec<String> = (0..9).map(|i| format!("cat{i}")).collect();
        let mut registry = HeadRegistry::new();
        for h in 0..3 {
            registry = registry
                .register(HeadSpec::new(
                    format!("head{h}"),
                    1,
                    categories[h * 3..(h + 1) * 3].iter().cloned(),
                ))
                .unwrap();
        }

        let random_outputs = |head: usize, rng: &mut ChaCha8Rng| -> DetectionSet {
            let dets = (0..rng.random_range(1..=8usize))
                .map(|_| {
                    Detection::new(
                        format!("img{}", rng.random_range(0..4usize)),
                        categories[head * 3 + rng.random_range(0..3usize)].clone(),
                        bbox(
                            rng.random_range(0.0..100.0),
                            rng.random_range(0.0..100.0),
                            rng.random_range(5.0..30.0),
                            rng.random_range(5.0..30.0),
                        ),
                        rng.random_range(0.0..1.0),
                    )
                })
                .collect();
            DetectionSet::new(dets)
        };

        let mut outputs: BTreeMap<String, DetectionSet> = BTreeMap::new();
        for h in 0..3 {
            outputs.insert(format!("head{h}"), random_outputs(h, &mut rng));
        }
        let before = fed_merge(&registry, &outputs).unwrap();

        // replace one head: bump its version and regenerate its output
        let changed = rng.random_range(0..3usize);
        let changed_id = format!("head{changed}");
        registry = registry
            .register(HeadSpec::new(
                changed_id.clone(),
                2,
                categories[changed * 3..(changed + 1) * 3].iter().cloned(),
            ))
            .unwrap();
        outputs.insert(changed_id.clone(), random_outputs(changed, &mut rng));
        let after = fed_merge(&registry, &outputs).unwrap();

        // restricted to non-owned categories the outputs are byte-identical
        let owned: BTreeSet<&String> = registry.head(&changed_id).unwrap().categories.iter().collect();
        let restrict = |set: &DetectionSet| {
            let kept: Vec<Detection> = set
                .detections
                .iter()
                .filter(|d| !owned.contains(&d.category))
                .cloned()
                .collect();
            serde_json::to_vec(&kept).unwrap()
        };
        c.require(
            restrict(&before) == restrict(&after),
            format!("seed {seed}: non-owned categories changed after swapping {changed_id}"),
        );

        // ownership violations are rejected
        let foreign_cat = categories[((changed + 1) % 3) * 3].clone();
        let mut bad = outputs.clone();
        bad.insert(
            changed_id.clone(),
            DetectionSet::new(vec![Detection::new("img0", foreign_cat, bbox(0.0, 0.0, 5.0, 5.0), 0.5)]),
        );
        c.require(
            fed_merge(&registry, &bad).is_err(),
            format!("seed {seed}: foreign-category output was accepted"),
        );
    }

    c.finish();
}

// ---------------------------------------------------------------------------
// 8. pipeline termination and fidelity

#[test]
fn c08_pipeline_termination_and_fidelity() {
    let mut c = Criterion::new("08 pipeline-termination-fidelity");
    let started = Instant::now();

    // 50 images with up to 10 salient objects each, centers on a grid
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let cats = ["sofa", "lamp", "chair", "table", "rug"];
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for i in 0..50 {
        let id = format!("img{i:03}");
        images.push(ImageRecord { id: id.clone(), width: 1200, height: 1200, source: "o".into() });
        let objects = rng.random_range(1..=10usize);
        for j in 0..objects {
            let col = (j % 4) as f64;
            let row = (j / 4) as f64;
            annotations.push(Annotation {
                image_id: id.clone(),
                category: cats[rng.random_range(0..cats.len())].to_string(),
                bbox: bbox(
                    col * 290.0 + rng.random_range(0.0..40.0),
                    row * 380.0 + rng.random_range(0.0..40.0),
                    rng.random_range(60.0..200.0),
                    rng.random_range(60.0..200.0),
                ),
            });
        }
    }
    let oracle = Dataset::new("oracle", "v1", images, annotations, None).unwrap();

    let judges = JudgeModel { miss_rate: 0.0, false_mark_rate: 0.0, box_noise_px: 0.0, seed: 8 };
    let config = PipelineConfig::default();
    let outcome = simulate(&oracle, &judges, &config, &CostModel::default()).unwrap();
    let (precision, recall) = recovery_metrics(&oracle, &outcome.recovered, config.min_dimension);
    c.require(precision == 1.0, format!("precision {precision} != 1.0"));
    c.require(recall == 1.0, format!("recall {recall} != 1.0"));

    let again = simulate(&oracle, &judges, &config, &CostModel::default()).unwrap();
    c.require(
        outcome.ledger.to_csv() == again.ledger.to_csv(),
        "fixed seed did not reproduce the ledger byte-for-byte",
    );

    // noisy configurations terminate too
    for (miss, false_mark) in [(1.0, 0.0), (0.5, 0.5), (0.0, 1.0)] {
        let noisy = JudgeModel { miss_rate: miss, false_mark_rate: false_mark, box_noise_px: 5.0, seed: 9 };
        c.require(
            simulate(&oracle, &noisy, &config, &CostModel::default()).is_ok(),
            format!("simulation with rates ({miss}, {false_mark}) did not terminate cleanly"),
        );
    }

    c.require(started.elapsed().as_secs_f64() < 60.0, "runtime exceeded 60s");
    c.finish();
}

// ---------------------------------------------------------------------------
// 9. cost/latency arithmetic reproduction

#[test]
fn c09_accounting_arithmetic() {
    let mut c = Criterion::new("09 accounting-arithmetic");

    c.require_close(relative_reduction(0.65, 0.12).unwrap(), 81.5, 0.1, "cost/bbox reduction");
    c.require_close(relative_reduction(0.67, 0.26).unwrap(), 61.2, 0.1, "time/bbox reduction");
    c.require_close(relative_reduction(38.27, 17.26).unwrap(), 54.9, 0.1, "defect-rate reduction");
    let recall_gain = -relative_reduction(81.3, 88.1).unwrap();
    c.require_close(recall_gain, 8.36, 0.01, "recall gain");

    c.finish();
}

// ---------------------------------------------------------------------------
// 10. performance floor and cache behavior

#[test]
fn c10_performance_floor_and_cache() {
    let mut c = Criterion::new("10 performance-floor-and-cache");

    let dir = tempfile::tempdir().unwrap();
    let taxonomy = synthetic_taxonomy(900);
    taxonomy.save(dir.path().join("taxonomy.json")).unwrap();
    let (gt, dets) = synthetic_eval_fixture(10_000, 900, 100_000, 42);
    gt.save(dir.path().join("gt.json")).unwrap();
    dets.save(dir.path().join("dets.json")).unwrap();

    let started = Instant::now();
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_genodkit"))
        .args([
            "eval",
            "run",
            "--taxonomy",
            dir.path().join("taxonomy.json").to_str().unwrap(),
            "--gt",
            dir.path().join("gt.json").to_str().unwrap(),
            "--dets",
            dir.path().join("dets.json").to_str().unwrap(),
            "--out",
            dir.path().join("report.json").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    c.require(
        output.status.success(),
        format!("eval run failed: {}", String::from_utf8_lossy(&output.stderr)),
    );
    c.require(elapsed < 10.0, format!("eval run took {elapsed:.2}s, budget 10s"));
    c.require(
        dir.path().join("report.json").exists(),
        "eval run did not write the report",
    );

    // cache-enabled service answers a repeated /propagate from cache
    let service = Service::new(
        synthetic_taxonomy(16),
        HeadRegistry::new(),
        ServiceConfig { cache_capacity: 64, ..ServiceConfig::default() },
    );
    let service = Arc::new(service);
    let body = format!(
        r#"[{{"image_id": "i", "category": "{}", "bbox": [0, 0, 10, 10], "score": 0.9}}]"#,
        category_name(3)
    );
    let first = service.handle("POST", "/propagate", body.as_bytes());
    let computes = service.cache_computes();
    let second = service.handle("POST", "/propagate", body.as_bytes());
    c.require(first.status == 200, format!("propagate returned {}", first.status));
    c.require(first == second, "repeated /propagate response not byte-identical");
    c.require(
        service.cache_computes() == computes,
        "repeated /propagate was recomputed instead of served from cache",
    );

    c.finish();
}
