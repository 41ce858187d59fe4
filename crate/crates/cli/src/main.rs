use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use genodkit::fixtures::{synthetic_eval_fixture, synthetic_taxonomy};
use genodkit::service::{serve, Service, ServiceConfig};
use genodkit_core::dataset::{Dataset, UnmappedPolicy};
use genodkit_core::detection::DetectionSet;
use genodkit_core::evaluation::{evaluate, ApMode, EvalConfig, WeightSource};
use genodkit_core::federation::{merge as fed_merge, non_regression_diff, HeadRegistry, HeadSpec};
use genodkit_core::pipeline::{
    accounting_report, recovery_metrics, simulate, Baseline, CostModel, JudgeModel, Ledger,
    PipelineConfig,
};
use genodkit_core::postprocess;
use genodkit_core::sampling::{self, SamplingPlan};
use genodkit_core::taxonomy::Taxonomy;

#[derive(Parser)]
#[command(name = "genodkit", version, about = "Detection dataset, evaluation and annotation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Taxonomy inspection and validation
    Taxonomy {
        #[command(subcommand)]
        cmd: TaxonomyCmd,
    },
    /// Dataset merging and statistics
    Dataset {
        #[command(subcommand)]
        cmd: DatasetCmd,
    },
    /// Long-tail rebalancing plans
    Sample {
        #[command(subcommand)]
        cmd: SampleCmd,
    },
    /// Detection quality evaluation
    Eval {
        #[command(subcommand)]
        cmd: EvalCmd,
    },
    /// Inference-time detection transforms
    Post {
        #[command(subcommand)]
        cmd: PostCmd,
    },
    /// Disjoint detector-head federation
    Fed {
        #[command(subcommand)]
        cmd: FedCmd,
    },
    /// Annotation pipeline simulation and accounting
    Pipeline {
        #[command(subcommand)]
        cmd: PipelineCmd,
    },
    /// Run the evaluation/post-processing service
    Serve(ServeArgs),
    /// Performance measurements
    Bench {
        #[command(subcommand)]
        cmd: BenchCmd,
    },
}

#[derive(Subcommand)]
enum TaxonomyCmd {
    /// Check a taxonomy file; exits 1 when violations are found
    Validate { file: PathBuf },
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Merge datasets under one taxonomy, namespacing image ids by source
    Merge {
        #[arg(long, env = "GENODKIT_TAXONOMY")]
        taxonomy: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Drop annotations whose categories do not resolve instead of failing
        #[arg(long)]
        drop_unmapped: bool,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Per-category instance counts, largest first
    Stats {
        #[arg(long, env = "GENODKIT_TAXONOMY")]
        taxonomy: PathBuf,
        input: PathBuf,
        /// Write rank,category,count rows here as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SampleCmd {
    /// Plan class-aware upsampling to an instance floor
    Upsample {
        #[arg(long, env = "GENODKIT_TAXONOMY")]
        taxonomy: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = sampling::DEFAULT_MIN_INSTANCES)]
        n_min: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan a uniform downsample to a target image count
    Downsample {
        #[arg(long, env = "GENODKIT_TAXONOMY")]
        taxonomy: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        target: u64,
        #[arg(long, env = "GENODKIT_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Materialize a plan into a rebalanced dataset
    Apply {
        #[arg(long, env = "GENODKIT_TAXONOMY")]
        taxonomy: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write rank,category,count_before,count_after distribution rows
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Evaluate detections against ground truth
    Run {
        #[arg(long, env = "GENODKIT_TAXONOMY")]
        taxonomy: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        dets: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "instance")]
        weights: WeightsArg,
        /// Write the full report as JSON
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write flat category,n_gt,AP50,weight rows
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Exact,
    Coco101,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum WeightsArg {
    Instance,
    Equal,
}

#[derive(Subcommand)]
enum PostCmd {
    /// Copy detections to ancestor categories with per-group dedup
    Propagate {
        #[arg(long, env = "GENODKIT_TAXONOMY")]
        taxonomy: PathBuf,
        #[arg(long)]
        dets: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        dedup_iou: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-image, per-category non-maximum suppression
    Nms {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep detections above per-category score thresholds
    Filter {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        default_thresh: f64,
        /// Per-category overrides as cat=thresh, comma separated
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decide whether an image triggers a category segment
    Trigger {
        #[arg(long, env = "GENODKIT_TAXONOMY")]
        taxonomy: PathBuf,
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        image: String,
        /// Segment categories, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        segment: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        min_score: f64,
    },
}

#[derive(Subcommand)]
enum FedCmd {
    /// Register or replace a detector head
    Register {
        /// Existing registry to extend; omit to start fresh
        #[arg(long, env = "GENODKIT_REGISTRY")]
        registry: Option<PathBuf>,
        #[arg(long)]
        head_id: String,
        #[arg(long)]
        version: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        categories: Vec<String>,
        /// Carve the categories out of this head's ownership
        #[arg(long)]
        carve_from: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge per-head outputs into one canonical detection set
    Merge {
        #[arg(long, env = "GENODKIT_REGISTRY")]
        registry: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// head_id=detections.json pairs
        #[arg(required = true)]
        outputs: Vec<String>,
    },
    /// Verify the non-regression contract after a head swap; exits 1 on FAIL
    Diff {
        #[arg(long, env = "GENODKIT_REGISTRY")]
        registry: PathBuf,
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[arg(long)]
        changed_head: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PipelineCmd {
    /// Run the annotation pipeline against simulated judges
    Simulate {
        #[arg(long, env = "GENODKIT_TAXONOMY")]
        taxonomy: PathBuf,
        #[arg(long)]
        oracle: PathBuf,
        #[arg(long, env = "GENODKIT_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        miss_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        false_mark_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        box_noise_px: f64,
        #[arg(long, default_value_t = 3)]
        overlap_k: usize,
        #[arg(long, default_value_t = 3)]
        max_attempts: u32,
        #[arg(long, default_value_t = 3)]
        marking_rounds: u32,
        #[arg(long, default_value_t = 55.0)]
        min_dimension: f64,
        #[arg(long)]
        out_dataset: PathBuf,
        #[arg(long)]
        out_ledger: PathBuf,
    },
    /// Cost/latency accounting from a ledger, with baseline comparison
    Report {
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        baseline_cost_bbox: Option<f64>,
        #[arg(long)]
        baseline_time_bbox: Option<f64>,
        /// Also write the report as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "GENODKIT_TAXONOMY")]
    taxonomy: PathBuf,
    #[arg(long, env = "GENODKIT_REGISTRY")]
    registry: Option<PathBuf>,
    #[arg(long, env = "GENODKIT_LISTEN", default_value = "127.0.0.1:7878")]
    listen: String,
    #[arg(long, env = "GENODKIT_CACHE_CAPACITY", default_value_t = 1024)]
    cache_capacity: usize,
    #[arg(long, default_value_t = 1.0)]
    dedup_iou: f64,
    #[arg(long, env = "GENODKIT_WORKERS", default_value_t = 4)]
    workers: usize,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Evaluation throughput on a synthetic fixture
    Eval {
        #[arg(long, default_value_t = 10_000)]
        images: usize,
        #[arg(long, default_value_t = 900)]
        categories: usize,
        #[arg(long, default_value_t = 100_000)]
        detections: usize,
        #[arg(long, env = "GENODKIT_SEED", default_value_t = 0)]
        seed: u64,
        /// Worker counts to measure, comma separated
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        workers: Vec<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn load_taxonomy(path: &PathBuf) -> Result<Taxonomy> {
    Taxonomy::load(path).with_context(|| format!("loading taxonomy {}", path.display()))
}

fn load_dataset(path: &PathBuf, taxonomy: &Taxonomy, policy: UnmappedPolicy) -> Result<Dataset> {
    let (dataset, warnings) = Dataset::load(path, taxonomy, policy)
        .with_context(|| format!("loading dataset {}", path.display()))?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(dataset)
}

fn load_detections(path: &PathBuf) -> Result<DetectionSet> {
    DetectionSet::load(path).with_context(|| format!("loading detections {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Taxonomy { cmd } => match cmd {
            TaxonomyCmd::Validate { file } => {
                let text = std::fs::read_to_string(&file)
                    .with_context(|| format!("reading {}", file.display()))?;
                match Taxonomy::from_json(&text) {
                    Ok(t) => {
                        println!("ok: {} categories, {} roots", t.len(), t.roots().count());
                        Ok(ExitCode::SUCCESS)
                    }
                    Err(e) => {
                        eprintln!("invalid: {e}");
                        Ok(ExitCode::from(1))
                    }
                }
            }
        },
        Command::Dataset { cmd } => match cmd {
            DatasetCmd::Merge { taxonomy, out, drop_unmapped, inputs } => {
                let tax = load_taxonomy(&taxonomy)?;
                let policy = if drop_unmapped { UnmappedPolicy::Drop } else { UnmappedPolicy::Error };
                let datasets: Vec<Dataset> = inputs
                    .iter()
                    .map(|p| load_dataset(p, &tax, policy))
                    .collect::<Result<_>>()?;
                let merged = Dataset::merge(&datasets, &tax)?;
                merged.save(&out)?;
                println!(
                    "merged {} datasets: {} images, {} annotations -> {}",
                    datasets.len(),
                    merged.images().len(),
                    merged.annotations().len(),
                    out.display()
                );
                Ok(ExitCode::SUCCESS)
            }
            DatasetCmd::Stats { taxonomy, input, csv } => {
                let tax = load_taxonomy(&taxonomy)?;
                let dataset = load_dataset(&input, &tax, UnmappedPolicy::Error)?;
                let hist = dataset.histogram();
                let mut out = String::from("rank,category,count\n");
                for (i, (category, count)) in hist.iter().enumerate() {
                    out.push_str(&format!("{},{category},{count}\n", i + 1));
                    println!("{:>6}  {category:<30} {count}", i + 1);
                }
                println!("total: {} annotations over {} categories", dataset.annotations().len(), hist.len());
                if let Some(path) = csv {
                    std::fs::write(&path, out)?;
                }
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Sample { cmd } => match cmd {
            SampleCmd::Upsample { taxonomy, dataset, n_min, out } => {
                let tax = load_taxonomy(&taxonomy)?;
                let d = load_dataset(&dataset, &tax, UnmappedPolicy::Error)?;
                let plan = sampling::plan_upsample(&d, n_min)?;
                plan.save(&out)?;
                let replicated: u64 =
                    plan.repeats.values().map(|&c| u64::from(c)).sum();
                println!(
                    "upsample plan: floor {n_min}, {} images -> {replicated} copies -> {}",
                    d.images().len(),
                    out.display()
                );
                Ok(ExitCode::SUCCESS)
            }
            SampleCmd::Downsample { taxonomy, dataset, target, seed, out } => {
                let tax = load_taxonomy(&taxonomy)?;
                let d = load_dataset(&dataset, &tax, UnmappedPolicy::Error)?;
                let plan = sampling::plan_downsample(&d, target, seed)?;
                plan.save(&out)?;
                println!(
                    "downsample plan: {} of {} images kept (seed {seed}) -> {}",
                    target,
                    d.images().len(),
                    out.display()
                );
                Ok(ExitCode::SUCCESS)
            }
            SampleCmd::Apply { taxonomy, dataset, plan, out, report } => {
                let tax = load_taxonomy(&taxonomy)?;
                let d = load_dataset(&dataset, &tax, UnmappedPolicy::Error)?;
                let plan = SamplingPlan::load(&plan)?;
                let rebalanced = sampling::apply(&plan, &d)?;
                rebalanced.save(&out)?;
                println!(
                    "applied plan: {} -> {} images, {} -> {} annotations",
                    d.images().len(),
                    rebalanced.images().len(),
                    d.annotations().len(),
                    rebalanced.annotations().len()
                );
                if let Some(path) = report {
                    let rows = sampling::distribution_report(&d, &rebalanced);
                    let mut csv = String::from("rank,category,count_before,count_after\n");
                    for r in rows {
                        csv.push_str(&format!(
                            "{},{},{},{}\n",
                            r.rank, r.category, r.count_before, r.count_after
                        ));
                    }
                    std::fs::write(&path, csv)?;
                }
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Eval { cmd } => match cmd {
            EvalCmd::Run { taxonomy, gt, dets, mode, weights, out, csv } => {
                let tax = load_taxonomy(&taxonomy)?;
                let gt = load_dataset(&gt, &tax, UnmappedPolicy::Error)?;
                let detections = load_detections(&dets)?;
                let config = EvalConfig {
                    mode: match mode {
                        ModeArg::Exact => ApMode::Exact,
                        ModeArg::Coco101 => ApMode::Coco101,
                    },
                    weight_source: match weights {
                        WeightsArg::Instance => WeightSource::InstanceCount,
                        WeightsArg::Equal => WeightSource::Equal,
                    },
                    ..EvalConfig::default()
                };
                let report = evaluate(&gt, &detections, &config)?;
                println!(
                    "AP50 {:.4}  wAP50 {:.4}  AP {:.4}  ({} categories, {} skipped, mode {}, federated {})",
                    report.ap50,
                    report.wap50,
                    report.ap,
                    report.per_category.len(),
                    report.zero_gt_categories.len(),
                    report.config.mode,
                    report.federated,
                );
                if let Some(path) = out {
                    std::fs::write(&path, report.to_json())?;
                }
                if let Some(path) = csv {
                    std::fs::write(&path, report.to_csv())?;
                }
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Post { cmd } => match cmd {
            PostCmd::Propagate { taxonomy, dets, dedup_iou, out } => {
                let tax = load_taxonomy(&taxonomy)?;
                let input = load_detections(&dets)?;
                let output = postprocess::propagate(&input, &tax, dedup_iou)?;
                output.save(&out)?;
                println!("propagated {} -> {} detections", input.len(), output.len());
                Ok(ExitCode::SUCCESS)
            }
            PostCmd::Nms { dets, iou, out } => {
                let input = load_detections(&dets)?;
                let output = postprocess::nms(&input, iou)?;
                output.save(&out)?;
                println!("nms kept {} of {} detections", output.len(), input.len());
                Ok(ExitCode::SUCCESS)
            }
            PostCmd::Filter { dets, default_thresh, thresholds, out } => {
                let input = load_detections(&dets)?;
                let mut map = BTreeMap::new();
                for spec in thresholds {
                    let (cat, thr) = spec
                        .split_once('=')
                        .with_context(|| format!("expected cat=thresh, got {spec:?}"))?;
                    map.insert(cat.to_string(), thr.parse::<f64>()?);
                }
                let output = postprocess::filter_scores(&input, &map, default_thresh)?;
                output.save(&out)?;
                println!("kept {} of {} detections", output.len(), input.len());
                Ok(ExitCode::SUCCESS)
            }
            PostCmd::Trigger { taxonomy, dets, image, segment, min_score } => {
                let tax = load_taxonomy(&taxonomy)?;
                let input = load_detections(&dets)?;
                let mut universe: BTreeSet<String> =
                    input.image_ids().into_iter().map(str::to_string).collect();
                universe.insert(image.clone());
                let segment: BTreeSet<String> = segment.into_iter().collect();
                let fired =
                    postprocess::image_trigger(&input, &universe, &image, &segment, &tax, min_score)?;
                println!("{fired}");
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Fed { cmd } => match cmd {
            FedCmd::Register { registry, head_id, version, categories, carve_from, out } => {
                let base = match &registry {
                    Some(path) => HeadRegistry::load(path)?,
                    None => HeadRegistry::new(),
                };
                let head = HeadSpec::new(head_id.clone(), version, categories);
                let next = match carve_from {
                    Some(donor) => base.register_carving(head, &donor)?,
                    None => base.register(head)?,
                };
                next.save(&out)?;
                println!(
                    "registered {head_id} v{version}: {} heads, {} categories indexed -> {}",
                    next.heads().count(),
                    next.heads().map(|h| h.categories.len()).sum::<usize>(),
                    out.display()
                );
                Ok(ExitCode::SUCCESS)
            }
            FedCmd::Merge { registry, out, outputs } => {
                let reg = HeadRegistry::load(&registry)?;
                let mut map = BTreeMap::new();
                for spec in outputs {
                    let (head, path) = spec
                        .split_once('=')
                        .with_context(|| format!("expected head=dets.json, got {spec:?}"))?;
                    map.insert(head.to_string(), load_detections(&PathBuf::from(path))?);
                }
                let merged = fed_merge(&reg, &map)?;
                merged.save(&out)?;
                println!("merged {} heads into {} detections", map.len(), merged.len());
                Ok(ExitCode::SUCCESS)
            }
            FedCmd::Diff { registry, before, after, changed_head, out } => {
                let reg = HeadRegistry::load(&registry)?;
                let head = reg
                    .head(&changed_head)
                    .with_context(|| format!("head {changed_head:?} not in registry"))?;
                let before = load_detections(&before)?;
                let after = load_detections(&after)?;
                let report = non_regression_diff(&before, &after, head);
                if let Some(path) = out {
                    std::fs::write(&path, report.to_json())?;
                }
                println!(
                    "{}: {} changed categories, {} foreign differences",
                    if report.passed() { "PASS" } else { "FAIL" },
                    report.changed_categories.len(),
                    report.foreign_differences.len()
                );
                Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
            }
        },
        Command::Pipeline { cmd } => match cmd {
            PipelineCmd::Simulate {
                taxonomy,
                oracle,
                seed,
                miss_rate,
                false_mark_rate,
                box_noise_px,
                overlap_k,
                max_attempts,
                marking_rounds,
                min_dimension,
                out_dataset,
                out_ledger,
            } => {
                let tax = load_taxonomy(&taxonomy)?;
                let oracle = load_dataset(&oracle, &tax, UnmappedPolicy::Error)?;
                let judges = JudgeModel { miss_rate, false_mark_rate, box_noise_px, seed };
                let config = PipelineConfig { overlap_k, max_attempts, marking_rounds, min_dimension };
                let outcome = simulate(&oracle, &judges, &config, &CostModel::default())?;
                outcome.recovered.save(&out_dataset)?;
                outcome.ledger.save(&out_ledger)?;
                let (precision, recall) =
                    recovery_metrics(&oracle, &outcome.recovered, min_dimension);
                println!(
                    "simulated {} images: {} boxes recovered, precision {precision:.4}, recall {recall:.4}",
                    outcome.ledger.images(),
                    outcome.ledger.bboxes()
                );
                Ok(ExitCode::SUCCESS)
            }
            PipelineCmd::Report { ledger, baseline_cost_bbox, baseline_time_bbox, json } => {
                let ledger = Ledger::load(&ledger)?;
                let baseline = match (baseline_cost_bbox, baseline_time_bbox) {
                    (Some(cost_per_bbox), Some(time_per_bbox)) => {
                        Some(Baseline { cost_per_bbox, time_per_bbox })
                    }
                    (None, None) => None,
                    _ => bail!("provide both --baseline-cost-bbox and --baseline-time-bbox or neither"),
                };
                let report = accounting_report(&ledger, baseline);
                print!("{}", report.render());
                if let Some(path) = json {
                    std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
                }
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Serve(args) => {
            let tax = load_taxonomy(&args.taxonomy)?;
            let registry = match &args.registry {
                Some(path) => HeadRegistry::load(path)?,
                None => HeadRegistry::new(),
            };
            let config = ServiceConfig {
                cache_capacity: args.cache_capacity,
                dedup_iou: args.dedup_iou,
                eval: EvalConfig::default(),
            };
            let service = Arc::new(Service::new(tax, registry, config));
            let handle = serve(service, &args.listen, args.workers)?;
            println!("listening on {}", handle.local_addr());
            handle.join();
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { cmd } => match cmd {
            BenchCmd::Eval { images, categories, detections, seed, workers } => {
                let (gt, dets) = synthetic_eval_fixture(images, categories, detections, seed);
                let _tax = synthetic_taxonomy(categories);
                println!(
                    "fixture: {} images, {} categories, {} detections, {} ground truths",
                    images,
                    categories,
                    detections,
                    gt.annotations().len()
                );
                let mut last = 0.0f64;
                for n in workers {
                    let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
                    let start = Instant::now();
                    let report = pool.install(|| evaluate(&gt, &dets, &EvalConfig::default()))?;
                    let elapsed = start.elapsed().as_secs_f64();
                    let throughput = detections as f64 / elapsed;
                    let trend = if throughput + 1e-9 >= last { "" } else { "  (below previous)" };
                    println!(
                        "workers {n:>2}: {elapsed:.3}s, {throughput:.0} detections/s, AP50 {:.4}{trend}",
                        report.ap50
                    );
                    last = throughput;
                }
                Ok(ExitCode::SUCCESS)
            }
        },
    }
}
