//! Request/response service exposing post-processing, evaluation, and
//! federated merging over deterministic JSON bodies, fronted by a
//! content-addressed LRU cache.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::json;

use genodkit_core::dataset::{Dataset, DatasetError, DatasetFile, UnmappedPolicy};
use genodkit_core::detection::{Detection, DetectionError, DetectionSet};
use genodkit_core::evaluation::{evaluate, EvalConfig, EvalError};
use genodkit_core::federation::{
    merge, non_regression_diff_within, DiffReport, FederationError, HeadRegistry, HeadSpec,
};
use genodkit_core::postprocess::{propagate, PostprocessError};
use genodkit_core::taxonomy::Taxonomy;

use crate::cache::{sha256_hex, CacheKey, ResultCache};

/// Service tuning; hashed into every cache key so config changes invalidate
/// cached results.
#[derive(Debug, Clone, Serialize)]
pub struct ServiceConfig {
    pub cache_capacity: usize,
    /// Dedup threshold used by /propagate.
    pub dedup_iou: f64,
    pub eval: EvalConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { cache_capacity: 1024, dedup_iou: 1.0, eval: EvalConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: Vec<u8>,
}

impl Response {
    fn json(status: u16, value: &impl Serialize) -> Self {
        Self { status, body: serde_json::to_vec_pretty(value).expect("response body") }
    }

    fn error(status: u16, code: &str, message: impl std::fmt::Display) -> Self {
        Self::json(status, &json!({ "error": { "code": code, "message": message.to_string() } }))
    }
}

#[derive(Deserialize)]
struct EvaluateBody {
    gt: DatasetFile,
    detections: Vec<Detection>,
}

#[derive(Deserialize)]
struct FederateMergeBody {
    #[serde(default)]
    heads: Vec<HeadSpec>,
    outputs: BTreeMap<String, Vec<Detection>>,
}

#[derive(Serialize)]
struct FederateMergeReply<'a> {
    merged: &'a [Detection],
    diff: Option<&'a DiffReport>,
}

/// Per-head outputs and the merged set of the previous request for a batch.
type MergeHistoryEntry = (BTreeMap<String, Vec<Detection>>, DetectionSet);

pub struct Service {
    taxonomy: Taxonomy,
    registry: HeadRegistry,
    config: ServiceConfig,
    config_hash: String,
    cache: ResultCache<Response>,
    previous_merges: Mutex<HashMap<String, MergeHistoryEntry>>,
}

impl Service {
    pub fn new(taxonomy: Taxonomy, registry: HeadRegistry, config: ServiceConfig) -> Self {
        let config_hash =
            sha256_hex(serde_json::to_string(&config).expect("config serializes").as_bytes());
        let cache = ResultCache::new(config.cache_capacity);
        Self {
            taxonomy,
            registry,
            config,
            config_hash,
            cache,
            previous_merges: Mutex::new(HashMap::new()),
        }
    }

    pub fn cache_computes(&self) -> u64 {
        self.cache.computes()
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache.hits()
    }

    /// Route one request. Deterministic for identical (method, path, body,
    /// config); /propagate and /evaluate responses are cached.
    pub fn handle(&self, method: &str, path: &str, body: &[u8]) -> Response {
        match (method, path) {
            ("GET", "/healthz") => Response::json(200, &json!({ "status": "ok" })),
            ("POST", "/propagate") => self.cached(path, body, |b| self.do_propagate(b)),
            ("POST", "/evaluate") => self.cached(path, body, |b| self.do_evaluate(b)),
            ("POST", "/federate/merge") => self.do_federate_merge(body),
            _ => Response::error(404, "unknown_endpoint", format!("{method} {path}")),
        }
    }

    fn cached(&self, path: &str, body: &[u8], compute: impl FnOnce(&[u8]) -> Response) -> Response {
        let key = CacheKey::new(body, format!("{path}:{}", self.config_hash));
        self.cache.get_or_compute(&key, || compute(body))
    }

    fn do_propagate(&self, body: &[u8]) -> Response {
        let text = match std::str::from_utf8(body) {
            Ok(t) => t,
            Err(e) => return Response::error(400, "malformed_body", e),
        };
        let dets = match DetectionSet::from_json(text) {
            Ok(d) => d,
            Err(e) => return detection_error(e),
        };
        match propagate(&dets, &self.taxonomy, self.config.dedup_iou) {
            Ok(out) => Response::json(200, &out),
            Err(e) => postprocess_error(e),
        }
    }

    fn do_evaluate(&self, body: &[u8]) -> Response {
        let parsed: EvaluateBody = match serde_json::from_slice(body) {
            Ok(p) => p,
            Err(e) => return Response::error(400, "malformed_body", e),
        };
        let dets = DetectionSet::new(parsed.detections);
        if let Err(e) = dets.validate() {
            return detection_error(e);
        }
        let (gt, _warnings) =
            match Dataset::from_file(parsed.gt, &self.taxonomy, UnmappedPolicy::Error) {
                Ok(ok) => ok,
                Err(e) => return dataset_error(e),
            };
        match evaluate(&gt, &dets, &self.config.eval) {
            Ok(report) => Response::json(200, &report),
            Err(e) => eval_error(e),
        }
    }

    fn do_federate_merge(&self, body: &[u8]) -> Response {
        let parsed: FederateMergeBody = match serde_json::from_slice(body) {
            Ok(p) => p,
            Err(e) => return Response::error(400, "malformed_body", e),
        };
        let mut registry = self.registry.clone();
        for head in parsed.heads {
            registry = match registry.register(head) {
                Ok(r) => r,
                Err(e) => return federation_error(e),
            };
        }
        let outputs: BTreeMap<String, DetectionSet> = parsed
            .outputs
            .iter()
            .map(|(head, dets)| (head.clone(), DetectionSet::new(dets.clone())))
            .collect();
        let merged = match merge(&registry, &outputs) {
            Ok(m) => m,
            Err(e) => return federation_error(e),
        };

        // batch identity: the set of images this merge covers
        let mut image_ids: BTreeSet<&str> = BTreeSet::new();
        for set in outputs.values() {
            image_ids.extend(set.detections.iter().map(|d| d.image_id.as_str()));
        }
        let batch_hash = sha256_hex(
            image_ids.into_iter().collect::<Vec<_>>().join("\n").as_bytes(),
        );

        let mut history = self.previous_merges.lock().expect("merge history lock");
        let diff = history.get(&batch_hash).map(|(prev_outputs, prev_merged)| {
            let mut changed: BTreeSet<String> = BTreeSet::new();
            let head_ids: BTreeSet<&String> =
                prev_outputs.keys().chain(parsed.outputs.keys()).collect();
            for head_id in head_ids {
                if prev_outputs.get(head_id) != parsed.outputs.get(head_id) {
                    changed.insert(head_id.clone());
                }
            }
            let allowed: BTreeSet<String> = changed
                .iter()
                .filter_map(|h| registry.head(h))
                .flat_map(|h| h.categories.iter().cloned())
                .collect();
            non_regression_diff_within(prev_merged, &merged, &allowed)
        });
        let reply = FederateMergeReply { merged: &merged.detections, diff: diff.as_ref() };
        let response = Response::json(200, &reply);
        history.insert(batch_hash, (parsed.outputs, merged));
        response
    }
}

fn detection_error(e: DetectionError) -> Response {
    match e {
        DetectionError::ScoreOutOfRange { .. } => Response::error(422, "score_out_of_range", e),
        DetectionError::Parse { .. } => Response::error(400, "malformed_body", e),
        DetectionError::Io { .. } => Response::error(500, "internal", e),
    }
}

fn dataset_error(e: DatasetError) -> Response {
    match e {
        DatasetError::Parse { .. } => Response::error(400, "malformed_body", e),
        DatasetError::UnmappedCategory { .. } => Response::error(422, "unmapped_category", e),
        other => Response::error(422, "invalid_dataset", other),
    }
}

fn eval_error(e: EvalError) -> Response {
    match e {
        EvalError::NoEvaluableGroundTruth => Response::error(422, "no_evaluable_ground_truth", e),
        other => Response::error(422, "invalid_evaluation", other),
    }
}

fn postprocess_error(e: PostprocessError) -> Response {
    match e {
        PostprocessError::UnknownCategory(_) => Response::error(422, "unknown_category", e),
        other => Response::error(422, "invalid_postprocess", other),
    }
}

fn federation_error(e: FederationError) -> Response {
    match e {
        FederationError::CategoryOverlap { .. } => Response::error(422, "category_overlap", e),
        FederationError::NotOwned { .. } => Response::error(422, "head_ownership", e),
        FederationError::VersionNotIncreased { .. } => {
            Response::error(422, "version_not_increased", e)
        }
        FederationError::UnknownHead { .. } => Response::error(422, "unknown_head", e),
        other => Response::error(422, "invalid_federation", other),
    }
}

/// A bound HTTP server with its worker threads.
pub struct ServerHandle {
    server: Arc<tiny_http::Server>,
    stop: Arc<std::sync::atomic::AtomicBool>,
    workers: Vec<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> String {
        self.server.server_addr().to_string()
    }

    /// Block until the server is shut down from another thread.
    pub fn join(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }

    pub fn shutdown(self) {
        self.stop.store(true, std::sync::atomic::Ordering::SeqCst);
        self.server.unblock();
        for w in self.workers {
            let _ = w.join();
        }
    }
}

/// Serve `service` on `listen` with a small worker pool.
pub fn serve(service: Arc<Service>, listen: &str, workers: usize) -> anyhow::Result<ServerHandle> {
    use std::sync::atomic::{AtomicBool, Ordering};

    let server = Arc::new(
        tiny_http::Server::http(listen)
            .map_err(|e| anyhow::anyhow!("failed to bind {listen}: {e}"))?,
    );
    let stop = Arc::new(AtomicBool::new(false));
    let mut handles = Vec::new();
    for _ in 0..workers.max(1) {
        let server = Arc::clone(&server);
        let service = Arc::clone(&service);
        let stop = Arc::clone(&stop);
        handles.push(std::thread::spawn(move || {
            while !stop.load(Ordering::SeqCst) {
                let request = match server.recv_timeout(std::time::Duration::from_millis(100)) {
                    Ok(Some(r)) => r,
                    Ok(None) => continue,
                    Err(_) => break,
                };
                let mut request = request;
                let mut body = Vec::new();
                let _ = request.as_reader().read_to_end(&mut body);
                let method = request.method().as_str().to_string();
                let url = request.url().to_string();
                let path = url.split('?').next().unwrap_or("").to_string();
                let response = service.handle(&method, &path, &body);
                let reply = tiny_http::Response::from_data(response.body)
                    .with_status_code(response.status)
                    .with_header(
                        tiny_http::Header::from_bytes(
                            &b"Content-Type"[..],
                            &b"application/json"[..],
                        )
                        .expect("static header"),
                    );
                let _ = request.respond(reply);
            }
        }));
    }
    Ok(ServerHandle { server, stop, workers: handles })
}
