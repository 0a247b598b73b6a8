//! Model registry and inference job lifecycle.
//!
//! Jobs move `Queued → Provisioning → Running → Postprocessing →
//! Completed`, or to `Failed` from any non-terminal state. One worker thread
//! drives each executor; all workers pop from a single bounded FIFO queue.
//! Whatever the outcome, the staged copy and the workspace are purged and
//! the executor is suspended before the job reaches a terminal state.

pub mod executor;
pub mod reference;
pub mod staging;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeDelta, Utc};
use parking_lot::{Condvar, Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::contour::DEFAULT_PALETTE;
use crate::error::{Error, Result};
use crate::mask::{Provenance, Roi, SegmentationSet, Source, VoxelMask};
use crate::store::Store;
pub use executor::{Executor, LocalExecutor, MockExecutor, MockLatencies, MockOutcome};
pub use reference::THRESHOLD_IMAGE;

const MODELS: &str = "models";
const JOBS: &str = "jobs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    /// Assigned on registration; ignored on input.
    #[serde(default)]
    pub model_id: String,
    pub name: String,
    pub version: String,
    /// Opaque container reference; `builtin:threshold` selects the
    /// reference model.
    pub image: String,
    /// ROI name to output label (1..=65535).
    pub label_map: BTreeMap<String, u16>,
    #[serde(default)]
    pub modality: String,
    #[serde(default)]
    pub resource_hints: BTreeMap<String, String>,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl ModelManifest {
    /// Reference threshold model with one ROI.
    pub fn threshold(name: &str, version: &str, roi: &str, threshold: f64) -> Self {
        Self {
            model_id: String::new(),
            name: name.into(),
            version: version.into(),
            image: THRESHOLD_IMAGE.into(),
            label_map: BTreeMap::from([(roi.to_string(), 1)]),
            modality: "CT".into(),
            resource_hints: BTreeMap::new(),
            params: serde_json::json!({ "thresholds": { roi: threshold } }),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() || self.version.trim().is_empty() {
            return Err(Error::Argument(
                "model name and version must be nonempty".into(),
            ));
        }
        if self.label_map.is_empty() {
            return Err(Error::Argument("label map is empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (roi, label) in &self.label_map {
            if roi.trim().is_empty() {
                return Err(Error::Argument("label map has an empty ROI name".into()));
            }
            if *label == 0 {
                return Err(Error::Argument(format!(
                    "ROI '{roi}' uses background label 0"
                )));
            }
            if !seen.insert(*label) {
                return Err(Error::Argument(format!("label {label} is mapped twice")));
            }
        }
        if self.image == THRESHOLD_IMAGE {
            reference::threshold_rules(self)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JobState {
    Queued,
    Provisioning,
    Running,
    Postprocessing,
    Completed,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Completed | JobState::Failed)
    }

    pub fn can_transition_to(self, next: JobState) -> bool {
        use JobState::*;
        match (self, next) {
            (s, Failed) => !s.is_terminal(),
            (Queued, Provisioning) | (Provisioning, Running) | (Running, Postprocessing) => true,
            (Postprocessing, Completed) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: JobState,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobResult {
    Version(u64),
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceJob {
    pub job_id: String,
    pub model_id: String,
    pub series_id: String,
    pub state: JobState,
    pub history: Vec<Transition>,
    pub result: Option<JobResult>,
    pub executor_id: Option<String>,
    pub idempotency_key: Option<String>,
}

impl InferenceJob {
    fn advance(&mut self, next: JobState) {
        debug_assert!(
            self.state.can_transition_to(next),
            "{:?} -> {next:?}",
            self.state
        );
        let now = Utc::now();
        let at = match self.history.last() {
            Some(t) if now <= t.at => t.at + TimeDelta::microseconds(1),
            _ => now,
        };
        self.state = next;
        self.history.push(Transition { state: next, at });
    }

    fn fail(&mut self, detail: impl Into<String>) {
        if !self.state.is_terminal() {
            self.advance(JobState::Failed);
            self.result = Some(JobResult::Error(detail.into()));
        }
    }

    pub fn version(&self) -> Option<u64> {
        match self.result {
            Some(JobResult::Version(v)) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecutorPhase {
    Suspended,
    Provisioning,
    Active,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutorState {
    pub executor_id: String,
    pub state: ExecutorPhase,
    pub current_job: Option<String>,
    pub workspace: PathBuf,
}

#[derive(Debug, Clone)]
pub struct OrchestratorConfig {
    /// Most jobs waiting in the queue before submissions get `Busy`.
    pub queue_limit: usize,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self { queue_limit: 64 }
    }
}

#[derive(Default)]
struct Sched {
    queue: VecDeque<String>,
    jobs: HashMap<String, InferenceJob>,
    idempotency: HashMap<String, String>,
    shutdown: bool,
}

struct Shared {
    store: Store,
    config: OrchestratorConfig,
    models: RwLock<BTreeMap<String, ModelManifest>>,
    register: Mutex<()>,
    sched: Mutex<Sched>,
    work: Condvar,
    changed: Condvar,
    executors: Mutex<Vec<ExecutorState>>,
}

pub struct Orchestrator {
    shared: Arc<Shared>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl std::fmt::Debug for Orchestrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Orchestrator")
            .field("executors", &self.shared.executors.lock().len())
            .finish()
    }
}

impl Orchestrator {
    /// Loads models and jobs from the store and starts one worker per
    /// executor. Jobs left unfinished by a previous run are marked failed.
    pub fn start(
        store: Store,
        executors: Vec<Arc<dyn Executor>>,
        config: OrchestratorConfig,
    ) -> Result<Orchestrator> {
        if executors.is_empty() {
            return Err(Error::Argument("at least one executor is required".into()));
        }
        let models: Vec<ModelManifest> = store.records(MODELS)?;
        let mut sched = Sched::default();
        for mut job in store.records::<InferenceJob>(JOBS)? {
            if !job.state.is_terminal() {
                job.fail("interrupted by service restart");
                store.put_record(JOBS, &job.job_id, &job)?;
            }
            if let Some(k) = &job.idempotency_key {
                sched.idempotency.insert(k.clone(), job.job_id.clone());
            }
            sched.jobs.insert(job.job_id.clone(), job);
        }
        let states = executors
            .iter()
            .map(|e| ExecutorState {
                executor_id: e.id().to_string(),
                state: ExecutorPhase::Suspended,
                current_job: None,
                workspace: e.workspace().to_path_buf(),
            })
            .collect();
        let shared = Arc::new(Shared {
            store,
            config,
            models: RwLock::new(
                models
                    .into_iter()
                    .map(|m| (m.model_id.clone(), m))
                    .collect(),
            ),
            register: Mutex::new(()),
            sched: Mutex::new(sched),
            work: Condvar::new(),
            changed: Condvar::new(),
            executors: Mutex::new(states),
        });
        let workers = executors
            .into_iter()
            .enumerate()
            .map(|(slot, ex)| {
                let shared = shared.clone();
                std::thread::Builder::new()
                    .name(format!("executor-{}", ex.id()))
                    .spawn(move || worker(shared, slot, ex))
                    .map_err(|e| Error::Startup(format!("spawning worker: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Orchestrator {
            shared,
            workers: Mutex::new(workers),
        })
    }

    pub fn store(&self) -> &Store {
        &self.shared.store
    }

    pub fn register_model(&self, manifest: ModelManifest) -> Result<ModelManifest> {
        manifest.validate()?;
        let _guard = self.shared.register.lock();
        if self
            .shared
            .models
            .read()
            .values()
            .any(|m| m.name == manifest.name && m.version == manifest.version)
        {
            return Err(Error::Conflict(format!(
                "model '{}' version '{}' is already registered",
                manifest.name, manifest.version
            )));
        }
        let mut m = manifest;
        m.model_id = uuid::Uuid::new_v4().to_string();
        self.shared.store.put_record(MODELS, &m.model_id, &m)?;
        self.shared
            .models
            .write()
            .insert(m.model_id.clone(), m.clone());
        Ok(m)
    }

    /// Registered models ordered by name, then version.
    pub fn list_models(&self) -> Vec<ModelManifest> {
        let mut v: Vec<_> = self.shared.models.read().values().cloned().collect();
        v.sort_by(|a, b| (&a.name, &a.version).cmp(&(&b.name, &b.version)));
        v
    }

    pub fn model(&self, model_id: &str) -> Result<ModelManifest> {
        self.shared
            .models
            .read()
            .get(model_id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("model '{model_id}'")))
    }

    /// Queues a job. A repeated `idempotency_key` returns the original job
    /// when the request matches, and `Conflict` otherwise.
    pub fn submit_job(
        &self,
        model_id: &str,
        series_id: &str,
        idempotency_key: Option<&str>,
    ) -> Result<InferenceJob> {
        self.model(model_id)?;
        self.shared.store.series_header(series_id)?;
        let job = {
            let mut sched = self.shared.sched.lock();
            if sched.shutdown {
                return Err(Error::Busy("service is shutting down".into()));
            }
            if let Some(key) = idempotency_key {
                if let Some(id) = sched.idempotency.get(key) {
                    let existing = &sched.jobs[id];
                    if existing.model_id != model_id || existing.series_id != series_id {
                        return Err(Error::Conflict(format!(
                            "idempotency key '{key}' was used for a different request"
                        )));
                    }
                    return Ok(existing.clone());
                }
            }
            if sched.queue.len() >= self.shared.config.queue_limit {
                return Err(Error::Busy(format!(
                    "job queue is full ({} waiting)",
                    sched.queue.len()
                )));
            }
            let mut job = InferenceJob {
                job_id: uuid::Uuid::new_v4().to_string(),
                model_id: model_id.to_string(),
                series_id: series_id.to_string(),
                state: JobState::Queued,
                history: Vec::new(),
                result: None,
                executor_id: None,
                idempotency_key: idempotency_key.map(str::to_string),
            };
            job.history.push(Transition {
                state: JobState::Queued,
                at: Utc::now(),
            });
            // Persisted under the lock so a worker cannot overtake the
            // initial record.
            self.shared.store.put_record(JOBS, &job.job_id, &job)?;
            if let Some(key) = idempotency_key {
                sched
                    .idempotency
                    .insert(key.to_string(), job.job_id.clone());
            }
            sched.jobs.insert(job.job_id.clone(), job.clone());
            sched.queue.push_back(job.job_id.clone());
            job
        };
        self.shared.work.notify_one();
        Ok(job)
    }

    pub fn job_status(&self, job_id: &str) -> Result<InferenceJob> {
        self.shared
            .sched
            .lock()
            .jobs
            .get(job_id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("job '{job_id}'")))
    }

    /// All jobs, oldest first.
    pub fn jobs(&self) -> Vec<InferenceJob> {
        let mut v: Vec<_> = self.shared.sched.lock().jobs.values().cloned().collect();
        v.sort_by_key(|j| j.history.first().map(|t| t.at));
        v
    }

    /// Blocks until the job is terminal or `timeout` passes, returning the
    /// latest snapshot either way.
    pub fn wait_for(&self, job_id: &str, timeout: Duration) -> Result<InferenceJob> {
        let deadline = Instant::now() + timeout;
        let mut sched = self.shared.sched.lock();
        loop {
            let job = sched
                .jobs
                .get(job_id)
                .ok_or_else(|| Error::NotFound(format!("job '{job_id}'")))?;
            if job.state.is_terminal() {
                return Ok(job.clone());
            }
            if self
                .shared
                .changed
                .wait_until(&mut sched, deadline)
                .timed_out()
            {
                return Ok(sched.jobs[job_id].clone());
            }
        }
    }

    pub fn executors(&self) -> Vec<ExecutorState> {
        self.shared.executors.lock().clone()
    }

    /// Fails queued jobs, lets running jobs finish and joins the workers.
    pub fn shutdown(&self) {
        let failed: Vec<InferenceJob> = {
            let mut sched = self.shared.sched.lock();
            if sched.shutdown {
                Vec::new()
            } else {
                sched.shutdown = true;
                let queued: Vec<String> = sched.queue.drain(..).collect();
                queued
                    .into_iter()
                    .map(|id| {
                        let job = sched.jobs.get_mut(&id).expect("queued job exists");
                        job.fail("shutdown");
                        job.clone()
                    })
                    .collect()
            }
        };
        for job in &failed {
            persist(&self.shared.store, job);
        }
        self.shared.work.notify_all();
        self.shared.changed.notify_all();
        for handle in self.workers.lock().drain(..) {
            let _ = handle.join();
        }
    }
}

impl Drop for Orchestrator {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn persist(store: &Store, job: &InferenceJob) {
    if let Err(e) = store.put_record(JOBS, &job.job_id, job) {
        tracing::warn!(job = %job.job_id, error = %e, "could not persist job state");
    }
}

fn worker(shared: Arc<Shared>, slot: usize, ex: Arc<dyn Executor>) {
    loop {
        let job_id = {
            let mut sched = shared.sched.lock();
            loop {
                if let Some(id) = sched.queue.pop_front() {
                    break id;
                }
                if sched.shutdown {
                    return;
                }
                shared.work.wait(&mut sched);
            }
        };
        run_job(&shared, slot, ex.as_ref(), &job_id);
    }
}

fn update_job(shared: &Shared, job_id: &str, f: impl FnOnce(&mut InferenceJob)) -> InferenceJob {
    let snapshot = {
        let mut sched = shared.sched.lock();
        let job = sched.jobs.get_mut(job_id).expect("job exists");
        f(job);
        job.clone()
    };
    persist(&shared.store, &snapshot);
    shared.changed.notify_all();
    snapshot
}

fn set_executor(shared: &Shared, slot: usize, phase: ExecutorPhase, job: Option<&str>) {
    let mut states = shared.executors.lock();
    states[slot].state = phase;
    states[slot].current_job = job.map(str::to_string);
}

fn run_job(shared: &Shared, slot: usize, ex: &dyn Executor, job_id: &str) {
    let job = update_job(shared, job_id, |j| {
        j.executor_id = Some(ex.id().to_string());
        j.advance(JobState::Provisioning);
    });
    set_executor(shared, slot, ExecutorPhase::Provisioning, Some(job_id));
    tracing::info!(job = job_id, executor = ex.id(), "job started");

    let outcome = execute_job(shared, slot, ex, &job);

    // Cleanup runs whatever happened above.
    let mut cleanup_errors = Vec::new();
    // Only this job's copy: another executor may be working on the same series.
    match shared
        .store
        .release_staged_copy(&job.series_id, &staging::input_dir(ex.workspace()))
    {
        Ok(_) | Err(Error::NotFound(_)) => {}
        Err(e) => cleanup_errors.push(format!("purging staged copies: {e}")),
    }
    if let Err(e) = ex.purge_workspace() {
        cleanup_errors.push(format!("purging workspace: {e}"));
    }
    if let Err(e) = ex.suspend() {
        cleanup_errors.push(format!("suspending executor: {e}"));
    }
    set_executor(shared, slot, ExecutorPhase::Suspended, None);

    let final_job = update_job(shared, job_id, |j| {
        match (outcome, cleanup_errors.is_empty()) {
            (Ok(version), true) => {
                j.advance(JobState::Completed);
                j.result = Some(JobResult::Version(version));
            }
            (Ok(version), false) => j.fail(format!(
                "version {version} stored but cleanup failed: {}",
                cleanup_errors.join("; ")
            )),
            (Err(e), _) => j.fail(format!("{}: {}", e.code(), e.detail())),
        }
    });
    tracing::info!(job = job_id, state = ?final_job.state, "job finished");
}

fn execute_job(shared: &Shared, slot: usize, ex: &dyn Executor, job: &InferenceJob) -> Result<u64> {
    let manifest = shared
        .models
        .read()
        .get(&job.model_id)
        .cloned()
        .ok_or_else(|| Error::NotFound(format!("model '{}'", job.model_id)))?;
    let workspace = ex.provision()?;
    let series = shared.store.get_series(&job.series_id)?;
    let staged = staging::stage_series(&workspace, &series)?;
    shared.store.register_staged_copy(&job.series_id, &staged)?;

    update_job(shared, &job.job_id, |j| j.advance(JobState::Running));
    set_executor(shared, slot, ExecutorPhase::Active, Some(&job.job_id));
    ex.execute(&manifest)?;

    update_job(shared, &job.job_id, |j| j.advance(JobState::Postprocessing));
    let labels = staging::read_labels(&workspace, series.grid.dims())?;
    let set = labels_to_segmentation(&labels, &series.series_id, &series.grid, &manifest)?;
    shared.store.put_segmentation(&job.series_id, &set)
}

/// Splits a label volume into one ROI per label-map entry. The ROI number
/// is the label value. Labels absent from the map are rejected.
pub fn labels_to_segmentation(
    labels: &[u16],
    series_id: &str,
    grid: &crate::VolumeGrid,
    manifest: &ModelManifest,
) -> Result<SegmentationSet> {
    let by_label: BTreeMap<u16, &str> = manifest
        .label_map
        .iter()
        .map(|(name, l)| (*l, name.as_str()))
        .collect();
    let mut masks: BTreeMap<u16, VoxelMask> = by_label
        .keys()
        .map(|l| (*l, VoxelMask::new(grid.clone())))
        .collect();
    for (n, &l) in labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        masks
            .get_mut(&l)
            .ok_or_else(|| Error::Parse(format!("model produced unmapped label {l}")))?
            .set_linear(n, true);
    }
    let mut set = SegmentationSet::new(
        series_id,
        grid.clone(),
        Provenance::now(Source::Model {
            model_id: manifest.model_id.clone(),
            model_version: manifest.version.clone(),
        }),
    );
    for (label, mask) in masks {
        let color = DEFAULT_PALETTE[(label as usize - 1) % DEFAULT_PALETTE.len()];
        set.add_roi(Roi::new(u32::from(label), by_label[&label], color), mask)?;
    }
    Ok(set)
}
