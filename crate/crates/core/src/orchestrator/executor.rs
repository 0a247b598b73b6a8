//! Compute backends. Each executor owns one workspace and runs one job at a
//! time; the scheduler calls `provision`, stages input, `execute`,
//! collects output, then `purge_workspace` and `suspend`.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use parking_lot::Mutex;
use serde::Deserialize;

use super::reference::{threshold_labels, threshold_rules, THRESHOLD_IMAGE};
use super::staging;
use super::ModelManifest;
use crate::error::{Error, Result};

pub trait Executor: Send + Sync {
    fn id(&self) -> &str;

    fn workspace(&self) -> &Path;

    /// Brings the compute node up and returns an empty workspace.
    fn provision(&self) -> Result<PathBuf>;

    /// Runs the model over `workspace/input`, leaving `workspace/output`.
    fn execute(&self, manifest: &ModelManifest) -> Result<()>;

    fn suspend(&self) -> Result<()>;

    fn purge_workspace(&self) -> Result<()> {
        staging::clear_dir(self.workspace())
    }
}

/// Runs the staged reference model in `workspace`.
pub fn run_reference_model(workspace: &Path, manifest: &ModelManifest) -> Result<()> {
    let series = staging::read_staged_series(workspace)?;
    let rules = threshold_rules(manifest)?;
    let dims = series.grid.dims();
    let labels = threshold_labels(&series.voxels, dims, &rules);
    staging::write_labels(workspace, dims, &labels)
}

/// Runs on this machine: the built-in reference model, or an external
/// command invoked as `<program> <args…> <workspace>` with the model image
/// in `SEGSTUDIO_MODEL_IMAGE`.
#[derive(Debug)]
pub struct LocalExecutor {
    id: String,
    workspace: PathBuf,
    command: Option<(String, Vec<String>)>,
}

impl LocalExecutor {
    pub fn new(id: impl Into<String>, workspace: impl Into<PathBuf>) -> Self {
        Self {
            id: id.into(),
            workspace: workspace.into(),
            command: None,
        }
    }

    pub fn with_command(mut self, program: impl Into<String>, args: Vec<String>) -> Self {
        self.command = Some((program.into(), args));
        self
    }
}

impl Executor for LocalExecutor {
    fn id(&self) -> &str {
        &self.id
    }

    fn workspace(&self) -> &Path {
        &self.workspace
    }

    fn provision(&self) -> Result<PathBuf> {
        staging::clear_dir(&self.workspace)?;
        staging::prepare(&self.workspace)?;
        Ok(self.workspace.clone())
    }

    fn execute(&self, manifest: &ModelManifest) -> Result<()> {
        if manifest.image == THRESHOLD_IMAGE {
            return run_reference_model(&self.workspace, manifest);
        }
        let Some((program, args)) = &self.command else {
            return Err(Error::Unsupported(format!(
                "no model command configured for image '{}'",
                manifest.image
            )));
        };
        let out = Command::new(program)
            .args(args)
            .arg(&self.workspace)
            .env("SEGSTUDIO_MODEL_IMAGE", &manifest.image)
            .output()
            .map_err(|e| Error::Executor(format!("starting '{program}': {e}")))?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            let tail: String = stderr
                .chars()
                .rev()
                .take(500)
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect();
            return Err(Error::Executor(format!(
                "model exited with {}: {}",
                out.status,
                tail.trim()
            )));
        }
        Ok(())
    }

    fn suspend(&self) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum MockOutcome {
    /// Runs the reference model.
    Succeed,
    /// Writes an all-background label volume.
    Empty,
    Fail {
        message: String,
    },
    FailProvision {
        message: String,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MockLatencies {
    pub provision: Duration,
    pub execute: Duration,
    pub suspend: Duration,
}

/// Scripted executor for tests.
///
/// Each job consumes the next scripted outcome (then `Succeed` once the
/// script is exhausted). A manifest may force an outcome with
/// `params.mock = {"outcome": "fail", "message": "..."}`; that takes
/// precedence over the script.
#[derive(Debug)]
pub struct MockExecutor {
    id: String,
    workspace: PathBuf,
    latencies: MockLatencies,
    script: Mutex<VecDeque<MockOutcome>>,
    current: Mutex<Option<MockOutcome>>,
}

impl MockExecutor {
    pub fn new(id: impl Into<String>, workspace: impl Into<PathBuf>) -> Self {
        Self {
            id: id.into(),
            workspace: workspace.into(),
            latencies: MockLatencies::default(),
            script: Mutex::new(VecDeque::new()),
            current: Mutex::new(None),
        }
    }

    pub fn with_latencies(mut self, latencies: MockLatencies) -> Self {
        self.latencies = latencies;
        self
    }

    pub fn with_script(self, outcomes: impl IntoIterator<Item = MockOutcome>) -> Self {
        self.script.lock().extend(outcomes);
        self
    }

    fn next_outcome(&self) -> MockOutcome {
        self.script
            .lock()
            .pop_front()
            .unwrap_or(MockOutcome::Succeed)
    }
}

fn forced_outcome(manifest: &ModelManifest) -> Option<MockOutcome> {
    manifest
        .params
        .get("mock")
        .and_then(|m| serde_json::from_value(m.clone()).ok())
}

impl Executor for MockExecutor {
    fn id(&self) -> &str {
        &self.id
    }

    fn workspace(&self) -> &Path {
        &self.workspace
    }

    fn provision(&self) -> Result<PathBuf> {
        std::thread::sleep(self.latencies.provision);
        let outcome = self.next_outcome();
        if let MockOutcome::FailProvision { message } = &outcome {
            return Err(Error::Executor(message.clone()));
        }
        *self.current.lock() = Some(outcome);
        staging::clear_dir(&self.workspace)?;
        staging::prepare(&self.workspace)?;
        Ok(self.workspace.clone())
    }

    fn execute(&self, manifest: &ModelManifest) -> Result<()> {
        std::thread::sleep(self.latencies.execute);
        let scripted = self.current.lock().take().unwrap_or(MockOutcome::Succeed);
        match forced_outcome(manifest).unwrap_or(scripted) {
            MockOutcome::Succeed => run_reference_model(&self.workspace, manifest),
            MockOutcome::Empty => {
                let series = staging::read_staged_series(&self.workspace)?;
                let labels = vec![0u16; series.voxels.len()];
                staging::write_labels(&self.workspace, series.grid.dims(), &labels)
            }
            MockOutcome::Fail { message } | MockOutcome::FailProvision { message } => {
                Err(Error::Executor(message))
            }
        }
    }

    fn suspend(&self) -> Result<()> {
        std::thread::sleep(self.latencies.suspend);
        *self.current.lock() = None;
        Ok(())
    }
}
