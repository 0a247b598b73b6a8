//! Durable, versioned storage for series, segmentations, reports and
//! service records.
//!
//! On-disk layout of a data directory:
//!
//! ```text
//! <data-dir>/
//!   blobs/<sha256>   content-addressed payloads (series, segmentations, reports)
//!   index.log        write-ahead-logged index (see [`wal`])
//!   tmp/             in-flight blob writes
//! ```
//!
//! Every mutation writes its blob first, then commits one index record.
//! After a crash the index therefore never references a missing blob; a blob
//! without an index entry is an orphan and is swept on the next open.
//! Segmentation versions are append-only: nothing rewrites a stored set.

pub mod blobs;
pub mod wal;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::EvaluationReport;
use crate::dicom::series::{ImageSeries, SeriesHeader};
use crate::error::{Error, Result};
use crate::exchange::{decode_segmentation, encode_segmentation};
use crate::mask::{Provenance, SegmentationSet};
use blobs::BlobStore;
use wal::{IndexLog, Recovery};

/// Where a simulated crash happens during a blob-backed write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultPoint {
    /// Blob is durable, index record not yet written.
    AfterBlobWrite,
    /// Half of the index record has reached disk.
    TornIndexAppend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultAction {
    /// `std::process::abort()`: a real crash.
    Abort,
    /// Return an error and refuse all further writes, leaving the on-disk
    /// state exactly as a crash would.
    Fail,
}

#[derive(Debug, Clone, Default)]
pub struct StoreOptions {
    pub fault: Option<(FaultPoint, FaultAction)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurgeScope {
    /// Staged copies in executor workspaces only.
    ComputeCopies,
    /// The series and everything derived from it.
    Everything,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurgeReceipt {
    pub series_id: String,
    pub scope: PurgeScope,
    pub removed_blobs: Vec<String>,
    pub removed_paths: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub series_id: String,
    pub study_id: String,
    pub modality: String,
    pub patient_pseudonym: String,
    pub grid: crate::geometry::VolumeGrid,
    pub created_at: DateTime<Utc>,
    pub blob: String,
    pub versions: usize,
    pub latest_version: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub study_id: String,
    pub series: Vec<SeriesSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionInfo {
    pub version: u64,
    pub parent_version: Option<u64>,
    pub provenance: Provenance,
    pub rois: Vec<String>,
    pub blob: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportInfo {
    pub report_id: String,
    pub pred_version: u64,
    pub gt_version: u64,
    pub created_at: DateTime<Utc>,
    pub blob: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub checked_blobs: usize,
    pub problems: Vec<String>,
}

impl IntegrityReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum IndexOp {
    PutSeries {
        header: SeriesHeader,
        blob: String,
        created_at: DateTime<Utc>,
    },
    PutSegmentation {
        series_id: String,
        info: VersionInfo,
    },
    PutReport {
        series_id: String,
        info: ReportInfo,
    },
    StageCopy {
        series_id: String,
        path: PathBuf,
    },
    ReleaseStaged {
        series_id: String,
        path: PathBuf,
    },
    ClearStaged {
        series_id: String,
    },
    PurgeSeries {
        series_id: String,
    },
    /// Lowest version number a re-created series may continue from.
    VersionFloor {
        series_id: String,
        max_version: u64,
    },
    PutRecord {
        collection: String,
        id: String,
        value: serde_json::Value,
    },
}

#[derive(Debug, Clone)]
struct SeriesEntry {
    header: SeriesHeader,
    blob: String,
    created_at: DateTime<Utc>,
    versions: BTreeMap<u64, VersionInfo>,
    reports: Vec<ReportInfo>,
    staged: BTreeSet<PathBuf>,
}

impl SeriesEntry {
    fn blobs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        out.insert(self.blob.clone());
        out.extend(self.versions.values().map(|v| v.blob.clone()));
        out.extend(self.reports.iter().map(|r| r.blob.clone()));
        out
    }
}

#[derive(Debug, Default)]
struct Index {
    series: BTreeMap<String, SeriesEntry>,
    version_floor: BTreeMap<String, u64>,
    records: BTreeMap<String, BTreeMap<String, serde_json::Value>>,
}

impl Index {
    fn apply(&mut self, op: IndexOp) {
        match op {
            IndexOp::PutSeries {
                header,
                blob,
                created_at,
            } => {
                self.series.insert(
                    header.series_id.clone(),
                    SeriesEntry {
                        header,
                        blob,
                        created_at,
                        versions: BTreeMap::new(),
                        reports: Vec::new(),
                        staged: BTreeSet::new(),
                    },
                );
            }
            IndexOp::PutSegmentation { series_id, info } => {
                if let Some(e) = self.series.get_mut(&series_id) {
                    e.versions.insert(info.version, info);
                }
            }
            IndexOp::PutReport { series_id, info } => {
                if let Some(e) = self.series.get_mut(&series_id) {
                    e.reports.push(info);
                }
            }
            IndexOp::StageCopy { series_id, path } => {
                if let Some(e) = self.series.get_mut(&series_id) {
                    e.staged.insert(path);
                }
            }
            IndexOp::ReleaseStaged { series_id, path } => {
                if let Some(e) = self.series.get_mut(&series_id) {
                    e.staged.remove(&path);
                }
            }
            IndexOp::ClearStaged { series_id } => {
                if let Some(e) = self.series.get_mut(&series_id) {
                    e.staged.clear();
                }
            }
            IndexOp::PurgeSeries { series_id } => {
                if let Some(e) = self.series.remove(&series_id) {
                    let max = e.versions.keys().next_back().copied().unwrap_or(0);
                    let floor = self.version_floor.entry(series_id).or_default();
                    *floor = (*floor).max(max);
                }
            }
            IndexOp::VersionFloor {
                series_id,
                max_version,
            } => {
                let floor = self.version_floor.entry(series_id).or_default();
                *floor = (*floor).max(max_version);
            }
            IndexOp::PutRecord {
                collection,
                id,
                value,
            } => {
                self.records
                    .entry(collection)
                    .or_default()
                    .insert(id, value);
            }
        }
    }

    fn entry(&self, series_id: &str) -> Result<&SeriesEntry> {
        self.series
            .get(series_id)
            .ok_or_else(|| Error::NotFound(format!("series '{series_id}'")))
    }

    fn next_version(&self, series_id: &str) -> u64 {
        let floor = self.version_floor.get(series_id).copied().unwrap_or(0);
        let max = self
            .series
            .get(series_id)
            .and_then(|e| e.versions.keys().next_back().copied())
            .unwrap_or(0);
        floor.max(max) + 1
    }

    fn referenced_blobs(&self) -> BTreeSet<String> {
        self.series.values().flat_map(|e| e.blobs()).collect()
    }

    /// Ops that rebuild this index from scratch.
    fn snapshot(&self) -> Vec<IndexOp> {
        let mut ops = Vec::new();
        for (id, floor) in &self.version_floor {
            ops.push(IndexOp::VersionFloor {
                series_id: id.clone(),
                max_version: *floor,
            });
        }
        for (id, e) in &self.series {
            ops.push(IndexOp::PutSeries {
                header: e.header.clone(),
                blob: e.blob.clone(),
                created_at: e.created_at,
            });
            for v in e.versions.values() {
                ops.push(IndexOp::PutSegmentation {
                    series_id: id.clone(),
                    info: v.clone(),
                });
            }
            for r in &e.reports {
                ops.push(IndexOp::PutReport {
                    series_id: id.clone(),
                    info: r.clone(),
                });
            }
            for p in &e.staged {
                ops.push(IndexOp::StageCopy {
                    series_id: id.clone(),
                    path: p.clone(),
                });
            }
        }
        for (collection, recs) in &self.records {
            for (id, value) in recs {
                ops.push(IndexOp::PutRecord {
                    collection: collection.clone(),
                    id: id.clone(),
                    value: value.clone(),
                });
            }
        }
        ops
    }
}

struct CommitState {
    log: IndexLog,
    poisoned: bool,
}

struct Inner {
    root: PathBuf,
    blobs: BlobStore,
    index: RwLock<Index>,
    commit: Mutex<CommitState>,
    options: StoreOptions,
    recovery: Recovery,
}

/// Handle to a data directory. Cheap to clone and safe to share.
///
/// Readers proceed concurrently; writers serialize on a single commit point
/// that covers the blob write and the index append.
#[derive(Clone)]
pub struct Store {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("root", &self.inner.root)
            .finish()
    }
}

impl Store {
    pub fn open(root: impl AsRef<Path>) -> Result<Store> {
        Self::open_with(root, StoreOptions::default())
    }

    /// Opens the store, replays the index, compacts it and sweeps orphans.
    pub fn open_with(root: impl AsRef<Path>, options: StoreOptions) -> Result<Store> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(Error::io(format!("creating {}", root.display())))?;
        let blobs = BlobStore::open(&root)?;
        let (mut log, payloads, recovery) = IndexLog::open(&root.join("index.log"))?;
        let mut index = Index::default();
        for p in payloads {
            let op: IndexOp = serde_json::from_slice(&p)
                .map_err(|e| Error::Integrity(format!("undecodable index record: {e}")))?;
            index.apply(op);
        }
        let snapshot = index
            .snapshot()
            .iter()
            .map(|op| serde_json::to_vec(op).expect("index op serializes"))
            .collect::<Vec<_>>();
        log.rewrite(&snapshot)?;

        let store = Store {
            inner: Arc::new(Inner {
                root,
                blobs,
                index: RwLock::new(index),
                commit: Mutex::new(CommitState {
                    log,
                    poisoned: false,
                }),
                options,
                recovery,
            }),
        };
        store.inner.blobs.clear_tmp()?;
        let swept = store.sweep()?;
        if swept > 0 {
            tracing::info!(swept, "removed orphaned blobs");
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.inner.root
    }

    /// What replay found when this handle was opened.
    pub fn recovery(&self) -> Recovery {
        self.inner.recovery
    }

    fn commit(&self, state: &mut CommitState, op: IndexOp, faultable: bool) -> Result<()> {
        if state.poisoned {
            return Err(Error::Integrity(
                "store is halted after an injected fault".into(),
            ));
        }
        let payload = serde_json::to_vec(&op).expect("index op serializes");
        if faultable {
            if let Some((point, action)) = self.inner.options.fault {
                match point {
                    FaultPoint::AfterBlobWrite => {}
                    FaultPoint::TornIndexAppend => state.log.append_torn(&payload)?,
                }
                if action == FaultAction::Abort {
                    std::process::abort();
                }
                state.poisoned = true;
                return Err(Error::Integrity(format!("injected fault at {point:?}")));
            }
        }
        state.log.append(&payload)?;
        self.inner.index.write().apply(op);
        Ok(())
    }

    /// Stores a series. Re-uploading identical content returns the same id;
    /// different content under an existing id is a conflict.
    pub fn put_series(&self, series: &ImageSeries) -> Result<String> {
        let bytes = series.to_blob();
        let hash = blobs::checksum(&bytes);
        let mut state = self.inner.commit.lock();
        if let Some(e) = self.inner.index.read().series.get(&series.series_id) {
            return if e.blob == hash {
                Ok(series.series_id.clone())
            } else {
                Err(Error::Conflict(format!(
                    "series '{}' already stored with different content",
                    series.series_id
                )))
            };
        }
        self.inner.blobs.put(&bytes)?;
        let op = IndexOp::PutSeries {
            header: series.header(),
            blob: hash,
            created_at: Utc::now(),
        };
        self.commit(&mut state, op, true)?;
        Ok(series.series_id.clone())
    }

    fn read_blob(
        &self,
        hash: &str,
        still_indexed: impl Fn(&Index) -> bool,
        what: &str,
    ) -> Result<Vec<u8>> {
        match self.inner.blobs.get(hash) {
            Err(Error::Integrity(_)) if !still_indexed(&self.inner.index.read()) => {
                Err(Error::NotFound(what.to_string()))
            }
            other => other,
        }
    }

    pub fn get_series(&self, series_id: &str) -> Result<ImageSeries> {
        let blob = self.inner.index.read().entry(series_id)?.blob.clone();
        let bytes = self.read_blob(
            &blob,
            |i| i.series.contains_key(series_id),
            &format!("series '{series_id}'"),
        )?;
        ImageSeries::from_blob(&bytes)
    }

    pub fn series_header(&self, series_id: &str) -> Result<SeriesHeader> {
        Ok(self.inner.index.read().entry(series_id)?.header.clone())
    }

    pub fn series_summary(&self, series_id: &str) -> Result<SeriesSummary> {
        let index = self.inner.index.read();
        Ok(summary(series_id, index.entry(series_id)?))
    }

    /// All stored series grouped by study, both ordered by id.
    pub fn list_studies(&self) -> Vec<StudySummary> {
        let index = self.inner.index.read();
        let mut studies: BTreeMap<String, Vec<SeriesSummary>> = BTreeMap::new();
        for (id, e) in &index.series {
            studies
                .entry(e.header.study_id.clone())
                .or_default()
                .push(summary(id, e));
        }
        studies
            .into_iter()
            .map(|(study_id, series)| StudySummary { study_id, series })
            .collect()
    }

    pub fn series_count(&self) -> usize {
        self.inner.index.read().series.len()
    }

    /// Appends a new segmentation version and returns its number.
    ///
    /// The set's own `version` is ignored; `parent_version`, when present,
    /// must name an existing version.
    pub fn put_segmentation(&self, series_id: &str, set: &SegmentationSet) -> Result<u64> {
        if set.series_ref != series_id {
            return Err(Error::SeriesMismatch(format!(
                "segmentation references series '{}', not '{series_id}'",
                set.series_ref
            )));
        }
        let mut body = set.clone();
        body.version = 0;
        body.parent_version = None;
        body.provenance = Provenance {
            source: crate::mask::Source::Manual,
            created_at: DateTime::<Utc>::UNIX_EPOCH,
        };
        let bytes = encode_segmentation(&body);

        let mut state = self.inner.commit.lock();
        let version = {
            let index = self.inner.index.read();
            let entry = index.entry(series_id)?;
            if &entry.header.grid != set.grid() {
                return Err(Error::GridMismatch(format!(
                    "segmentation grid differs from series '{series_id}'"
                )));
            }
            if let Some(p) = set.parent_version {
                if !entry.versions.contains_key(&p) {
                    return Err(Error::NotFound(format!(
                        "parent version {p} of series '{series_id}'"
                    )));
                }
            }
            index.next_version(series_id)
        };
        let hash = self.inner.blobs.put(&bytes)?;
        let info = VersionInfo {
            version,
            parent_version: set.parent_version,
            provenance: set.provenance.clone(),
            rois: set.rois().iter().map(|r| r.roi.name.clone()).collect(),
            blob: hash,
        };
        self.commit(
            &mut state,
            IndexOp::PutSegmentation {
                series_id: series_id.to_string(),
                info,
            },
            true,
        )?;
        Ok(version)
    }

    pub fn get_segmentation(&self, series_id: &str, version: u64) -> Result<SegmentationSet> {
        let info = self.version_info(series_id, version)?;
        let bytes = self.read_blob(
            &info.blob,
            |i| {
                i.series
                    .get(series_id)
                    .is_some_and(|e| e.versions.contains_key(&version))
            },
            &format!("version {version} of series '{series_id}'"),
        )?;
        let mut set = decode_segmentation(&bytes)?;
        set.version = info.version;
        set.parent_version = info.parent_version;
        set.provenance = info.provenance;
        Ok(set)
    }

    pub fn version_info(&self, series_id: &str, version: u64) -> Result<VersionInfo> {
        self.inner
            .index
            .read()
            .entry(series_id)?
            .versions
            .get(&version)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("version {version} of series '{series_id}'")))
    }

    /// Version lineage in ascending order.
    pub fn list_versions(&self, series_id: &str) -> Result<Vec<VersionInfo>> {
        Ok(self
            .inner
            .index
            .read()
            .entry(series_id)?
            .versions
            .values()
            .cloned()
            .collect())
    }

    pub fn latest_version(&self, series_id: &str) -> Result<Option<u64>> {
        Ok(self
            .inner
            .index
            .read()
            .entry(series_id)?
            .versions
            .keys()
            .next_back()
            .copied())
    }

    pub fn put_report(&self, report: &EvaluationReport) -> Result<String> {
        let series_id = report.series_id.clone();
        let bytes = serde_json::to_vec(report).expect("report serializes");
        let mut state = self.inner.commit.lock();
        {
            let index = self.inner.index.read();
            let entry = index.entry(&series_id)?;
            for v in [report.pred_version, report.gt_version] {
                if !entry.versions.contains_key(&v) {
                    return Err(Error::NotFound(format!(
                        "version {v} of series '{series_id}'"
                    )));
                }
            }
        }
        let hash = self.inner.blobs.put(&bytes)?;
        let info = ReportInfo {
            report_id: uuid::Uuid::new_v4().to_string(),
            pred_version: report.pred_version,
            gt_version: report.gt_version,
            created_at: report.created_at,
            blob: hash,
        };
        let id = info.report_id.clone();
        self.commit(&mut state, IndexOp::PutReport { series_id, info }, false)?;
        Ok(id)
    }

    pub fn list_reports(&self, series_id: &str) -> Result<Vec<ReportInfo>> {
        Ok(self.inner.index.read().entry(series_id)?.reports.clone())
    }

    pub fn get_report(&self, series_id: &str, report_id: &str) -> Result<EvaluationReport> {
        let info = self
            .list_reports(series_id)?
            .into_iter()
            .find(|r| r.report_id == report_id)
            .ok_or_else(|| Error::NotFound(format!("report '{report_id}'")))?;
        let bytes = self.read_blob(
            &info.blob,
            |i| i.series.contains_key(series_id),
            &format!("report '{report_id}'"),
        )?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Records that a copy of `series_id` was staged at `path`, so a
    /// compute-copies purge can find it.
    pub fn register_staged_copy(&self, series_id: &str, path: &Path) -> Result<()> {
        let mut state = self.inner.commit.lock();
        self.inner.index.read().entry(series_id)?;
        self.commit(
            &mut state,
            IndexOp::StageCopy {
                series_id: series_id.to_string(),
                path: path.to_path_buf(),
            },
            false,
        )
    }

    /// Deletes one staged copy of `series_id` and forgets it. Other copies
    /// (other executors working on the same series) are left alone.
    pub fn release_staged_copy(&self, series_id: &str, path: &Path) -> Result<bool> {
        let mut state = self.inner.commit.lock();
        let known = self
            .inner
            .index
            .read()
            .entry(series_id)?
            .staged
            .contains(path);
        if !known {
            return Ok(false);
        }
        match fs::remove_dir_all(path) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => {
                return Err(Error::io(format!(
                    "removing staged copy {}",
                    path.display()
                ))(e))
            }
        }
        self.commit(
            &mut state,
            IndexOp::ReleaseStaged {
                series_id: series_id.to_string(),
                path: path.to_path_buf(),
            },
            false,
        )?;
        Ok(true)
    }

    pub fn staged_copies(&self, series_id: &str) -> Result<Vec<PathBuf>> {
        Ok(self
            .inner
            .index
            .read()
            .entry(series_id)?
            .staged
            .iter()
            .cloned()
            .collect())
    }

    /// Removes staged compute copies, or the whole series.
    ///
    /// `Everything` first drops the index entry (the privacy-relevant step),
    /// then deletes the blobs no other entry references.
    pub fn purge_series(&self, series_id: &str, scope: PurgeScope) -> Result<PurgeReceipt> {
        let mut state = self.inner.commit.lock();
        let entry = self.inner.index.read().entry(series_id)?.clone();
        let mut removed_paths = Vec::new();
        for p in &entry.staged {
            match fs::remove_dir_all(p) {
                Ok(()) => removed_paths.push(p.clone()),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => removed_paths.push(p.clone()),
                Err(e) => {
                    tracing::warn!(path = %p.display(), error = %e, "could not remove staged copy")
                }
            }
        }
        let op = match scope {
            PurgeScope::ComputeCopies => IndexOp::ClearStaged {
                series_id: series_id.to_string(),
            },
            PurgeScope::Everything => IndexOp::PurgeSeries {
                series_id: series_id.to_string(),
            },
        };
        self.commit(&mut state, op, false)?;

        let mut removed_blobs = Vec::new();
        if scope == PurgeScope::Everything {
            let still_used = self.inner.index.read().referenced_blobs();
            for b in entry.blobs() {
                if !still_used.contains(&b) {
                    if let Err(e) = self.inner.blobs.remove(&b) {
                        tracing::warn!(blob = %b, error = %e, "blob removal deferred to sweeper");
                    }
                }
                removed_blobs.push(b);
            }
        }
        Ok(PurgeReceipt {
            series_id: series_id.to_string(),
            scope,
            removed_blobs,
            removed_paths,
        })
    }

    /// Deletes blob files not referenced by the index.
    pub fn sweep(&self) -> Result<usize> {
        let _state = self.inner.commit.lock();
        let used = self.inner.index.read().referenced_blobs();
        let mut n = 0;
        for b in self.inner.blobs.list()? {
            if !used.contains(&b) && self.inner.blobs.remove(&b)? {
                n += 1;
            }
        }
        Ok(n)
    }

    /// Checks that every indexed blob exists with a matching checksum and
    /// that version lineage only points backwards.
    pub fn verify(&self) -> IntegrityReport {
        let (blobs, lineage) = {
            let index = self.inner.index.read();
            let blobs = index.referenced_blobs();
            let mut lineage = Vec::new();
            for (id, e) in &index.series {
                for v in e.versions.values() {
                    if let Some(p) = v.parent_version {
                        if p >= v.version || !e.versions.contains_key(&p) {
                            lineage.push(format!(
                                "series '{id}' version {} has invalid parent {p}",
                                v.version
                            ));
                        }
                    }
                }
            }
            (blobs, lineage)
        };
        let mut report = IntegrityReport {
            checked_blobs: blobs.len(),
            problems: lineage,
        };
        for b in blobs {
            if let Err(e) = self.inner.blobs.verify(&b) {
                report.problems.push(e.to_string());
            }
        }
        report
    }

    /// Upserts a JSON record in `collection`.
    pub fn put_record<T: Serialize>(&self, collection: &str, id: &str, value: &T) -> Result<()> {
        let value = serde_json::to_value(value).expect("record serializes");
        let mut state = self.inner.commit.lock();
        self.commit(
            &mut state,
            IndexOp::PutRecord {
                collection: collection.to_string(),
                id: id.to_string(),
                value,
            },
            false,
        )
    }

    pub fn get_record<T: DeserializeOwned>(&self, collection: &str, id: &str) -> Result<Option<T>> {
        let index = self.inner.index.read();
        index
            .records
            .get(collection)
            .and_then(|c| c.get(id))
            .map(|v| serde_json::from_value(v.clone()).map_err(Error::from))
            .transpose()
    }

    /// All records in `collection`, ordered by id.
    pub fn records<T: DeserializeOwned>(&self, collection: &str) -> Result<Vec<T>> {
        let index = self.inner.index.read();
        index
            .records
            .get(collection)
            .map(|c| {
                c.values()
                    .map(|v| serde_json::from_value(v.clone()).map_err(Error::from))
                    .collect()
            })
            .unwrap_or_else(|| Ok(Vec::new()))
    }
}

fn summary(id: &str, e: &SeriesEntry) -> SeriesSummary {
    SeriesSummary {
        series_id: id.to_string(),
        study_id: e.header.study_id.clone(),
        modality: e.header.modality.clone(),
        patient_pseudonym: e.header.patient_pseudonym.clone(),
        grid: e.header.grid.clone(),
        created_at: e.created_at,
        blob: e.blob.clone(),
        versions: e.versions.len(),
        latest_version: e.versions.keys().next_back().copied(),
    }
}
