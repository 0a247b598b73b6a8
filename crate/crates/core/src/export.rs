//! Active-learning export bundles.
//!
//! A bundle is an uncompressed tar archive:
//!
//! ```text
//! manifest.json
//! masks/pred.seg.json        segmentation exchange documents
//! masks/corrected.seg.json
//! masks/gt.seg.json          only when a ground-truth version is given
//! images/volume.bin          only with `include_images`
//! images/series.meta         only with `include_images`
//! ```
//!
//! The manifest lists every other file with its sha256. Without
//! `include_images` the bundle holds no pixel data, only the series id and
//! the checksum of the stored series.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::analysis::{evaluate, EvaluationReport};
use crate::error::{Error, Result};
use crate::exchange::SegmentationDocument;
use crate::mask::{Provenance, SegmentationSet};
use crate::store::{blobs::checksum, Store};

pub const BUNDLE_FORMAT: &str = "segstudio.active-learning-bundle/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportRequest {
    #[serde(alias = "series")]
    pub series_id: String,
    pub pred_version: u64,
    pub corrected_version: u64,
    #[serde(default)]
    pub gt_version: Option<u64>,
    #[serde(default)]
    pub include_images: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSeries {
    pub series_id: String,
    pub study_id: String,
    pub modality: String,
    pub patient_pseudonym: String,
    pub series_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleVersion {
    pub role: String,
    pub version: u64,
    pub parent_version: Option<u64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiDelta {
    pub roi_name: String,
    pub dice_before: Option<f64>,
    pub dice_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub created_at: DateTime<Utc>,
    pub series: BundleSeries,
    pub versions: Vec<BundleVersion>,
    /// Provenance of the prediction, normally a model.
    pub model_provenance: Provenance,
    /// `"gt"` or `"corrected"`: what the scores compare against.
    pub reference: String,
    /// Mean DICE of prediction vs reference over matched ROIs.
    pub dice_before: Option<f64>,
    /// Mean DICE of correction vs reference over matched ROIs.
    pub dice_after: Option<f64>,
    pub per_roi: Vec<RoiDelta>,
    /// Edit history from the correction back to its root version.
    pub edit_lineage: Vec<BundleVersion>,
    pub include_images: bool,
    pub files: Vec<BundleFile>,
}

/// Builds the bundle and returns `(tar bytes, manifest)`.
pub fn export_active_learning_bundle(
    store: &Store,
    req: &ExportRequest,
) -> Result<(Vec<u8>, BundleManifest)> {
    let summary = store.series_summary(&req.series_id)?;
    let pred = store.get_segmentation(&req.series_id, req.pred_version)?;
    let corrected = store.get_segmentation(&req.series_id, req.corrected_version)?;
    let gt = req
        .gt_version
        .map(|v| store.get_segmentation(&req.series_id, v))
        .transpose()?;

    let (reference, reference_name) = match &gt {
        Some(g) => (g, "gt"),
        None => (&corrected, "corrected"),
    };
    let (before, _) = evaluate(&pred, reference)?;
    let (after, _) = evaluate(&corrected, reference)?;
    let per_roi = roi_deltas(&before, &after);

    let mut versions = vec![
        version_entry("pred", &pred),
        version_entry("corrected", &corrected),
    ];
    if let Some(g) = &gt {
        versions.push(version_entry("gt", g));
    }

    let mut edit_lineage = Vec::new();
    let mut cursor = Some(req.corrected_version);
    while let Some(v) = cursor {
        let info = store.version_info(&req.series_id, v)?;
        cursor = info.parent_version;
        edit_lineage.push(BundleVersion {
            role: "lineage".into(),
            version: info.version,
            parent_version: info.parent_version,
            provenance: info.provenance,
        });
    }

    let mut files: Vec<(String, Vec<u8>)> = vec![
        ("masks/pred.seg.json".into(), doc_bytes(&pred)),
        ("masks/corrected.seg.json".into(), doc_bytes(&corrected)),
    ];
    if let Some(g) = &gt {
        files.push(("masks/gt.seg.json".into(), doc_bytes(g)));
    }
    if req.include_images {
        let series = store.get_series(&req.series_id)?;
        files.push(("images/volume.bin".into(), series.voxel_bytes()));
        files.push((
            "images/series.meta".into(),
            serde_json::to_vec_pretty(&series.header()).expect("header serializes"),
        ));
    }

    let manifest = BundleManifest {
        format: BUNDLE_FORMAT.into(),
        created_at: Utc::now(),
        series: BundleSeries {
            series_id: summary.series_id,
            study_id: summary.study_id,
            modality: summary.modality,
            patient_pseudonym: summary.patient_pseudonym,
            series_sha256: summary.blob,
        },
        versions,
        model_provenance: pred.provenance.clone(),
        reference: reference_name.into(),
        dice_before: before.mean_dice,
        dice_after: after.mean_dice,
        per_roi,
        edit_lineage,
        include_images: req.include_images,
        files: files
            .iter()
            .map(|(path, bytes)| BundleFile {
                path: path.clone(),
                sha256: checksum(bytes),
            })
            .collect(),
    };

    let mut builder = tar::Builder::new(Vec::new());
    let manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    append(
        &mut builder,
        "manifest.json",
        &manifest_bytes,
        manifest.created_at,
    )?;
    for (path, bytes) in &files {
        append(&mut builder, path, bytes, manifest.created_at)?;
    }
    let bytes = builder
        .into_inner()
        .map_err(Error::io("finishing bundle archive"))?;
    Ok((bytes, manifest))
}

/// Reads `(path, contents)` pairs back out of a bundle.
pub fn read_bundle(bytes: &[u8]) -> Result<Vec<(String, Vec<u8>)>> {
    use std::io::Read;
    let mut archive = tar::Archive::new(bytes);
    let mut out = Vec::new();
    for entry in archive.entries().map_err(Error::io("reading bundle"))? {
        let mut entry = entry.map_err(Error::io("reading bundle entry"))?;
        let path = entry
            .path()
            .map_err(Error::io("reading bundle path"))?
            .to_string_lossy()
            .into_owned();
        let mut data = Vec::new();
        entry
            .read_to_end(&mut data)
            .map_err(Error::io("reading bundle entry"))?;
        out.push((path, data));
    }
    Ok(out)
}

fn version_entry(role: &str, set: &SegmentationSet) -> BundleVersion {
    BundleVersion {
        role: role.into(),
        version: set.version,
        parent_version: set.parent_version,
        provenance: set.provenance.clone(),
    }
}

fn doc_bytes(set: &SegmentationSet) -> Vec<u8> {
    serde_json::to_vec(&SegmentationDocument::from_set(set)).expect("document serializes")
}

fn roi_deltas(before: &EvaluationReport, after: &EvaluationReport) -> Vec<RoiDelta> {
    let score =
        |r: &EvaluationReport, name: &str| r.entry(name).filter(|e| e.matched).map(|e| e.dice);
    let mut names: Vec<&str> = before.entries.iter().map(|e| e.roi_name.as_str()).collect();
    for e in &after.entries {
        if !names.contains(&e.roi_name.as_str()) {
            names.push(&e.roi_name);
        }
    }
    names
        .into_iter()
        .map(|n| RoiDelta {
            roi_name: n.to_string(),
            dice_before: score(before, n),
            dice_after: score(after, n),
        })
        .collect()
}

fn append(
    builder: &mut tar::Builder<Vec<u8>>,
    path: &str,
    bytes: &[u8],
    at: DateTime<Utc>,
) -> Result<()> {
    let mut header = tar::Header::new_gnu();
    header.set_size(bytes.len() as u64);
    header.set_mode(0o644);
    header.set_mtime(at.timestamp().max(0) as u64);
    header.set_cksum();
    builder
        .append_data(&mut header, path, bytes)
        .map_err(Error::io(format!("adding {path} to bundle")))
}
