//! Synthetic phantoms with analytically known ground truth.
//!
//! Shapes are rendered at voxel centers with inclusive boundaries; later
//! shapes overwrite earlier ones, and each voxel's ground-truth ROI is the
//! last shape covering it.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::series::{encode_series_files, pseudonymize, representable_grid, ImageSeries};
use crate::contour::DEFAULT_PALETTE;
use crate::error::{Error, Result};
use crate::exchange::SegmentationDocument;
use crate::geometry::{dot, ContinuousIndex, VolumeGrid, WorldPoint};
use crate::mask::{Provenance, Roi, SegmentationSet, Source, VoxelMask};

/// Slack (in voxels) when checking that a shape fits inside the grid.
const EXTENT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhantomShape {
    Sphere {
        center: WorldPoint,
        radius: f64,
        intensity: i16,
        roi_name: String,
    },
    /// Box aligned with the grid axes: `size` is measured from `corner` along
    /// the row direction, the column direction and the slice normal.
    Box {
        corner: WorldPoint,
        size: [f64; 3],
        intensity: i16,
        roi_name: String,
    },
}

impl PhantomShape {
    pub fn roi_name(&self) -> &str {
        match self {
            PhantomShape::Sphere { roi_name, .. } | PhantomShape::Box { roi_name, .. } => roi_name,
        }
    }

    pub fn intensity(&self) -> i16 {
        match self {
            PhantomShape::Sphere { intensity, .. } | PhantomShape::Box { intensity, .. } => {
                *intensity
            }
        }
    }

    fn contains(&self, grid: &VolumeGrid, p: WorldPoint) -> bool {
        match self {
            PhantomShape::Sphere { center, radius, .. } => {
                let d = p.sub(center);
                dot(&d, &d) <= radius * radius
            }
            PhantomShape::Box { corner, size, .. } => {
                let d = p.sub(corner);
                let o = grid.orientation();
                let offs = [dot(&d, &o.row), dot(&d, &o.col), dot(&d, &grid.normal())];
                offs.iter().zip(size).all(|(x, s)| *x >= 0.0 && *x <= *s)
            }
        }
    }

    /// Continuous-index bounding box `(lo, hi)`.
    fn index_bounds(&self, grid: &VolumeGrid) -> Result<([f64; 3], [f64; 3])> {
        let sp = grid.spacing();
        let pitch = [sp.col, sp.row, sp.slice];
        match self {
            PhantomShape::Sphere { center, radius, .. } => {
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(Error::Argument(format!(
                        "sphere radius {radius} is invalid"
                    )));
                }
                let c = grid.world_to_voxel(*center);
                let c = [c.i, c.j, c.k];
                Ok((
                    std::array::from_fn(|a| c[a] - radius / pitch[a]),
                    std::array::from_fn(|a| c[a] + radius / pitch[a]),
                ))
            }
            PhantomShape::Box { corner, size, .. } => {
                if size.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return Err(Error::Argument(format!("box size {size:?} is invalid")));
                }
                let c = grid.world_to_voxel(*corner);
                let c = [c.i, c.j, c.k];
                Ok((c, std::array::from_fn(|a| c[a] + size[a] / pitch[a])))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub grid: VolumeGrid,
    pub background: i16,
    pub shapes: Vec<PhantomShape>,
    pub study_uid: String,
    pub series_uid: String,
    #[serde(default = "default_patient")]
    pub patient_id: String,
    #[serde(default = "default_modality")]
    pub modality: String,
}

fn default_patient() -> String {
    "PHANTOM".into()
}

fn default_modality() -> String {
    "CT".into()
}

impl PhantomSpec {
    pub fn new(grid: VolumeGrid, background: i16, series_uid: impl Into<String>) -> Self {
        let series_uid = series_uid.into();
        Self {
            grid,
            background,
            shapes: Vec::new(),
            study_uid: format!("{series_uid}.0"),
            series_uid,
            patient_id: default_patient(),
            modality: default_modality(),
        }
    }

    pub fn with_shape(mut self, shape: PhantomShape) -> Self {
        self.shapes.push(shape);
        self
    }

    /// A centered sphere, the standard single-organ test phantom.
    pub fn sphere(size: usize, radius: f64, intensity: i16, series_uid: impl Into<String>) -> Self {
        let grid = VolumeGrid::identity(size, size, size).expect("size >= 1");
        let c = (size as f64 - 1.0) / 2.0;
        Self::new(grid, 0, series_uid).with_shape(PhantomShape::Sphere {
            center: WorldPoint::new(c, c, c),
            radius,
            intensity,
            roi_name: "sphere".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileChecksum {
    pub name: String,
    pub sha256: String,
}

/// Manifest written next to generated phantom files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomManifest {
    pub spec: PhantomSpec,
    pub files: Vec<FileChecksum>,
    pub ground_truth: SegmentationDocument,
}

#[derive(Debug, Clone)]
pub struct Phantom {
    /// In-memory rendering.
    pub series: ImageSeries,
    /// One Part-10 file per slice.
    pub files: Vec<Vec<u8>>,
    pub ground_truth: SegmentationSet,
    pub manifest: PhantomManifest,
}

impl Phantom {
    pub fn file_name(k: usize) -> String {
        format!("slice_{k:04}.dcm")
    }
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    // Rendered on the grid the files will describe, so parsing them back
    // reproduces the series exactly.
    let grid = &representable_grid(&spec.grid)?;
    let dims = grid.dims();
    for (n, shape) in spec.shapes.iter().enumerate() {
        if shape.roi_name().is_empty() {
            return Err(Error::Argument(format!("shape {n} has an empty ROI name")));
        }
        let (lo, hi) = shape.index_bounds(grid)?;
        for a in 0..3 {
            if lo[a] < -0.5 - EXTENT_SLACK || hi[a] > dims[a] as f64 - 0.5 + EXTENT_SLACK {
                return Err(Error::Argument(format!(
                    "shape {n} ('{}') extends outside the grid",
                    shape.roi_name()
                )));
            }
        }
    }

    let mut roi_names: Vec<&str> = Vec::new();
    for s in &spec.shapes {
        if !roi_names.contains(&s.roi_name()) {
            roi_names.push(s.roi_name());
        }
    }

    let n = grid.voxel_count();
    let mut voxels = vec![spec.background; n];
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (lin, (v, o)) in voxels.iter_mut().zip(owner.iter_mut()).enumerate() {
        let idx = grid.index_of(lin);
        let p = grid.index_to_world(ContinuousIndex {
            i: idx.i as f64,
            j: idx.j as f64,
            k: idx.k as f64,
        });
        for shape in &spec.shapes {
            if shape.contains(grid, p) {
                *v = shape.intensity();
                *o = roi_names.iter().position(|r| *r == shape.roi_name());
            }
        }
    }

    let mut gt = SegmentationSet::new(
        spec.series_uid.clone(),
        grid.clone(),
        Provenance::now(Source::Manual),
    );
    for (r, name) in roi_names.iter().enumerate() {
        let mut mask = VoxelMask::new(grid.clone());
        for (lin, o) in owner.iter().enumerate() {
            if *o == Some(r) {
                mask.set_linear(lin, true);
            }
        }
        let color = DEFAULT_PALETTE[r % DEFAULT_PALETTE.len()];
        gt.add_roi(Roi::new(r as u32 + 1, *name, color), mask)?;
    }

    let series = ImageSeries {
        study_id: spec.study_uid.clone(),
        series_id: spec.series_uid.clone(),
        grid: grid.clone(),
        voxels,
        modality: spec.modality.clone(),
        patient_pseudonym: pseudonymize(&spec.patient_id),
    };
    let files = encode_series_files(&series);
    let manifest = PhantomManifest {
        spec: spec.clone(),
        files: files
            .iter()
            .enumerate()
            .map(|(k, f)| FileChecksum {
                name: Phantom::file_name(k),
                sha256: hex::encode(Sha256::digest(f)),
            })
            .collect(),
        ground_truth: SegmentationDocument::from_set(&gt),
    };
    Ok(Phantom {
        series,
        files,
        ground_truth: gt,
        manifest,
    })
}
