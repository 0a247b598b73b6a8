//! Structure-set ingest and contour rasterization.
//!
//! The ingest format is a JSON rendering of a DICOM RT Structure Set:
//!
//! ```json
//! {
//!   "format": "segstudio.structure-set/1",
//!   "series_ref": "1.2.3.4",
//!   "rois": [ { "number": 1, "name": "liver", "color": [255, 0, 0] } ],
//!   "contours": [
//!     { "roi_number": 1,
//!       "points": [[-0.25, -0.25, 0.0], [2.25, -0.25, 0.0],
//!                  [2.25, 2.25, 0.0], [-0.25, 2.25, 0.0]] }
//!   ]
//! }
//! ```
//!
//! `rois` mirrors StructureSetROISequence (3006,0020): ROINumber and ROIName.
//! `contours` flattens ROIContourSequence (3006,0039): each ContourSequence
//! item becomes one entry carrying its ReferencedROINumber (3006,0084) and
//! ContourData (3006,0050) regrouped as `[x, y, z]` triples in patient mm.
//! ROIDisplayColor (3006,002A) goes on the ROI entry. Polygons are
//! implicitly closed.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{VolumeGrid, WorldPoint};
use crate::mask::{Provenance, Roi, SegmentationSet, Source, VoxelMask};

pub const STRUCTURE_SET_FORMAT: &str = "segstudio.structure-set/1";

/// Maximum distance (mm) of any vertex from its contour's mean plane.
pub const COPLANAR_TOLERANCE: f64 = 1e-3;

/// Colors handed out to ROIs that do not specify one.
pub const DEFAULT_PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
];

/// One closed planar polygon belonging to an ROI.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub roi_number: u32,
    pub vertices: Vec<WorldPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourSet {
    pub series_ref: String,
    rois: Vec<(Roi, Vec<Contour>)>,
}

impl ContourSet {
    /// Groups `contours` under their ROIs; fails on a dangling ROI number.
    pub fn new(
        series_ref: impl Into<String>,
        rois: Vec<Roi>,
        contours: Vec<Contour>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for roi in &rois {
            if roi.name.is_empty() {
                return Err(Error::Parse(format!(
                    "ROI {} has an empty name",
                    roi.number
                )));
            }
            if !seen.insert(roi.number) {
                return Err(Error::Parse(format!("duplicate ROI number {}", roi.number)));
            }
        }
        let mut grouped: Vec<(Roi, Vec<Contour>)> =
            rois.into_iter().map(|r| (r, Vec::new())).collect();
        for c in contours {
            if c.vertices.len() < 3 {
                return Err(Error::Parse(format!(
                    "contour for ROI {} has {} vertices, need at least 3",
                    c.roi_number,
                    c.vertices.len()
                )));
            }
            let slot = grouped
                .iter_mut()
                .find(|(r, _)| r.number == c.roi_number)
                .ok_or_else(|| {
                    Error::Parse(format!(
                        "contour references undeclared ROI {}",
                        c.roi_number
                    ))
                })?;
            slot.1.push(c);
        }
        Ok(Self {
            series_ref: series_ref.into(),
            rois: grouped,
        })
    }

    pub fn empty(series_ref: impl Into<String>) -> Self {
        Self {
            series_ref: series_ref.into(),
            rois: Vec::new(),
        }
    }

    pub fn rois(&self) -> &[(Roi, Vec<Contour>)] {
        &self.rois
    }

    pub fn contour_count(&self) -> usize {
        self.rois.iter().map(|(_, c)| c.len()).sum()
    }
}

#[derive(Deserialize)]
struct RawStructureSet {
    format: Option<String>,
    #[serde(default)]
    series_ref: String,
    #[serde(default)]
    rois: Vec<RawRoi>,
    #[serde(default)]
    contours: Vec<RawContour>,
}

#[derive(Deserialize)]
struct RawRoi {
    number: u32,
    name: Option<String>,
    color: Option<[u8; 3]>,
}

#[derive(Deserialize)]
struct RawContour {
    roi_number: u32,
    points: Vec<[f64; 3]>,
}

/// Parses a structure-set document (see the module docs for the format).
pub fn parse_structure_set(payload: &[u8]) -> Result<ContourSet> {
    let raw: RawStructureSet = serde_json::from_slice(payload)?;
    if let Some(f) = &raw.format {
        if f != STRUCTURE_SET_FORMAT {
            return Err(Error::Unsupported(format!("structure-set format '{f}'")));
        }
    }
    let mut rois = Vec::with_capacity(raw.rois.len());
    for (n, r) in raw.rois.into_iter().enumerate() {
        let name = r
            .name
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Parse(format!("ROI {} has no name", r.number)))?;
        let color = r
            .color
            .unwrap_or(DEFAULT_PALETTE[n % DEFAULT_PALETTE.len()]);
        rois.push(Roi::new(r.number, name, color));
    }
    let contours = raw
        .contours
        .into_iter()
        .map(|c| Contour {
            roi_number: c.roi_number,
            vertices: c.points.into_iter().map(WorldPoint::from).collect(),
        })
        .collect();
    ContourSet::new(raw.series_ref, rois, contours)
}

/// A polygon in in-plane slice coordinates (mm along the row and column
/// directions from the grid origin).
type Polygon = Vec<(f64, f64)>;

/// Rasterizes every ROI onto `grid`.
///
/// A voxel is set iff its center lies inside the union of its slice's
/// polygons under the even-odd rule, so nested contours carve holes. Each
/// contour is assigned to the nearest slice.
pub fn rasterize_contours(cs: &ContourSet, grid: &VolumeGrid) -> Result<SegmentationSet> {
    let masks: Vec<Result<VoxelMask>> = cs
        .rois
        .par_iter()
        .map(|(_, contours)| rasterize_roi(contours, grid))
        .collect();
    let mut set = SegmentationSet::new(
        cs.series_ref.clone(),
        grid.clone(),
        Provenance::now(Source::Manual),
    );
    for ((roi, _), mask) in cs.rois.iter().zip(masks) {
        set.add_roi(roi.clone(), mask?)?;
    }
    Ok(set)
}

fn rasterize_roi(contours: &[Contour], grid: &VolumeGrid) -> Result<VoxelMask> {
    let mut by_slice: BTreeMap<usize, Vec<Polygon>> = BTreeMap::new();
    for c in contours {
        let (k, poly) = project_contour(c, grid)?;
        by_slice.entry(k).or_default().push(poly);
    }
    let mut mask = VoxelMask::new(grid.clone());
    for (k, polys) in by_slice {
        fill_slice(&mut mask, k, &polys);
    }
    Ok(mask)
}

fn project_contour(c: &Contour, grid: &VolumeGrid) -> Result<(usize, Polygon)> {
    let offsets: Vec<[f64; 3]> = c.vertices.iter().map(|v| grid.frame_offsets(*v)).collect();
    let mean = offsets.iter().map(|o| o[2]).sum::<f64>() / offsets.len() as f64;
    if let Some(o) = offsets
        .iter()
        .find(|o| (o[2] - mean).abs() > COPLANAR_TOLERANCE)
    {
        return Err(Error::Geometry(format!(
            "contour for ROI {} is not planar: vertex {} mm off its plane",
            c.roi_number,
            (o[2] - mean).abs()
        )));
    }
    let ks = mean / grid.spacing().slice;
    let k = ks.round();
    if k < 0.0 || k >= grid.slices() as f64 || (ks - k).abs() > 0.5 {
        return Err(Error::Geometry(format!(
            "contour for ROI {} lies at slice position {ks:.3}, more than half a slice from the grid",
            c.roi_number
        )));
    }
    Ok((k as usize, offsets.iter().map(|o| (o[0], o[1])).collect()))
}

/// Even-odd scanline fill of one slice, sampling pixel centers.
///
/// An edge crosses scanline `y` iff `y` is in `[min_y, max_y)` (lower
/// endpoint included, upper excluded); a center is inside iff an odd number
/// of crossings lie strictly to its right.
fn fill_slice(mask: &mut VoxelMask, k: usize, polys: &[Polygon]) {
    let grid = mask.grid().clone();
    let (cs, rs) = (grid.spacing().col, grid.spacing().row);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in polys.iter().flatten() {
        ymin = ymin.min(p.1);
        ymax = ymax.max(p.1);
    }
    let j0 = ((ymin / rs).floor().max(0.0)) as usize;
    let j1 = ((ymax / rs).ceil().min((grid.rows() - 1) as f64)).max(0.0) as usize;
    let mut xs = Vec::new();
    for j in j0..=j1 {
        let y = j as f64 * rs;
        xs.clear();
        for poly in polys {
            let n = poly.len();
            for e in 0..n {
                let (x0, y0) = poly[e];
                let (x1, y1) = poly[(e + 1) % n];
                if (y0 > y) != (y1 > y) {
                    xs.push(edge_crossing_x(x0, y0, x1, y1, y));
                }
            }
        }
        if xs.is_empty() {
            continue;
        }
        xs.sort_by(f64::total_cmp);
        // Walk columns left to right; `right` counts crossings with x > center.
        let mut consumed = 0;
        for i in 0..grid.cols() {
            let x = i as f64 * cs;
            while consumed < xs.len() && xs[consumed] <= x {
                consumed += 1;
            }
            if consumed == xs.len() {
                break;
            }
            let right = xs.len() - consumed;
            if right % 2 == 1 {
                let n = grid.linear_index(crate::geometry::VoxelIndex::new(i, j, k));
                mask.set_linear(n, true);
            }
        }
    }
}

#[inline]
pub(crate) fn edge_crossing_x(x0: f64, y0: f64, x1: f64, y1: f64, y: f64) -> f64 {
    x0 + (y - y0) * (x1 - x0) / (y1 - y0)
}
