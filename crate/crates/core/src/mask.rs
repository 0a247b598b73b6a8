//! Binary voxel masks, the run-length codec, and brush editing.
//!
//! Bits are stored densely in `u64` words in storage order: column index
//! fastest, then row, then slice. Trailing bits past the voxel count are
//! always zero, so word-level popcounts are exact.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, VolumeGrid, VoxelIndex, WorldPoint};

const WORD: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMask {
    grid: VolumeGrid,
    words: Vec<u64>,
}

impl VoxelMask {
    /// All-clear mask on `grid`.
    pub fn new(grid: VolumeGrid) -> Self {
        let words = vec![0; grid.voxel_count().div_ceil(WORD)];
        Self { grid, words }
    }

    pub fn from_fn(grid: VolumeGrid, mut f: impl FnMut(VoxelIndex) -> bool) -> Self {
        let mut mask = Self::new(grid);
        for n in 0..mask.len() {
            if f(mask.grid.index_of(n)) {
                mask.set_linear(n, true);
            }
        }
        mask
    }

    /// Builds a mask from one flag per voxel in storage order.
    pub fn from_bits(grid: VolumeGrid, bits: &[bool]) -> Result<Self> {
        if bits.len() != grid.voxel_count() {
            return Err(Error::Argument(format!(
                "expected {} bits, got {}",
                grid.voxel_count(),
                bits.len()
            )));
        }
        let mut mask = Self::new(grid);
        for (n, &b) in bits.iter().enumerate() {
            if b {
                mask.set_linear(n, true);
            }
        }
        Ok(mask)
    }

    pub fn grid(&self) -> &VolumeGrid {
        &self.grid
    }

    /// Number of voxels (set or clear).
    pub fn len(&self) -> usize {
        self.grid.voxel_count()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn get(&self, v: VoxelIndex) -> bool {
        self.get_linear(self.grid.linear_index(v))
    }

    pub fn set(&mut self, v: VoxelIndex, value: bool) {
        assert!(self.grid.contains(v), "voxel {v:?} outside mask grid");
        let n = self.grid.linear_index(v);
        self.set_linear(n, value);
    }

    pub fn get_linear(&self, n: usize) -> bool {
        self.words[n / WORD] >> (n % WORD) & 1 == 1
    }

    pub fn set_linear(&mut self, n: usize, value: bool) {
        assert!(n < self.len(), "linear index {n} out of range");
        let bit = 1u64 << (n % WORD);
        if value {
            self.words[n / WORD] |= bit;
        } else {
            self.words[n / WORD] &= !bit;
        }
    }

    /// Number of set voxels.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Linear indices of all set voxels, ascending.
    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * WORD + b)
            })
        })
    }

    /// One flag per voxel in storage order.
    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.len()).map(|n| self.get_linear(n)).collect()
    }

    /// The set voxels of slice `k`, as one flag per pixel (column fastest).
    pub fn slice_bits(&self, k: usize) -> Vec<bool> {
        let start = k * self.grid.slice_len();
        (start..start + self.grid.slice_len())
            .map(|n| self.get_linear(n))
            .collect()
    }

    fn check_grid(&self, other: &VoxelMask) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(
                "masks are defined on different grids".into(),
            ));
        }
        Ok(())
    }

    fn zip_words(&self, other: &VoxelMask, op: impl Fn(u64, u64) -> u64) -> Result<VoxelMask> {
        self.check_grid(other)?;
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| op(a, b))
            .collect();
        Ok(VoxelMask {
            grid: self.grid.clone(),
            words,
        })
    }

    pub fn union(&self, other: &VoxelMask) -> Result<VoxelMask> {
        self.zip_words(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &VoxelMask) -> Result<VoxelMask> {
        self.zip_words(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &VoxelMask) -> Result<VoxelMask> {
        self.zip_words(other, |a, b| a & !b)
    }

    pub fn symmetric_difference(&self, other: &VoxelMask) -> Result<VoxelMask> {
        self.zip_words(other, |a, b| a ^ b)
    }

    /// `|self ∩ other|` without materializing the intersection.
    pub fn intersection_count(&self, other: &VoxelMask) -> Result<usize> {
        self.check_grid(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| (a & b).count_ones() as usize)
            .sum())
    }

    /// First linear index `>= from` whose bit equals `value`, or `len()`.
    fn next_with(&self, from: usize, value: bool) -> usize {
        let len = self.len();
        if from >= len {
            return len;
        }
        let mut wi = from / WORD;
        let flip = if value { 0 } else { u64::MAX };
        let mut w = (self.words[wi] ^ flip) & (u64::MAX << (from % WORD));
        loop {
            if w != 0 {
                return (wi * WORD + w.trailing_zeros() as usize).min(len);
            }
            wi += 1;
            if wi == self.words.len() {
                return len;
            }
            w = self.words[wi] ^ flip;
        }
    }

    pub fn stats(&self) -> MaskStats {
        mask_stats(self)
    }
}

/// Voxel count and physical volume of a mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskStats {
    pub voxel_count: usize,
    pub volume_mm3: f64,
}

pub fn mask_stats(mask: &VoxelMask) -> MaskStats {
    let voxel_count = mask.count();
    MaskStats {
        voxel_count,
        volume_mm3: voxel_count as f64 * mask.grid.voxel_volume(),
    }
}

/// Run-length encoding of a mask in storage order.
///
/// Runs alternate clear/set starting with a clear run; a mask whose first
/// voxel is set starts with a zero-length run. Encodings produced by
/// [`rle_encode`] contain no other zero-length runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RleRuns(pub Vec<u64>);

impl RleRuns {
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// True if the only zero-length run is a leading one.
    pub fn is_canonical(&self) -> bool {
        self.0.iter().skip(1).all(|&r| r > 0)
    }
}

pub fn rle_encode(mask: &VoxelMask) -> RleRuns {
    let len = mask.len();
    let mut runs = Vec::new();
    let mut pos = 0;
    let mut value = false;
    while pos < len {
        let next = mask.next_with(pos, !value);
        runs.push((next - pos) as u64);
        pos = next;
        value = !value;
    }
    RleRuns(runs)
}

pub fn rle_decode(runs: &RleRuns, grid: &VolumeGrid) -> Result<VoxelMask> {
    let expected = grid.voxel_count() as u64;
    let total = runs
        .0
        .iter()
        .try_fold(0u64, |acc, &r| acc.checked_add(r))
        .ok_or_else(|| Error::Codec("run lengths overflow".into()))?;
    if total != expected {
        return Err(Error::Codec(format!(
            "runs cover {total} voxels but the grid has {expected}"
        )));
    }
    let mut mask = VoxelMask::new(grid.clone());
    let mut pos = 0usize;
    for (n, &run) in runs.0.iter().enumerate() {
        let run = run as usize;
        if n % 2 == 1 {
            fill_range(&mut mask.words, pos, pos + run);
        }
        pos += run;
    }
    Ok(mask)
}

fn fill_range(words: &mut [u64], start: usize, end: usize) {
    let mut n = start;
    while n < end {
        let wi = n / WORD;
        let lo = n % WORD;
        let hi = (end - wi * WORD).min(WORD);
        let bits = if hi - lo == WORD {
            u64::MAX
        } else {
            ((1u64 << (hi - lo)) - 1) << lo
        };
        words[wi] |= bits;
        n = wi * WORD + hi;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrushShape {
    /// In-plane disk restricted to one slice.
    Disk {
        slice: usize,
    },
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrushMode {
    Paint,
    Erase,
}

/// One brush application. `radius` is in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrushStroke {
    pub center: WorldPoint,
    pub radius: f64,
    pub shape: BrushShape,
    pub mode: BrushMode,
}

/// Applies `stroke` to a copy of `mask`.
///
/// A voxel is affected iff the distance from its center to the brush center
/// is at most `radius` mm; disks use only the in-plane distance.
pub fn apply_brush(mask: &VoxelMask, stroke: &BrushStroke) -> Result<VoxelMask> {
    let mut out = mask.clone();
    brush_in_place(&mut out, stroke)?;
    Ok(out)
}

/// Applies a sequence of strokes in order, producing a new mask.
pub fn apply_strokes(mask: &VoxelMask, strokes: &[BrushStroke]) -> Result<VoxelMask> {
    let mut out = mask.clone();
    for s in strokes {
        brush_in_place(&mut out, s)?;
    }
    Ok(out)
}

fn brush_in_place(mask: &mut VoxelMask, stroke: &BrushStroke) -> Result<()> {
    let r = stroke.radius;
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Argument(format!(
            "brush radius must be finite and >= 0, got {r}"
        )));
    }
    if !stroke.center.is_finite() {
        return Err(Error::Argument("brush center is not finite".into()));
    }
    let grid = mask.grid.clone();
    let c = grid.world_to_voxel(stroke.center);
    let sp = grid.spacing();
    let r2 = r * r;

    // Index-space bounding box, padded by one voxel so rounding in the
    // division never drops a boundary voxel; the distance test decides.
    let axis = |center: f64, extent: f64, n: usize| -> Option<(usize, usize)> {
        let lo = (center - extent).floor() - 1.0;
        let hi = (center + extent).ceil() + 1.0;
        if hi < 0.0 || lo > (n - 1) as f64 {
            return None;
        }
        Some((lo.max(0.0) as usize, hi.min((n - 1) as f64) as usize))
    };
    let Some((i0, i1)) = axis(c.i, r / sp.col, grid.cols()) else {
        return Ok(());
    };
    let Some((j0, j1)) = axis(c.j, r / sp.row, grid.rows()) else {
        return Ok(());
    };
    let (k0, k1) = match stroke.shape {
        BrushShape::Disk { slice } => {
            if slice >= grid.slices() {
                return Err(Error::Argument(format!(
                    "disk slice {slice} outside grid with {} slices",
                    grid.slices()
                )));
            }
            (slice, slice)
        }
        BrushShape::Sphere => match axis(c.k, r / sp.slice, grid.slices()) {
            Some(range) => range,
            None => return Ok(()),
        },
    };

    let orient = grid.orientation();
    let paint = stroke.mode == BrushMode::Paint;
    for k in k0..=k1 {
        for j in j0..=j1 {
            for i in i0..=i1 {
                let v = VoxelIndex::new(i, j, k);
                let p = grid.index_to_world(crate::geometry::ContinuousIndex {
                    i: i as f64,
                    j: j as f64,
                    k: k as f64,
                });
                let d = p.sub(&stroke.center);
                let dist2 = match stroke.shape {
                    BrushShape::Sphere => dot(&d, &d),
                    BrushShape::Disk { .. } => {
                        let a = dot(&d, &orient.row);
                        let b = dot(&d, &orient.col);
                        a * a + b * b
                    }
                };
                if dist2 <= r2 {
                    let n = grid.linear_index(v);
                    mask.set_linear(n, paint);
                }
            }
        }
    }
    Ok(())
}

/// A named, colored region of interest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub number: u32,
    pub name: String,
    pub color: [u8; 3],
}

impl Roi {
    pub fn new(number: u32, name: impl Into<String>, color: [u8; 3]) -> Self {
        Self {
            number,
            name: name.into(),
            color,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoiMask {
    pub roi: Roi,
    pub mask: VoxelMask,
}

/// Where a segmentation version came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Manual,
    Model {
        model_id: String,
        model_version: String,
    },
    EditedFrom {
        version: u64,
    },
    /// XOR discrepancy masks derived from an evaluation.
    Discrepancy {
        pred_version: u64,
        gt_version: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Source,
    pub created_at: DateTime<Utc>,
}

impl Provenance {
    pub fn now(source: Source) -> Self {
        Self {
            source,
            created_at: Utc::now(),
        }
    }
}

/// A collection of ROI masks on one series grid, with version lineage.
///
/// `version` is 0 until the set is stored; the store assigns the real value.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationSet {
    pub series_ref: String,
    grid: VolumeGrid,
    rois: Vec<RoiMask>,
    pub version: u64,
    pub parent_version: Option<u64>,
    pub provenance: Provenance,
}

impl SegmentationSet {
    pub fn new(series_ref: impl Into<String>, grid: VolumeGrid, provenance: Provenance) -> Self {
        Self {
            series_ref: series_ref.into(),
            grid,
            rois: Vec::new(),
            version: 0,
            parent_version: None,
            provenance,
        }
    }

    pub fn grid(&self) -> &VolumeGrid {
        &self.grid
    }

    pub fn rois(&self) -> &[RoiMask] {
        &self.rois
    }

    pub fn add_roi(&mut self, roi: Roi, mask: VoxelMask) -> Result<()> {
        if roi.name.is_empty() {
            return Err(Error::Argument("ROI name must be nonempty".into()));
        }
        if roi.number == 0 {
            return Err(Error::Argument("ROI number must be positive".into()));
        }
        if self.rois.iter().any(|r| r.roi.number == roi.number) {
            return Err(Error::Argument(format!(
                "duplicate ROI number {}",
                roi.number
            )));
        }
        if mask.grid() != &self.grid {
            return Err(Error::GridMismatch(format!(
                "mask for ROI '{}' is not on the segmentation grid",
                roi.name
            )));
        }
        self.rois.push(RoiMask { roi, mask });
        Ok(())
    }

    pub fn roi_by_name(&self, name: &str) -> Option<&RoiMask> {
        self.rois.iter().find(|r| r.roi.name == name)
    }

    pub fn roi_by_number(&self, number: u32) -> Option<&RoiMask> {
        self.rois.iter().find(|r| r.roi.number == number)
    }

    pub(crate) fn roi_mut(&mut self, number: u32) -> Option<&mut RoiMask> {
        self.rois.iter_mut().find(|r| r.roi.number == number)
    }

    pub fn roi_names(&self) -> BTreeSet<&str> {
        self.rois.iter().map(|r| r.roi.name.as_str()).collect()
    }

    /// Copy with edited masks: same ROIs, `parent_version` set to this
    /// version and provenance `EditedFrom`.
    pub fn derive_edit(&self) -> SegmentationSet {
        SegmentationSet {
            series_ref: self.series_ref.clone(),
            grid: self.grid.clone(),
            rois: self.rois.clone(),
            version: 0,
            parent_version: Some(self.version),
            provenance: Provenance::now(Source::EditedFrom {
                version: self.version,
            }),
        }
    }

    /// Applies brush strokes to the ROI numbered `roi_number`.
    pub fn edit_roi(&mut self, roi_number: u32, strokes: &[BrushStroke]) -> Result<()> {
        let entry = self
            .roi_mut(roi_number)
            .ok_or_else(|| Error::NotFound(format!("ROI number {roi_number}")))?;
        entry.mask = apply_strokes(&entry.mask, strokes)?;
        Ok(())
    }
}
