//! Volume coordinate frame.
//!
//! A [`VolumeGrid`] maps voxel indices `(i, j, k)` (column, row, slice) to
//! patient-frame millimetres. Positions always refer to voxel centers, the
//! same convention as DICOM ImagePositionPatient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for unit-norm and orthogonality checks on direction cosines.
pub const ORIENTATION_TOLERANCE: f64 = 1e-6;

/// A point in the patient frame, in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub(crate) fn sub(&self, other: &WorldPoint) -> [f64; 3] {
        [self.x - other.x, self.y - other.y, self.z - other.z]
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        let d = self.sub(other);
        dot(&d, &d).sqrt()
    }
}

impl From<[f64; 3]> for WorldPoint {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<WorldPoint> for [f64; 3] {
    fn from(p: WorldPoint) -> Self {
        [p.x, p.y, p.z]
    }
}

/// Integer voxel address: `i` column, `j` row, `k` slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct VoxelIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl VoxelIndex {
    pub const fn new(i: usize, j: usize, k: usize) -> Self {
        Self { i, j, k }
    }
}

impl From<[usize; 3]> for VoxelIndex {
    fn from(v: [usize; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<VoxelIndex> for [usize; 3] {
    fn from(v: VoxelIndex) -> Self {
        [v.i, v.j, v.k]
    }
}

/// Real-valued index coordinates; integer values land on voxel centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousIndex {
    pub i: f64,
    pub j: f64,
    pub k: f64,
}

/// Voxel pitch in millimetres.
///
/// `row` is the distance between adjacent rows and `col` the distance between
/// adjacent columns, in the order of the DICOM PixelSpacing attribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spacing {
    pub row: f64,
    pub col: f64,
    pub slice: f64,
}

impl Spacing {
    pub const fn new(row: f64, col: f64, slice: f64) -> Self {
        Self { row, col, slice }
    }

    pub const fn isotropic(mm: f64) -> Self {
        Self::new(mm, mm, mm)
    }
}

/// Direction cosines of the image axes.
///
/// `row` points along a row, i.e. the direction of increasing column index
/// `i`; `col` points down a column (increasing row index `j`). These are the
/// two triples of DICOM ImageOrientationPatient, in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    pub row: [f64; 3],
    pub col: [f64; 3],
}

impl Orientation {
    pub const AXIAL: Orientation = Orientation {
        row: [1.0, 0.0, 0.0],
        col: [0.0, 1.0, 0.0],
    };

    /// Slice normal, `row × col`.
    pub fn normal(&self) -> [f64; 3] {
        cross(&self.row, &self.col)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("row", &self.row), ("col", &self.col)] {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Argument(format!("{name} direction is not finite")));
            }
            let norm = dot(v, v).sqrt();
            if (norm - 1.0).abs() > ORIENTATION_TOLERANCE {
                return Err(Error::Argument(format!(
                    "{name} direction is not unit length (norm {norm})"
                )));
            }
        }
        let d = dot(&self.row, &self.col);
        if d.abs() > ORIENTATION_TOLERANCE {
            return Err(Error::Argument(format!(
                "row and column directions are not orthogonal (dot {d})"
            )));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawGrid {
    cols: usize,
    rows: usize,
    slices: usize,
    spacing: Spacing,
    origin: WorldPoint,
    orientation: Orientation,
}

/// Geometry of an image volume.
///
/// Constructed only through [`VolumeGrid::new`] (or deserialization, which
/// runs the same validation), so every value satisfies the grid invariants.
/// Equality is exact field equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct VolumeGrid {
    cols: usize,
    rows: usize,
    slices: usize,
    spacing: Spacing,
    origin: WorldPoint,
    orientation: Orientation,
    #[serde(skip)]
    normal: [f64; 3],
}

impl TryFrom<RawGrid> for VolumeGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        VolumeGrid::new(
            raw.cols,
            raw.rows,
            raw.slices,
            raw.spacing,
            raw.origin,
            raw.orientation,
        )
    }
}

impl VolumeGrid {
    pub fn new(
        cols: usize,
        rows: usize,
        slices: usize,
        spacing: Spacing,
        origin: WorldPoint,
        orientation: Orientation,
    ) -> Result<Self> {
        if cols == 0 || rows == 0 || slices == 0 {
            return Err(Error::Argument(format!(
                "grid dimensions must be >= 1, got {cols}x{rows}x{slices}"
            )));
        }
        cols.checked_mul(rows)
            .and_then(|n| n.checked_mul(slices))
            .ok_or_else(|| Error::Argument("grid voxel count overflows".into()))?;
        for (name, s) in [
            ("row", spacing.row),
            ("col", spacing.col),
            ("slice", spacing.slice),
        ] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Argument(format!(
                    "{name} spacing must be positive, got {s}"
                )));
            }
        }
        if !origin.is_finite() {
            return Err(Error::Argument("origin is not finite".into()));
        }
        orientation.validate()?;
        Ok(Self {
            cols,
            rows,
            slices,
            spacing,
            origin,
            normal: orientation.normal(),
            orientation,
        })
    }

    /// Axial grid (identity orientation).
    pub fn axial(dims: [usize; 3], spacing: Spacing, origin: WorldPoint) -> Result<Self> {
        Self::new(
            dims[0],
            dims[1],
            dims[2],
            spacing,
            origin,
            Orientation::AXIAL,
        )
    }

    /// 1 mm isotropic axial grid with its first voxel at the world origin.
    pub fn identity(cols: usize, rows: usize, slices: usize) -> Result<Self> {
        Self::axial(
            [cols, rows, slices],
            Spacing::isotropic(1.0),
            WorldPoint::new(0.0, 0.0, 0.0),
        )
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    /// `[cols, rows, slices]`.
    pub fn dims(&self) -> [usize; 3] {
        [self.cols, self.rows, self.slices]
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn origin(&self) -> WorldPoint {
        self.origin
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn normal(&self) -> [f64; 3] {
        self.normal
    }

    pub fn voxel_count(&self) -> usize {
        self.cols * self.rows * self.slices
    }

    pub fn slice_len(&self) -> usize {
        self.cols * self.rows
    }

    /// Volume of one voxel in mm³.
    pub fn voxel_volume(&self) -> f64 {
        self.spacing.row * self.spacing.col * self.spacing.slice
    }

    pub fn contains(&self, v: VoxelIndex) -> bool {
        v.i < self.cols && v.j < self.rows && v.k < self.slices
    }

    /// Linear offset in storage order (i fastest, then j, then k).
    pub fn linear_index(&self, v: VoxelIndex) -> usize {
        v.i + self.cols * (v.j + self.rows * v.k)
    }

    pub fn index_of(&self, linear: usize) -> VoxelIndex {
        let i = linear % self.cols;
        let rest = linear / self.cols;
        VoxelIndex::new(i, rest % self.rows, rest / self.rows)
    }

    /// World position of the center of voxel `v`.
    pub fn voxel_to_world(&self, v: VoxelIndex) -> Result<WorldPoint> {
        if !self.contains(v) {
            return Err(Error::Bounds(format!(
                "voxel ({}, {}, {}) outside {}x{}x{} grid",
                v.i, v.j, v.k, self.cols, self.rows, self.slices
            )));
        }
        Ok(self.index_to_world(ContinuousIndex {
            i: v.i as f64,
            j: v.j as f64,
            k: v.k as f64,
        }))
    }

    pub fn index_to_world(&self, c: ContinuousIndex) -> WorldPoint {
        let a = c.i * self.spacing.col;
        let b = c.j * self.spacing.row;
        let s = c.k * self.spacing.slice;
        let r = &self.orientation.row;
        let q = &self.orientation.col;
        let n = &self.normal;
        WorldPoint::new(
            self.origin.x + a * r[0] + b * q[0] + s * n[0],
            self.origin.y + a * r[1] + b * q[1] + s * n[1],
            self.origin.z + a * r[2] + b * q[2] + s * n[2],
        )
    }

    /// Continuous index of `p`: the inverse of [`Self::index_to_world`].
    pub fn world_to_voxel(&self, p: WorldPoint) -> ContinuousIndex {
        let [a, b, s] = self.frame_offsets(p);
        ContinuousIndex {
            i: a / self.spacing.col,
            j: b / self.spacing.row,
            k: s / self.spacing.slice,
        }
    }

    /// Nearest voxel to `p`, rounding half away from zero on each axis.
    pub fn nearest_voxel(&self, p: WorldPoint) -> Result<VoxelIndex> {
        let c = self.world_to_voxel(p);
        let (ri, rj, rk) = (c.i.round(), c.j.round(), c.k.round());
        let in_range = |v: f64, n: usize| v >= 0.0 && v < n as f64;
        if in_range(ri, self.cols) && in_range(rj, self.rows) && in_range(rk, self.slices) {
            Ok(VoxelIndex::new(ri as usize, rj as usize, rk as usize))
        } else {
            Err(Error::Bounds(format!(
                "point ({}, {}, {}) rounds to ({ri}, {rj}, {rk}), outside the grid",
                p.x, p.y, p.z
            )))
        }
    }

    /// Offsets of `p` from the origin along the row, column and normal
    /// directions, in mm.
    pub(crate) fn frame_offsets(&self, p: WorldPoint) -> [f64; 3] {
        let d = p.sub(&self.origin);
        [
            dot(&d, &self.orientation.row),
            dot(&d, &self.orientation.col),
            dot(&d, &self.normal),
        ]
    }
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> WorldPoint {
        WorldPoint::new(x, y, z)
    }

    #[test]
    fn identity_frame_maps_index_to_mm() {
        let g = VolumeGrid::identity(8, 8, 8).unwrap();
        assert_eq!(
            g.voxel_to_world(VoxelIndex::new(3, 4, 5)).unwrap(),
            p(3.0, 4.0, 5.0)
        );
    }

    #[test]
    fn offset_anisotropic_frame() {
        let g =
            VolumeGrid::axial([4, 4, 4], Spacing::new(0.5, 0.5, 2.0), p(10.0, 20.0, 30.0)).unwrap();
        assert_eq!(
            g.voxel_to_world(VoxelIndex::new(2, 2, 2)).unwrap(),
            p(11.0, 21.0, 34.0)
        );
    }

    #[test]
    fn out_of_bounds_index_is_rejected() {
        let g = VolumeGrid::identity(5, 6, 7).unwrap();
        assert!(matches!(
            g.voxel_to_world(VoxelIndex::new(5, 0, 0)),
            Err(Error::Bounds(_))
        ));
    }

    #[test]
    fn world_to_voxel_identity() {
        let g = VolumeGrid::identity(8, 8, 8).unwrap();
        let c = g.world_to_voxel(p(3.0, 4.0, 5.0));
        assert_eq!((c.i, c.j, c.k), (3.0, 4.0, 5.0));
    }

    #[test]
    fn nearest_voxel_rounds_half_away_from_zero() {
        let g = VolumeGrid::identity(8, 8, 8).unwrap();
        assert!(matches!(
            g.nearest_voxel(p(-0.6, 0.0, 0.0)),
            Err(Error::Bounds(_))
        ));
        // -0.5 rounds away from zero to -1: outside.
        assert!(g.nearest_voxel(p(-0.5, 0.0, 0.0)).is_err());
        assert_eq!(
            g.nearest_voxel(p(-0.4, 0.0, 0.0)).unwrap(),
            VoxelIndex::new(0, 0, 0)
        );
        assert_eq!(
            g.nearest_voxel(p(2.5, 1.5, 0.49)).unwrap(),
            VoxelIndex::new(3, 2, 0)
        );
        assert!(g.nearest_voxel(p(7.5, 0.0, 0.0)).is_err());
    }

    #[test]
    fn voxel_volume_is_product_of_spacings() {
        let o = p(0.0, 0.0, 0.0);
        let vol = |s| VolumeGrid::axial([1, 1, 1], s, o).unwrap().voxel_volume();
        assert_eq!(vol(Spacing::isotropic(1.0)), 1.0);
        assert_eq!(vol(Spacing::new(0.5, 0.5, 2.0)), 0.5);
        // 0.976562^2 = 0.953673339844; times 3.
        let v = vol(Spacing::new(0.976562, 0.976562, 3.0));
        assert!((v - 2.861020019532).abs() < 1e-12, "{v}");
    }

    #[test]
    fn invalid_grids_are_rejected() {
        let o = p(0.0, 0.0, 0.0);
        assert!(VolumeGrid::axial([0, 1, 1], Spacing::isotropic(1.0), o).is_err());
        assert!(VolumeGrid::axial([1, 1, 1], Spacing::new(1.0, -1.0, 1.0), o).is_err());
        let skew = Orientation {
            row: [1.0, 0.0, 0.0],
            col: [0.1, 1.0, 0.0],
        };
        assert!(VolumeGrid::new(1, 1, 1, Spacing::isotropic(1.0), o, skew).is_err());
        let long = Orientation {
            row: [1.001, 0.0, 0.0],
            col: [0.0, 1.0, 0.0],
        };
        assert!(VolumeGrid::new(1, 1, 1, Spacing::isotropic(1.0), o, long).is_err());
    }

    #[test]
    fn deserialization_validates() {
        let g = VolumeGrid::identity(2, 3, 4).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        let back: VolumeGrid = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
        let bad = json.replace("\"cols\":2", "\"cols\":0");
        assert!(serde_json::from_str::<VolumeGrid>(&bad).is_err());
    }

    #[test]
    fn linear_index_is_i_fastest() {
        let g = VolumeGrid::identity(3, 4, 5).unwrap();
        assert_eq!(g.linear_index(VoxelIndex::new(1, 0, 0)), 1);
        assert_eq!(g.linear_index(VoxelIndex::new(0, 1, 0)), 3);
        assert_eq!(g.linear_index(VoxelIndex::new(0, 0, 1)), 12);
        for n in 0..g.voxel_count() {
            assert_eq!(g.linear_index(g.index_of(n)), n);
        }
    }
}
