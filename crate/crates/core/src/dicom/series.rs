//! Assembling a 3D [`ImageSeries`] from per-slice Part-10 files.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::part10::{format_decimal, read_part10, tags, DataSetBuilder, CT_IMAGE_STORAGE};
use crate::error::{Error, Result};
use crate::geometry::{dot, Orientation, Spacing, VolumeGrid, WorldPoint};

/// Maximum deviation (mm) of slice positions from a uniform stack.
pub const SLICE_POSITION_TOLERANCE: f64 = 1e-3;

const SERIES_BLOB_MAGIC: &[u8; 8] = b"SEGSER01";

/// A CT-like volume with post-rescale signed 16-bit intensities stored in
/// mask storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSeries {
    pub study_id: String,
    pub series_id: String,
    pub grid: VolumeGrid,
    pub voxels: Vec<i16>,
    pub modality: String,
    pub patient_pseudonym: String,
}

/// Everything about a series except its voxels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesHeader {
    pub study_id: String,
    pub series_id: String,
    pub grid: VolumeGrid,
    pub modality: String,
    pub patient_pseudonym: String,
}

impl ImageSeries {
    pub fn header(&self) -> SeriesHeader {
        SeriesHeader {
            study_id: self.study_id.clone(),
            series_id: self.series_id.clone(),
            grid: self.grid.clone(),
            modality: self.modality.clone(),
            patient_pseudonym: self.patient_pseudonym.clone(),
        }
    }

    pub fn from_parts(header: SeriesHeader, voxels: Vec<i16>) -> Result<Self> {
        if voxels.len() != header.grid.voxel_count() {
            return Err(Error::Argument(format!(
                "series has {} voxels, grid needs {}",
                voxels.len(),
                header.grid.voxel_count()
            )));
        }
        Ok(Self {
            study_id: header.study_id,
            series_id: header.series_id,
            grid: header.grid,
            voxels,
            modality: header.modality,
            patient_pseudonym: header.patient_pseudonym,
        })
    }

    pub fn slice(&self, k: usize) -> Result<&[i16]> {
        if k >= self.grid.slices() {
            return Err(Error::NotFound(format!(
                "slice {k} (series has {})",
                self.grid.slices()
            )));
        }
        let n = self.grid.slice_len();
        Ok(&self.voxels[k * n..(k + 1) * n])
    }

    /// Little-endian voxel bytes.
    pub fn voxel_bytes(&self) -> Vec<u8> {
        self.voxels.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// Binary storage form: magic, header length (u32 LE), JSON header,
    /// then the voxels as i16 LE.
    pub fn to_blob(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let mut out = Vec::with_capacity(12 + header.len() + self.voxels.len() * 2);
        out.extend_from_slice(SERIES_BLOB_MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend(header);
        out.extend(self.voxel_bytes());
        out
    }

    pub fn from_blob(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != SERIES_BLOB_MAGIC {
            return Err(Error::Integrity(
                "series blob has a bad magic header".into(),
            ));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = bytes
            .get(12..12 + hlen)
            .ok_or_else(|| Error::Integrity("series blob header truncated".into()))?;
        let header: SeriesHeader = serde_json::from_slice(body)?;
        let raw = &bytes[12 + hlen..];
        if raw.len() != header.grid.voxel_count() * 2 {
            return Err(Error::Integrity(
                "series blob voxel payload has the wrong size".into(),
            ));
        }
        let voxels = raw
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]))
            .collect();
        Self::from_parts(header, voxels)
    }
}

/// Stable pseudonym for a patient identifier.
pub fn pseudonymize(patient_id: &str) -> String {
    if patient_id.starts_with("anon-") {
        return patient_id.to_string();
    }
    let digest = Sha256::digest(patient_id.as_bytes());
    format!("anon-{}", &hex::encode(digest)[..16])
}

struct SliceFile {
    series_uid: String,
    study_uid: String,
    sop_uid: String,
    modality: String,
    patient_id: String,
    rows: u16,
    cols: u16,
    pixel_spacing: [f64; 2],
    position: [f64; 3],
    orientation: [f64; 6],
    spacing_between: Option<f64>,
    thickness: Option<f64>,
    pixels: Vec<i16>,
}

fn parse_slice(bytes: &[u8]) -> Result<SliceFile> {
    let ds = read_part10(bytes)?;
    let sop_uid = ds.require_string(tags::SOP_INSTANCE_UID, "SOPInstanceUID")?;
    let series_uid = ds.require_string(tags::SERIES_INSTANCE_UID, "SeriesInstanceUID")?;
    let study_uid = ds.require_string(tags::STUDY_INSTANCE_UID, "StudyInstanceUID")?;
    let rows = ds.require_u16(tags::ROWS, "Rows")?;
    let cols = ds.require_u16(tags::COLUMNS, "Columns")?;
    let ps = ds.require_decimals(tags::PIXEL_SPACING, "PixelSpacing", 2)?;
    let ipp = ds.require_decimals(tags::IMAGE_POSITION_PATIENT, "ImagePositionPatient", 3)?;
    let iop = ds.require_decimals(
        tags::IMAGE_ORIENTATION_PATIENT,
        "ImageOrientationPatient",
        6,
    )?;
    let bits = ds.require_u16(tags::BITS_ALLOCATED, "BitsAllocated")?;
    if bits != 16 {
        return Err(Error::Unsupported(format!(
            "BitsAllocated = {bits}, only 16 is supported"
        )));
    }
    if let Some(spp) = ds.u16(tags::SAMPLES_PER_PIXEL)? {
        if spp != 1 {
            return Err(Error::Unsupported(format!("SamplesPerPixel = {spp}")));
        }
    }
    let signed = ds.u16(tags::PIXEL_REPRESENTATION)?.unwrap_or(0) == 1;
    let slope = first_decimal(&ds, tags::RESCALE_SLOPE)?.unwrap_or(1.0);
    let intercept = first_decimal(&ds, tags::RESCALE_INTERCEPT)?.unwrap_or(0.0);

    let data = &ds
        .get(tags::PIXEL_DATA)
        .ok_or_else(|| {
            Error::Parse(format!(
                "missing required tag {} PixelData",
                tags::PIXEL_DATA
            ))
        })?
        .value;
    let n = rows as usize * cols as usize;
    if data.len() < n * 2 {
        return Err(Error::Parse(format!(
            "PixelData holds {} bytes, expected {}",
            data.len(),
            n * 2
        )));
    }
    let identity = slope == 1.0 && intercept == 0.0;
    let pixels = data[..n * 2]
        .chunks_exact(2)
        .map(|c| {
            let raw = u16::from_le_bytes([c[0], c[1]]);
            let stored = if signed {
                raw as i16 as f64
            } else {
                raw as f64
            };
            if identity && signed {
                return Ok(raw as i16);
            }
            let v = (stored * slope + intercept).round();
            if v < i16::MIN as f64 || v > i16::MAX as f64 {
                return Err(Error::Parse(format!(
                    "rescaled intensity {v} does not fit in signed 16 bits"
                )));
            }
            Ok(v as i16)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SliceFile {
        series_uid,
        study_uid,
        sop_uid,
        modality: ds.string(tags::MODALITY).unwrap_or_default(),
        patient_id: ds.string(tags::PATIENT_ID).unwrap_or_default(),
        rows,
        cols,
        pixel_spacing: [ps[0], ps[1]],
        position: [ipp[0], ipp[1], ipp[2]],
        orientation: [iop[0], iop[1], iop[2], iop[3], iop[4], iop[5]],
        spacing_between: first_decimal(&ds, tags::SPACING_BETWEEN_SLICES)?,
        thickness: first_decimal(&ds, tags::SLICE_THICKNESS)?,
        pixels,
    })
}

fn first_decimal(ds: &super::DataSet, tag: super::Tag) -> Result<Option<f64>> {
    Ok(ds.decimals(tag)?.and_then(|v| v.first().copied()))
}

/// Parses one upload of Part-10 files into a single volume.
///
/// Slices are ordered by their position along the slice normal, so the
/// input order does not matter. The grid takes its in-plane geometry from
/// the slices and its origin from the first slice along the normal.
pub fn parse_series(files: &[Vec<u8>]) -> Result<ImageSeries> {
    if files.is_empty() {
        return Err(Error::Parse("no files in upload".into()));
    }
    let mut slices = files
        .par_iter()
        .map(|f| parse_slice(f))
        .collect::<Result<Vec<_>>>()?;

    let first = &slices[0];
    for s in &slices[1..] {
        if s.series_uid != first.series_uid {
            return Err(Error::MixedSeries(format!(
                "upload contains series {} and {}",
                first.series_uid, s.series_uid
            )));
        }
        if s.study_uid != first.study_uid {
            return Err(Error::MixedSeries(format!(
                "series {} spans studies {} and {}",
                s.series_uid, first.study_uid, s.study_uid
            )));
        }
        if (s.rows, s.cols) != (first.rows, first.cols)
            || s.pixel_spacing != first.pixel_spacing
            || s.orientation != first.orientation
        {
            return Err(Error::Geometry(format!(
                "slice {} does not share the series' in-plane geometry",
                s.sop_uid
            )));
        }
    }

    let o = first.orientation;
    let orientation = Orientation {
        row: [o[0], o[1], o[2]],
        col: [o[3], o[4], o[5]],
    };
    let normal = orientation.normal();
    let along = |s: &SliceFile| dot(&s.position, &normal);
    slices.sort_by(|a, b| {
        along(a)
            .total_cmp(&along(b))
            .then_with(|| a.sop_uid.cmp(&b.sop_uid))
    });

    let first = &slices[0];
    let base = first.position;
    for s in &slices[1..] {
        let d = [
            s.position[0] - base[0],
            s.position[1] - base[1],
            s.position[2] - base[2],
        ];
        let drift = dot(&d, &orientation.row)
            .abs()
            .max(dot(&d, &orientation.col).abs());
        if drift > SLICE_POSITION_TOLERANCE {
            return Err(Error::Geometry(format!(
                "slice {} is offset {drift} mm in-plane from the stack",
                s.sop_uid
            )));
        }
    }

    let slice_spacing = if slices.len() == 1 {
        first.spacing_between.or(first.thickness).unwrap_or(1.0)
    } else {
        let positions: Vec<f64> = slices.iter().map(along).collect();
        let measured =
            (positions[positions.len() - 1] - positions[0]) / (positions.len() - 1) as f64;
        for (n, w) in positions.windows(2).enumerate() {
            let step = w[1] - w[0];
            if step <= SLICE_POSITION_TOLERANCE {
                return Err(Error::Geometry(format!(
                    "slices {} and {} share a position",
                    slices[n].sop_uid,
                    slices[n + 1].sop_uid
                )));
            }
            if (step - measured).abs() > SLICE_POSITION_TOLERANCE {
                return Err(Error::Geometry(format!(
                    "non-uniform slice spacing: step {step} mm vs mean {measured} mm"
                )));
            }
        }
        match first.spacing_between {
            Some(declared) if (declared - measured).abs() <= SLICE_POSITION_TOLERANCE => declared,
            _ => measured,
        }
    };

    let grid = VolumeGrid::new(
        first.cols as usize,
        first.rows as usize,
        slices.len(),
        Spacing::new(
            first.pixel_spacing[0],
            first.pixel_spacing[1],
            slice_spacing,
        ),
        WorldPoint::from(base),
        orientation,
    )
    .map_err(|e| Error::Geometry(e.detail()))?;

    let mut voxels = Vec::with_capacity(grid.voxel_count());
    for s in &slices {
        voxels.extend_from_slice(&s.pixels);
    }
    Ok(ImageSeries {
        study_id: first.study_uid.clone(),
        series_id: first.series_uid.clone(),
        grid,
        modality: first.modality.clone(),
        patient_pseudonym: pseudonymize(&first.patient_id),
        voxels,
    })
}

/// `grid` with every spacing, origin and direction component rounded to
/// the value its DS string (at most 16 characters) reads back as.
///
/// A series on such a grid survives `encode_series_files` then
/// `parse_series` with a bit-identical grid.
pub fn representable_grid(grid: &VolumeGrid) -> Result<VolumeGrid> {
    let q = |v: f64| {
        format_decimal(v)
            .parse::<f64>()
            .expect("formatted decimal parses")
    };
    let s = grid.spacing();
    let o = grid.origin();
    let d = grid.orientation();
    VolumeGrid::new(
        grid.cols(),
        grid.rows(),
        grid.slices(),
        Spacing::new(q(s.row), q(s.col), q(s.slice)),
        WorldPoint::new(q(o.x), q(o.y), q(o.z)),
        Orientation {
            row: d.row.map(q),
            col: d.col.map(q),
        },
    )
}

/// Writes `series` as one Part-10 file per slice.
///
/// Intensities are stored signed with an identity rescale, so
/// `parse_series` reproduces the voxels exactly.
pub fn encode_series_files(series: &ImageSeries) -> Vec<Vec<u8>> {
    let g = &series.grid;
    let sp = g.spacing();
    let o = g.orientation();
    (0..g.slices())
        .map(|k| {
            let sop = format!("{}.{}", series.series_id, k + 1);
            let pos = g
                .voxel_to_world(crate::geometry::VoxelIndex::new(0, 0, k))
                .expect("slice in range");
            let pixels: Vec<u8> = series
                .slice(k)
                .expect("slice in range")
                .iter()
                .flat_map(|v| v.to_le_bytes())
                .collect();
            let mut b = DataSetBuilder::new();
            b.uid(tags::SOP_CLASS_UID, CT_IMAGE_STORAGE)
                .uid(tags::SOP_INSTANCE_UID, &sop)
                .text(tags::MODALITY, b"CS", &series.modality)
                .text(tags::PATIENT_ID, b"LO", &series.patient_pseudonym)
                .ds(tags::SLICE_THICKNESS, &[sp.slice])
                .ds(tags::SPACING_BETWEEN_SLICES, &[sp.slice])
                .uid(tags::STUDY_INSTANCE_UID, &series.study_id)
                .uid(tags::SERIES_INSTANCE_UID, &series.series_id)
                .is(tags::INSTANCE_NUMBER, k as i64 + 1)
                .ds(tags::IMAGE_POSITION_PATIENT, &[pos.x, pos.y, pos.z])
                .ds(
                    tags::IMAGE_ORIENTATION_PATIENT,
                    &[o.row[0], o.row[1], o.row[2], o.col[0], o.col[1], o.col[2]],
                )
                .us(tags::SAMPLES_PER_PIXEL, 1)
                .text(tags::PHOTOMETRIC_INTERPRETATION, b"CS", "MONOCHROME2")
                .us(tags::ROWS, g.rows() as u16)
                .us(tags::COLUMNS, g.cols() as u16)
                .ds(tags::PIXEL_SPACING, &[sp.row, sp.col])
                .us(tags::BITS_ALLOCATED, 16)
                .us(tags::BITS_STORED, 16)
                .us(tags::HIGH_BIT, 15)
                .us(tags::PIXEL_REPRESENTATION, 1)
                .ds(tags::RESCALE_INTERCEPT, &[0.0])
                .ds(tags::RESCALE_SLOPE, &[1.0])
                .ow(tags::PIXEL_DATA, pixels);
            b.to_part10(CT_IMAGE_STORAGE, &sop)
        })
        .collect()
}
