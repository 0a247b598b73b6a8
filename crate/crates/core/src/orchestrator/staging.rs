//! Executor workspace layout.
//!
//! ```text
//! <workspace>/
//!   input/volume.bin    voxels, i16 little-endian, i fastest then j then k
//!   input/series.meta   JSON series header (ids, modality, grid)
//!   output/labels.bin   one u16 little-endian label per voxel, same order
//!   output/labels.meta  JSON {"dims": [cols, rows, slices], "format": "u16le"}
//! ```
//!
//! Label 0 is background; other labels map to ROIs through the model's
//! label map. An external model reads `input/` and writes `output/`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dicom::series::{ImageSeries, SeriesHeader};
use crate::error::{Error, Result};

pub const INPUT_DIR: &str = "input";
pub const OUTPUT_DIR: &str = "output";
pub const VOLUME_FILE: &str = "volume.bin";
pub const SERIES_META: &str = "series.meta";
pub const LABELS_FILE: &str = "labels.bin";
pub const LABELS_META: &str = "labels.meta";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelsMeta {
    pub dims: [usize; 3],
    pub format: String,
}

pub fn input_dir(workspace: &Path) -> PathBuf {
    workspace.join(INPUT_DIR)
}

pub fn output_dir(workspace: &Path) -> PathBuf {
    workspace.join(OUTPUT_DIR)
}

/// Creates the workspace with empty `input/` and `output/`.
pub fn prepare(workspace: &Path) -> Result<()> {
    for d in [input_dir(workspace), output_dir(workspace)] {
        fs::create_dir_all(&d).map_err(Error::io(format!("creating {}", d.display())))?;
    }
    Ok(())
}

/// Removes everything inside `dir`, keeping `dir` itself.
pub fn clear_dir(dir: &Path) -> Result<()> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(Error::io(format!("listing {}", dir.display()))(e)),
    };
    for entry in entries {
        let entry = entry.map_err(Error::io(format!("listing {}", dir.display())))?;
        let path = entry.path();
        let res = if entry.file_type().map(|t| t.is_dir()).unwrap_or(false) {
            fs::remove_dir_all(&path)
        } else {
            fs::remove_file(&path)
        };
        res.map_err(Error::io(format!("removing {}", path.display())))?;
    }
    Ok(())
}

/// True when `dir` is missing or has no entries.
pub fn is_empty_dir(dir: &Path) -> bool {
    fs::read_dir(dir)
        .map(|mut d| d.next().is_none())
        .unwrap_or(true)
}

pub fn stage_series(workspace: &Path, series: &ImageSeries) -> Result<PathBuf> {
    let dir = input_dir(workspace);
    fs::create_dir_all(&dir).map_err(Error::io(format!("creating {}", dir.display())))?;
    let volume = dir.join(VOLUME_FILE);
    fs::write(&volume, series.voxel_bytes())
        .map_err(Error::io(format!("writing {}", volume.display())))?;
    let meta = dir.join(SERIES_META);
    let header = serde_json::to_vec_pretty(&series.header()).expect("header serializes");
    fs::write(&meta, header).map_err(Error::io(format!("writing {}", meta.display())))?;
    Ok(dir)
}

pub fn read_staged_series(workspace: &Path) -> Result<ImageSeries> {
    let dir = input_dir(workspace);
    let meta = fs::read(dir.join(SERIES_META)).map_err(Error::io("reading staged series.meta"))?;
    let header: SeriesHeader = serde_json::from_slice(&meta)?;
    let raw = fs::read(dir.join(VOLUME_FILE)).map_err(Error::io("reading staged volume.bin"))?;
    if raw.len() % 2 != 0 {
        return Err(Error::Parse("volume.bin has an odd byte count".into()));
    }
    let voxels = raw
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    ImageSeries::from_parts(header, voxels)
}

pub fn write_labels(workspace: &Path, dims: [usize; 3], labels: &[u16]) -> Result<()> {
    let dir = output_dir(workspace);
    fs::create_dir_all(&dir).map_err(Error::io(format!("creating {}", dir.display())))?;
    let bytes: Vec<u8> = labels.iter().flat_map(|l| l.to_le_bytes()).collect();
    fs::write(dir.join(LABELS_FILE), bytes).map_err(Error::io("writing labels.bin"))?;
    let meta = LabelsMeta {
        dims,
        format: "u16le".into(),
    };
    fs::write(
        dir.join(LABELS_META),
        serde_json::to_vec(&meta).expect("meta serializes"),
    )
    .map_err(Error::io("writing labels.meta"))
}

/// Reads the model output and checks it against the expected dimensions.
pub fn read_labels(workspace: &Path, dims: [usize; 3]) -> Result<Vec<u16>> {
    let dir = output_dir(workspace);
    let meta = fs::read(dir.join(LABELS_META))
        .map_err(|e| Error::Executor(format!("model produced no labels.meta: {e}")))?;
    let meta: LabelsMeta = serde_json::from_slice(&meta)?;
    if meta.format != "u16le" {
        return Err(Error::Unsupported(format!(
            "label format '{}'",
            meta.format
        )));
    }
    if meta.dims != dims {
        return Err(Error::GridMismatch(format!(
            "labels have dims {:?}, series has {:?}",
            meta.dims, dims
        )));
    }
    let raw = fs::read(dir.join(LABELS_FILE))
        .map_err(|e| Error::Executor(format!("model produced no labels.bin: {e}")))?;
    let n = dims.iter().product::<usize>();
    if raw.len() != n * 2 {
        return Err(Error::Parse(format!(
            "labels.bin has {} bytes, expected {}",
            raw.len(),
            n * 2
        )));
    }
    Ok(raw
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::{generate_phantom, PhantomSpec};

    #[test]
    fn staging_roundtrip() {
        let ws = tempfile::tempdir().unwrap();
        let p = generate_phantom(&PhantomSpec::sphere(6, 2.0, 500, "1.2")).unwrap();
        prepare(ws.path()).unwrap();
        stage_series(ws.path(), &p.series).unwrap();
        assert_eq!(read_staged_series(ws.path()).unwrap(), p.series);

        let labels: Vec<u16> = (0..216).map(|n| (n % 3) as u16).collect();
        write_labels(ws.path(), [6, 6, 6], &labels).unwrap();
        assert_eq!(read_labels(ws.path(), [6, 6, 6]).unwrap(), labels);
        assert!(matches!(
            read_labels(ws.path(), [6, 6, 5]),
            Err(Error::GridMismatch(_))
        ));

        clear_dir(ws.path()).unwrap();
        assert!(is_empty_dir(ws.path()));
        assert!(ws.path().exists());
    }
}
