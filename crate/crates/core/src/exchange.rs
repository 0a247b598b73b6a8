//! Segmentation exchange document.
//!
//! The JSON form of a [`SegmentationSet`] used on the wire, in the store and
//! inside export bundles:
//!
//! ```json
//! {
//!   "format": "segstudio.segmentation/1",
//!   "series_id": "1.2.826.0.1.3680043.9.7433.1",
//!   "grid": { "cols": 32, "rows": 32, "slices": 32,
//!             "spacing": { "row": 1.0, "col": 1.0, "slice": 1.0 },
//!             "origin": [0.0, 0.0, 0.0],
//!             "orientation": { "row": [1.0, 0.0, 0.0], "col": [0.0, 1.0, 0.0] } },
//!   "version": 2,
//!   "parent_version": 1,
//!   "provenance": { "source": { "kind": "edited_from", "version": 1 },
//!                   "created_at": "2024-01-01T00:00:00Z" },
//!   "rois": [ { "number": 1, "name": "liver", "color": [255, 0, 0],
//!               "rle": [40, 3, 16341] } ]
//! }
//! ```
//!
//! `rle` uses the mask run-length convention (clear run first, column index
//! fastest). Encoding is deterministic, so equal sets encode to equal bytes.
//! On upload `version`, `parent_version` and `provenance` may be omitted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VolumeGrid;
use crate::mask::{rle_decode, rle_encode, Provenance, RleRuns, Roi, SegmentationSet, Source};

pub const SEGMENTATION_FORMAT: &str = "segstudio.segmentation/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiDocument {
    pub number: u32,
    pub name: String,
    pub color: [u8; 3],
    pub rle: RleRuns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationDocument {
    pub format: String,
    pub series_id: String,
    pub grid: VolumeGrid,
    #[serde(default)]
    pub version: u64,
    #[serde(default)]
    pub parent_version: Option<u64>,
    #[serde(default)]
    pub provenance: Option<Provenance>,
    pub rois: Vec<RoiDocument>,
}

impl SegmentationDocument {
    pub fn from_set(set: &SegmentationSet) -> Self {
        Self {
            format: SEGMENTATION_FORMAT.to_string(),
            series_id: set.series_ref.clone(),
            grid: set.grid().clone(),
            version: set.version,
            parent_version: set.parent_version,
            provenance: Some(set.provenance.clone()),
            rois: set
                .rois()
                .iter()
                .map(|r| RoiDocument {
                    number: r.roi.number,
                    name: r.roi.name.clone(),
                    color: r.roi.color,
                    rle: rle_encode(&r.mask),
                })
                .collect(),
        }
    }

    pub fn into_set(self) -> Result<SegmentationSet> {
        if self.format != SEGMENTATION_FORMAT {
            return Err(Error::Unsupported(format!(
                "segmentation format '{}', expected '{SEGMENTATION_FORMAT}'",
                self.format
            )));
        }
        let provenance = self
            .provenance
            .unwrap_or_else(|| Provenance::now(Source::Manual));
        let mut set = SegmentationSet::new(self.series_id, self.grid, provenance);
        set.version = self.version;
        set.parent_version = self.parent_version;
        for r in self.rois {
            let mask = rle_decode(&r.rle, set.grid())?;
            set.add_roi(Roi::new(r.number, r.name, r.color), mask)?;
        }
        Ok(set)
    }
}

pub fn encode_segmentation(set: &SegmentationSet) -> Vec<u8> {
    serde_json::to_vec(&SegmentationDocument::from_set(set)).expect("document serializes")
}

pub fn decode_segmentation(bytes: &[u8]) -> Result<SegmentationSet> {
    let doc: SegmentationDocument = serde_json::from_slice(bytes)?;
    doc.into_set()
}
