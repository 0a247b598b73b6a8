//! Segmentation studio: a self-hosted service for reviewing, correcting and
//! exporting medical image segmentations.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: the volume coordinate frame (voxel index <-> patient mm).
//! - [`mask`]: dense binary voxel masks, run-length codec, brush editing.
//! - [`contour`]: structure-set ingest and even-odd contour rasterization.
//! - [`analysis`]: per-ROI DICE, XOR discrepancy maps, evaluation reports.
//! - [`dicom`]: minimal DICOM Part-10 series ingest and a synthetic phantom generator.
//! - [`store`]: content-addressed blobs plus a write-ahead-logged index.
//! - [`orchestrator`]: model registry, inference jobs and executors.
//! - [`export`]: active-learning bundles.
//! - [`api`]: the HTTP service.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod analysis;
pub mod api;
pub mod contour;
pub mod dicom;
pub mod error;
pub mod exchange;
pub mod export;
pub mod geometry;
pub mod mask;
pub mod orchestrator;
pub mod store;

pub use error::{Error, Result};
pub use geometry::{ContinuousIndex, VolumeGrid, VoxelIndex, WorldPoint};
pub use mask::{Provenance, Roi, RoiMask, SegmentationSet, VoxelMask};
