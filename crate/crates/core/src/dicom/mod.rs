//! Minimal DICOM series ingest and the synthetic phantom generator.
//!
//! Only Part-10 files in explicit-VR little-endian with native (uncompressed)
//! 16-bit pixel data are accepted. Everything else is a clean
//! [`Error::Unsupported`](crate::Error::Unsupported).

pub mod part10;
pub mod phantom;
pub mod series;

pub use part10::{DataSet, DataSetBuilder, Tag};
pub use phantom::{generate_phantom, Phantom, PhantomManifest, PhantomShape, PhantomSpec};
pub use series::{
    encode_series_files, parse_series, pseudonymize, representable_grid, ImageSeries,
};
