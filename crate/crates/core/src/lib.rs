//! Ground-truth generation and evaluation toolkit for crowd volume estimation.
//!
//! The crate is organised around the pipeline a benchmark goes through:
//!
//! * [`data_model`] holds the shared types and their file formats
//!   (JSON Lines annotations, OBJ meshes, `VDM1` density maps).
//! * [`meshvol`] turns watertight meshes into total and per-part volumes.
//! * [`anthro`] models population anthropometrics and mesh rescaling.
//! * [`densitymap`] rasterises volume density maps from annotations.
//! * [`scenegen`] synthesises deterministic annotated crowd scenes.
//! * [`metrics`] and [`evalharness`] score predictions under the
//!   benchmark protocols.

pub mod anthro;
pub mod data_model;
pub mod densitymap;
pub mod evalharness;
pub mod meshvol;
pub mod metrics;
pub mod numeric;
pub mod plot;
pub mod scenegen;

pub use data_model::{
    BBox, CameraParams, DensityMap, FrameAnnotation, Keypoint, PartId, PartTaxonomy,
    PersonAnnotation, TriMesh,
};
