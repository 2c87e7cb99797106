//! Shared domain types, the part taxonomy, and the file formats used by the
//! toolkit: JSON Lines annotations, OBJ meshes with label sidecars, `VDM1`
//! density maps and flat `key=value` configs.
//!
//! Units: 3D positions in meters, volumes in dm³, image coordinates in
//! pixels with the origin at the top-left and `y` pointing down.

mod annotation;
mod density;
pub mod kv;
mod mesh;
mod taxonomy;

pub use annotation::{
    from_json_line, read_annotations, to_json_line, write_annotations, AnnotationError, BBox,
    CameraParams, FrameAnnotation, Keypoint, PersonAnnotation, ValidationError, PART_SUM_REL_TOL,
};
pub use density::{read_vdm, write_vdm, DensityMap, VdmError, VDM_MAGIC};
pub use kv::{KvConfig, KvError};
pub use mesh::{labels_to_string, parse_labels, read_labels, MeshError, TriMesh};
pub use taxonomy::{parts, KeypointId, Part, PartId, PartTaxonomy, TaxonomyError};

/// Cubic meters to cubic decimeters.
pub const DM3_PER_M3: f64 = 1000.0;
