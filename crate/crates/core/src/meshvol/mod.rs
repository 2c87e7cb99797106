//! Mesh volumes, boundary planes and per-part splitting.

mod cut;
mod parts;
mod plane;
pub mod shapes;
mod volume;

use thiserror::Error;

use crate::data_model::PartId;

pub use parts::{split_parts, PartVolumes};
pub use plane::{
    fit_boundary_plane, least_squares_plane, Plane, PlaneFit, DEFAULT_PLANE_TOL, EXHAUSTIVE_LIMIT,
    SAMPLED_TRIPLES,
};
pub use volume::{is_watertight, signed_volume, WatertightReport};

use crate::data_model::TriMesh;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshVolError {
    #[error("mesh is not watertight ({} offending edges)", offending_edges.len())]
    NotWatertight { offending_edges: Vec<(usize, usize)> },
    #[error("inverted orientation: signed volume {volume} m^3")]
    InvertedOrientation { volume: f64 },
    #[error("need at least 3 points for a plane, got {0}")]
    TooFewPoints(usize),
    #[error("all points are collinear")]
    Collinear,
    #[error("mesh has no vertex labels")]
    MissingLabels,
    #[error("vertex label {0} is not in the taxonomy")]
    UnknownPart(PartId),
    #[error("part adjacency is not a tree: parts {a} and {b} close a cycle")]
    NonTreeAdjacency { a: PartId, b: PartId },
    #[error("boundary plane fit failed between parts {a} and {b}: {reason}")]
    PlaneFitFailed { a: PartId, b: PartId, reason: String },
    #[error("no cross-section separates parts {a} and {b}")]
    NoSeparatingLoop { a: PartId, b: PartId },
    #[error("cross-section is not a closed loop")]
    OpenCrossSection,
}

/// Split a watertight mesh by a plane into its closed negative and positive
/// halves. A plane that misses the mesh returns `(empty, mesh)` or
/// `(mesh, empty)`.
pub fn split_by_plane(mesh: &TriMesh, plane: &Plane) -> Result<(TriMesh, TriMesh), MeshVolError> {
    let report = is_watertight(mesh);
    if !report.watertight {
        return Err(MeshVolError::NotWatertight {
            offending_edges: report.offending_edges,
        });
    }
    let soup = cut::Soup::from_mesh(&mesh.vertices, &mesh.faces);
    let cut = cut::cut(&soup, plane)?;
    if cut.neg.is_empty() {
        return Ok((TriMesh::empty(), mesh.clone()));
    }
    if cut.pos.is_empty() {
        return Ok((mesh.clone(), TriMesh::empty()));
    }
    let (neg, pos) = cut.into_halves();
    let to_mesh = |s: cut::Soup| TriMesh {
        vertices: s.vertices,
        faces: s.faces,
        vertex_labels: None,
    };
    Ok((to_mesh(neg), to_mesh(pos)))
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector3;

    use super::*;

    #[test]
    fn cube_halves() {
        let (neg, pos) = split_by_plane(&shapes::unit_cube(), &Plane::horizontal(0.5)).unwrap();
        assert!(is_watertight(&neg).watertight && is_watertight(&pos).watertight);
        assert!((signed_volume(&neg).unwrap() - 0.5).abs() < 1e-12);
        assert!((signed_volume(&pos).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn plane_below_mesh() {
        let cube = shapes::unit_cube();
        let (neg, pos) = split_by_plane(&cube, &Plane::horizontal(-3.0)).unwrap();
        assert!(neg.is_empty());
        assert_eq!(pos, cube);
        let (neg, pos) = split_by_plane(&cube, &Plane::horizontal(1.0)).unwrap();
        assert_eq!(neg, cube);
        assert!(pos.is_empty());
    }

    #[test]
    fn oblique_cut_of_a_sphere() {
        let sphere = shapes::icosphere(1.3, 3).translated(&Vector3::new(5.0, -2.0, 1.0));
        let plane = Plane::from_point_normal(&Vector3::new(5.2, -2.1, 1.0), &Vector3::new(0.3, -1.0, 0.6)).unwrap();
        let (neg, pos) = split_by_plane(&sphere, &plane).unwrap();
        let whole = signed_volume(&sphere).unwrap();
        let parts = signed_volume(&neg).unwrap() + signed_volume(&pos).unwrap();
        assert!((parts - whole).abs() / whole < 1e-9);
    }

    #[test]
    fn open_mesh_is_rejected() {
        let mut cube = shapes::unit_cube();
        cube.faces.pop();
        assert!(matches!(
            split_by_plane(&cube, &Plane::horizontal(0.5)),
            Err(MeshVolError::NotWatertight { .. })
        ));
    }
}
