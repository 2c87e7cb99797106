use std::collections::HashMap;

use nalgebra::Vector3;

use super::MeshVolError;
use crate::data_model::TriMesh;

/// Result of the watertightness check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatertightReport {
    pub watertight: bool,
    /// Undirected edges `(lo, hi)` not shared by exactly one face in each
    /// direction.
    pub offending_edges: Vec<(usize, usize)>,
}

/// Every undirected edge must be used once in each direction.
pub fn is_watertight(mesh: &TriMesh) -> WatertightReport {
    // (lo, hi) -> (uses as lo->hi, uses as hi->lo)
    let mut uses: HashMap<(usize, usize), (u32, u32)> = HashMap::with_capacity(mesh.faces.len() * 2);
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let entry = uses.entry((a.min(b), a.max(b))).or_default();
            if a < b {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
        }
    }
    let mut offending_edges: Vec<(usize, usize)> = uses
        .into_iter()
        .filter(|(_, counts)| *counts != (1, 1))
        .map(|(edge, _)| edge)
        .collect();
    offending_edges.sort_unstable();
    WatertightReport {
        watertight: offending_edges.is_empty(),
        offending_edges,
    }
}

/// Signed volume of a closed triangle soup in m³, without any checks.
///
/// Tetrahedra are formed against the bounding-box centre rather than the
/// origin so that far-from-origin meshes keep their precision.
pub(crate) fn enclosed_volume(vertices: &[Vector3<f64>], faces: &[[usize; 3]]) -> f64 {
    let Some(first) = vertices.first() else {
        return 0.0;
    };
    let (lo, hi) = vertices
        .iter()
        .fold((*first, *first), |(lo, hi), v| (lo.inf(v), hi.sup(v)));
    let centre = (lo + hi) * 0.5;
    let mut acc = crate::numeric::NeumaierSum::new();
    for &[a, b, c] in faces {
        let p = vertices[a] - centre;
        let q = vertices[b] - centre;
        let r = vertices[c] - centre;
        acc.add(p.dot(&q.cross(&r)));
    }
    acc.value() / 6.0
}

/// Volume enclosed by a watertight, outward-oriented mesh, in m³.
pub fn signed_volume(mesh: &TriMesh) -> Result<f64, MeshVolError> {
    let report = is_watertight(mesh);
    if !report.watertight {
        return Err(MeshVolError::NotWatertight {
            offending_edges: report.offending_edges,
        });
    }
    let volume = enclosed_volume(&mesh.vertices, &mesh.faces);
    if volume < 0.0 {
        return Err(MeshVolError::InvertedOrientation { volume });
    }
    Ok(volume)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshvol::shapes;

    #[test]
    fn unit_cube_volume() {
        assert!((signed_volume(&shapes::unit_cube()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tetrahedron_is_one_sixth() {
        let v = signed_volume(&shapes::unit_tetrahedron()).unwrap();
        assert!((v - 1.0 / 6.0).abs() <= 1e-15);
    }

    #[test]
    fn flipped_cube_is_inverted() {
        let err = signed_volume(&shapes::unit_cube().flipped()).unwrap_err();
        match err {
            MeshVolError::InvertedOrientation { volume } => assert!((volume + 1.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn open_cube_has_three_boundary_edges() {
        let mut cube = shapes::unit_cube();
        cube.faces.pop();
        let report = is_watertight(&cube);
        assert!(!report.watertight);
        assert_eq!(report.offending_edges.len(), 3);
        assert!(matches!(
            signed_volume(&cube),
            Err(MeshVolError::NotWatertight { .. })
        ));
    }

    #[test]
    fn two_disjoint_cubes_are_watertight() {
        let a = shapes::unit_cube();
        let b = a.translated(&Vector3::new(3.0, 0.0, 0.0));
        let both = TriMesh::merge(&[a, b]);
        assert!(is_watertight(&both).watertight);
        assert!((signed_volume(&both).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn same_direction_shared_edge_is_reported() {
        let mut cube = shapes::unit_cube();
        let f = cube.faces[0];
        cube.faces[0] = [f[0], f[2], f[1]];
        assert!(!is_watertight(&cube).watertight);
    }
}
