//! Closed, outward-oriented primitive meshes.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::data_model::TriMesh;

fn build(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> TriMesh {
    TriMesh {
        vertices,
        faces,
        vertex_labels: None,
    }
}

/// The cube `[0,1]^3`, 8 vertices and 12 faces.
pub fn unit_cube() -> TriMesh {
    axis_box(Vector3::zeros(), Vector3::new(1.0, 1.0, 1.0))
}

/// Axis-aligned box between two corners.
pub fn axis_box(lo: Vector3<f64>, hi: Vector3<f64>) -> TriMesh {
    let vertices = vec![
        Vector3::new(lo.x, lo.y, lo.z),
        Vector3::new(hi.x, lo.y, lo.z),
        Vector3::new(hi.x, hi.y, lo.z),
        Vector3::new(lo.x, hi.y, lo.z),
        Vector3::new(lo.x, lo.y, hi.z),
        Vector3::new(hi.x, lo.y, hi.z),
        Vector3::new(hi.x, hi.y, hi.z),
        Vector3::new(lo.x, hi.y, hi.z),
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    build(vertices, faces)
}

/// Tetrahedron on the origin and the three unit axis points.
pub fn unit_tetrahedron() -> TriMesh {
    let vertices = vec![
        Vector3::new(0.0, 0.0, 0.0),
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, 1.0, 0.0),
        Vector3::new(0.0, 0.0, 1.0),
    ];
    build(vertices, vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
}

/// Icosahedron refined `subdivisions` times, vertices on the sphere.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut vertices {
        *v *= radius;
    }
    build(vertices, faces)
}

/// One ring of a lathe profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    /// Position along the local z axis.
    pub axial: f64,
    pub radius: f64,
}

/// How a lathe profile is closed at either end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatheEnd {
    /// Flat disc at the end ring.
    Flat,
    /// Cone to a single pole at the given axial position.
    Pole(f64),
}

/// Surface of revolution about the local z axis through `rings`, which
/// must have strictly increasing `axial` and positive radii.
///
/// Vertex order: start pole/centre, then the rings in order (each with
/// `segments` vertices starting at angle 0), then the end pole/centre.
pub fn lathe(rings: &[Ring], segments: usize, start: LatheEnd, end: LatheEnd) -> TriMesh {
    assert!(segments >= 3 && !rings.is_empty());
    let mut vertices = Vec::with_capacity(rings.len() * segments + 2);
    let first = rings[0].axial;
    let last = rings[rings.len() - 1].axial;
    vertices.push(Vector3::new(
        0.0,
        0.0,
        match start {
            LatheEnd::Flat => first,
            LatheEnd::Pole(z) => z,
        },
    ));
    for ring in rings {
        for j in 0..segments {
            let theta = 2.0 * PI * j as f64 / segments as f64;
            vertices.push(Vector3::new(ring.radius * theta.cos(), ring.radius * theta.sin(), ring.axial));
        }
    }
    vertices.push(Vector3::new(
        0.0,
        0.0,
        match end {
            LatheEnd::Flat => last,
            LatheEnd::Pole(z) => z,
        },
    ));
    let s = 0;
    let e = vertices.len() - 1;
    let at = |k: usize, j: usize| 1 + k * segments + j % segments;
    let mut faces = Vec::with_capacity(2 * segments * (rings.len() + 1));
    for j in 0..segments {
        faces.push([s, at(0, j + 1), at(0, j)]);
    }
    for k in 0..rings.len() - 1 {
        for j in 0..segments {
            let (a, b, c, d) = (at(k, j), at(k, j + 1), at(k + 1, j + 1), at(k + 1, j));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    let top = rings.len() - 1;
    for j in 0..segments {
        faces.push([e, at(top, j), at(top, j + 1)]);
    }
    build(vertices, faces)
}

/// Factor that gives a regular `segments`-gon the same area as the circle
/// of the uncorrected radius.
pub fn polygon_area_factor(segments: usize) -> f64 {
    let n = segments as f64;
    (2.0 * PI / (n * (2.0 * PI / n).sin())).sqrt()
}

/// Anisotropic scaling about the origin.
pub fn scaled(mesh: &TriMesh, factors: Vector3<f64>) -> TriMesh {
    mesh.map_vertices(|v| v.component_mul(&factors))
}

/// Rigid transform `R v + t`.
pub fn transformed(mesh: &TriMesh, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> TriMesh {
    mesh.map_vertices(|v| rotation * v + translation)
}
