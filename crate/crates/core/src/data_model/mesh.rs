use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use super::taxonomy::PartId;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("non-triangular face at line {line}")]
    NonTriangular { line: usize },
    #[error("face {face}: vertex index {index} out of range ({count} vertices)")]
    IndexOutOfRange { face: usize, index: i64, count: usize },
    #[error("face {face} repeats vertex {vertex}")]
    Degenerate { face: usize, vertex: usize },
    #[error("{labels} labels for {vertices} vertices")]
    LabelCount { labels: usize, vertices: usize },
    #[error("label file line {line}: {message}")]
    Labels { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Triangle mesh in meters. Faces are counter-clockwise seen from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub vertex_labels: Option<Vec<PartId>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let count = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= count) {
                return Err(MeshError::IndexOutOfRange {
                    face: fi,
                    index: bad as i64,
                    count,
                });
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                let vertex = if f[0] == f[1] || f[0] == f[2] { f[0] } else { f[1] };
                return Err(MeshError::Degenerate { face: fi, vertex });
            }
        }
        Ok(Self {
            vertices,
            faces,
            vertex_labels: None,
        })
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
            vertex_labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<PartId>) -> Result<Self, MeshError> {
        if labels.len() != self.vertices.len() {
            return Err(MeshError::LabelCount {
                labels: labels.len(),
                vertices: self.vertices.len(),
            });
        }
        self.vertex_labels = Some(labels);
        Ok(self)
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Axis-aligned bounds, `None` for a mesh without vertices.
    pub fn bounds(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    pub fn translated(&self, t: &Vector3<f64>) -> TriMesh {
        self.map_vertices(|v| v + t)
    }

    pub fn map_vertices(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
            vertex_labels: self.vertex_labels.clone(),
        }
    }

    /// Same surface with every face reversed.
    pub fn flipped(&self) -> TriMesh {
        TriMesh {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect(),
            vertex_labels: self.vertex_labels.clone(),
        }
    }

    /// Concatenate meshes; labels are kept only if every input has them.
    pub fn merge(meshes: &[TriMesh]) -> TriMesh {
        let mut out = TriMesh::empty();
        let labelled = meshes.iter().all(|m| m.vertex_labels.is_some());
        let mut labels = Vec::new();
        for m in meshes {
            let offset = out.vertices.len();
            out.vertices.extend_from_slice(&m.vertices);
            out.faces
                .extend(m.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
            if let Some(l) = &m.vertex_labels {
                labels.extend_from_slice(l);
            }
        }
        if labelled && !meshes.is_empty() {
            out.vertex_labels = Some(labels);
        }
        out
    }

    /// OBJ text with `v` and 1-based `f` records only.
    pub fn to_obj_string(&self) -> String {
        let mut out = String::with_capacity(32 * (self.vertices.len() + self.faces.len()));
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        out
    }

    /// Parse the OBJ subset: `v` records and triangular `f` records.
    /// Attribute suffixes (`f 1/1/1 ...`) are dropped; other records are ignored.
    pub fn parse_obj(text: &str) -> Result<TriMesh, MeshError> {
        let mut vertices = Vec::new();
        let mut raw_faces: Vec<(usize, [i64; 3])> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            let mut tokens = line.split_whitespace();
            match tokens.next() {
                Some("v") => {
                    let coords = tokens
                        .take(3)
                        .map(|t| t.parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| MeshError::Parse {
                            line: line_no,
                            message: e.to_string(),
                        })?;
                    if coords.len() != 3 {
                        return Err(MeshError::Parse {
                            line: line_no,
                            message: "vertex needs three coordinates".into(),
                        });
                    }
                    vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
                }
                Some("f") => {
                    let refs: Vec<&str> = tokens.collect();
                    if refs.len() != 3 {
                        return Err(MeshError::NonTriangular { line: line_no });
                    }
                    let mut face = [0i64; 3];
                    for (slot, r) in face.iter_mut().zip(&refs) {
                        let index = r.split('/').next().unwrap_or("");
                        *slot = index.parse().map_err(|_| MeshError::Parse {
                            line: line_no,
                            message: format!("bad vertex reference `{r}`"),
                        })?;
                    }
                    raw_faces.push((line_no, face));
                }
                _ => {}
            }
        }

        let count = vertices.len();
        let faces = raw_faces
            .into_iter()
            .enumerate()
            .map(|(fi, (_, refs))| {
                let mut face = [0usize; 3];
                for (slot, &r) in face.iter_mut().zip(&refs) {
                    // OBJ indices are 1-based; negative ones count from the end.
                    let resolved = if r > 0 { r - 1 } else { count as i64 + r };
                    if r == 0 || resolved < 0 || resolved >= count as i64 {
                        return Err(MeshError::IndexOutOfRange {
                            face: fi,
                            index: r,
                            count,
                        });
                    }
                    *slot = resolved as usize;
                }
                Ok(face)
            })
            .collect::<Result<Vec<_>, _>>()?;
        TriMesh::new(vertices, faces)
    }

    pub fn read_obj(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
        Self::parse_obj(&std::fs::read_to_string(path)?)
    }

    pub fn write_obj(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path, self.to_obj_string())?;
        Ok(())
    }
}

/// Parse a label sidecar: one `vertex_index part_id` pair per line, every
/// vertex exactly once.
pub fn parse_labels(text: &str, vertex_count: usize) -> Result<Vec<PartId>, MeshError> {
    let mut labels: Vec<Option<PartId>> = vec![None; vertex_count];
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| MeshError::Labels {
            line: idx + 1,
            message,
        };
        let mut it = line.split_whitespace();
        let (Some(v), Some(p), None) = (it.next(), it.next(), it.next()) else {
            return Err(bad("expected `vertex_index part_id`".into()));
        };
        let v: usize = v.parse().map_err(|_| bad(format!("bad vertex index `{v}`")))?;
        let p: PartId = p.parse().map_err(|_| bad(format!("bad part id `{p}`")))?;
        let slot = labels
            .get_mut(v)
            .ok_or_else(|| bad(format!("vertex {v} out of range")))?;
        if slot.replace(p).is_some() {
            return Err(bad(format!("vertex {v} labelled twice")));
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(v, l)| {
            l.ok_or(MeshError::Labels {
                line: 0,
                message: format!("vertex {v} has no label"),
            })
        })
        .collect()
}

pub fn labels_to_string(labels: &[PartId]) -> String {
    let mut out = String::with_capacity(labels.len() * 8);
    for (v, p) in labels.iter().enumerate() {
        let _ = writeln!(out, "{v} {p}");
    }
    out
}

pub fn read_labels(path: impl AsRef<Path>, vertex_count: usize) -> Result<Vec<PartId>, MeshError> {
    parse_labels(&std::fs::read_to_string(path)?, vertex_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE_OBJ: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    #[test]
    fn cube_obj_parses() {
        let mesh = TriMesh::parse_obj(CUBE_OBJ).unwrap();
        assert_eq!(mesh.vertices.len(), 8);
        assert_eq!(mesh.faces.len(), 12);
        assert_eq!(mesh.faces[0], [0, 2, 1]);
    }

    #[test]
    fn attributes_are_stripped() {
        let mesh = TriMesh::parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1/1 2/2/2 3/3/3\n").unwrap();
        assert_eq!(mesh.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn quad_is_rejected_with_line_number() {
        let err = TriMesh::parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap_err();
        assert_eq!(err.to_string(), "non-triangular face at line 5");
    }

    #[test]
    fn out_of_range_index() {
        let err = TriMesh::parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n").unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfRange { index: 4, .. }));
    }

    #[test]
    fn negative_indices_resolve_from_end() {
        let mesh = TriMesh::parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(mesh.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn degenerate_face_is_rejected() {
        let err = TriMesh::new(vec![Vector3::zeros(); 3], vec![[0, 1, 1]]).unwrap_err();
        assert!(matches!(err, MeshError::Degenerate { face: 0, vertex: 1 }));
    }

    #[test]
    fn obj_text_roundtrip_is_exact() {
        let mesh = TriMesh::new(
            vec![
                Vector3::new(0.1, -2.5e-7, 1.0 / 3.0),
                Vector3::new(1e300, 2.0, -0.0),
                Vector3::new(5.0, 6.0, 7.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let text = mesh.to_obj_string();
        let back = TriMesh::parse_obj(&text).unwrap();
        assert_eq!(back, mesh);
        assert_eq!(back.to_obj_string(), text);
    }

    #[test]
    fn labels_sidecar() {
        let labels = parse_labels("0 1\n2 0\n1 1\n", 3).unwrap();
        assert_eq!(labels, vec![1, 1, 0]);
        assert_eq!(parse_labels(&labels_to_string(&labels), 3).unwrap(), labels);
        assert!(parse_labels("0 1\n", 2).is_err());
        assert!(parse_labels("0 1\n0 2\n", 1).is_err());
        assert!(parse_labels("5 1\n", 1).is_err());
    }
}
