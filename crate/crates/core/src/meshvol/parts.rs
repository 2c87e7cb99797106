//! Per-part volumes of a labelled body mesh.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use nalgebra::Vector3;

use super::cut::{self, DisjointSets, Soup};
use super::plane::fit_boundary_plane;
use super::{is_watertight, MeshVolError};
use crate::data_model::{PartId, PartTaxonomy, TriMesh, DM3_PER_M3};

/// Volumes in dm³ per labelled part, plus the whole-mesh total.
#[derive(Debug, Clone, PartialEq)]
pub struct PartVolumes {
    pub parts: BTreeMap<PartId, f64>,
    pub total: f64,
}

impl PartVolumes {
    pub fn parts_sum(&self) -> f64 {
        crate::numeric::sum(self.parts.values().copied())
    }
}

/// Label of a piece: majority label among source vertices that never lay on
/// a cutting plane, smallest id on ties.
fn piece_label(piece: &Soup, labels: &[PartId]) -> Option<PartId> {
    let count = |pinned_ok: bool| {
        let mut counts: BTreeMap<PartId, usize> = BTreeMap::new();
        for (origin, pinned) in piece.origin.iter().zip(&piece.pinned) {
            if let Some(o) = origin {
                if pinned_ok || !pinned {
                    *counts.entry(labels[*o]).or_default() += 1;
                }
            }
        }
        counts
            .into_iter()
            .max_by(|(la, ca), (lb, cb)| ca.cmp(cb).then(lb.cmp(la)))
            .map(|(l, _)| l)
    };
    count(false).or_else(|| count(true))
}

/// Adjacent part pairs `(a, b)` with `a < b`, in sorted order.
fn adjacent_pairs(mesh: &TriMesh, labels: &[PartId]) -> BTreeSet<(PartId, PartId)> {
    let mut pairs = BTreeSet::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let (la, lb) = (labels[f[k]], labels[f[(k + 1) % 3]]);
            if la != lb {
                pairs.insert((la.min(lb), la.max(lb)));
            }
        }
    }
    pairs
}

/// Vertices labelled `own` with a neighbour labelled `other`.
///
/// The shared ring of two parts carries one of the two labels, so only one
/// side of the label change lies on the anatomical boundary; callers try
/// both sides.
fn boundary_vertices(mesh: &TriMesh, labels: &[PartId], own: PartId, other: PartId) -> Vec<usize> {
    let mut set = BTreeSet::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let (u, v) = (f[k], f[(k + 1) % 3]);
            if labels[u] == own && labels[v] == other {
                set.insert(u);
            }
            if labels[v] == own && labels[u] == other {
                set.insert(v);
            }
        }
    }
    set.into_iter().collect()
}

/// A loop separates `a` from `b` when faces of both parts surround it and
/// they make up at least half of its neighbourhood.
fn loop_separates(c: &cut::Cut, li: usize, labels: &[PartId], a: PartId, b: PartId) -> bool {
    let mut in_pair = 0usize;
    let mut total = 0usize;
    let mut seen = (false, false);
    for f in c.loop_neighbourhood(li) {
        for v in f {
            if let Some(o) = c.soup.origin[v] {
                total += 1;
                let l = labels[o];
                if l == a || l == b {
                    in_pair += 1;
                }
                seen.0 |= l == a;
                seen.1 |= l == b;
            }
        }
    }
    seen.0 && seen.1 && 2 * in_pair >= total
}

/// Split a labelled watertight mesh along fitted boundary planes and return
/// the volume of every labelled part.
///
/// Each plane only cuts the piece that holds the boundary, and only the
/// cross-section loops surrounded by faces of the two parts are capped, so
/// a plane that also grazes unrelated limbs leaves them intact.
pub fn split_parts(mesh: &TriMesh, taxonomy: &PartTaxonomy, tol: f64) -> Result<PartVolumes, MeshVolError> {
    let labels = mesh.vertex_labels.as_deref().ok_or(MeshVolError::MissingLabels)?;
    let report = is_watertight(mesh);
    if !report.watertight {
        return Err(MeshVolError::NotWatertight {
            offending_edges: report.offending_edges,
        });
    }
    let used: BTreeSet<PartId> = mesh.faces.iter().flatten().map(|&v| labels[v]).collect();
    if let Some(&unknown) = used.iter().find(|p| !taxonomy.contains(**p)) {
        return Err(MeshVolError::UnknownPart(unknown));
    }
    let total_m3 = super::volume::enclosed_volume(&mesh.vertices, &mesh.faces);
    if total_m3 < 0.0 {
        return Err(MeshVolError::InvertedOrientation { volume: total_m3 });
    }

    let pairs = adjacent_pairs(mesh, labels);
    let index: BTreeMap<PartId, usize> = used.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut forest = DisjointSets::new(index.len());
    for &(a, b) in &pairs {
        if !forest.union(index[&a], index[&b]) {
            return Err(MeshVolError::NonTreeAdjacency { a, b });
        }
    }

    let mut pieces = Soup::from_mesh(&mesh.vertices, &mesh.faces).components();
    for &(a, b) in &pairs {
        let mut outcome = None;
        let mut fit_error = None;
        // The ring usually carries the lower id; fall back to the other side.
        for (own, other) in [(a, b), (b, a)] {
            let boundary = boundary_vertices(mesh, labels, own, other);
            let points: Vec<Vector3<f64>> = boundary.iter().map(|&v| mesh.vertices[v]).collect();
            let fit = match fit_boundary_plane(&points, tol) {
                Ok(fit) => fit,
                Err(e) => {
                    fit_error.get_or_insert(e);
                    continue;
                }
            };
            let wanted: HashSet<usize> = boundary.into_iter().collect();
            let (target, _) = pieces
                .iter()
                .enumerate()
                .map(|(i, p)| (i, p.origin.iter().flatten().filter(|o| wanted.contains(o)).count()))
                .fold((0, 0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let cut = cut::cut(&pieces[target], &fit.plane)?;
            let (groups, capped) = cut.into_groups(|c, li| loop_separates(c, li, labels, a, b));
            if capped > 0 {
                log::debug!("parts {a}/{b}: {} traversed, {} pieces", fit.traversed.len(), groups.len());
                outcome = Some((target, groups));
                break;
            }
        }
        match (outcome, fit_error) {
            (Some((target, groups)), _) => {
                pieces.remove(target);
                pieces.extend(groups);
            }
            (None, Some(e)) => {
                return Err(MeshVolError::PlaneFitFailed {
                    a,
                    b,
                    reason: e.to_string(),
                })
            }
            (None, None) => return Err(MeshVolError::NoSeparatingLoop { a, b }),
        }
    }

    let mut parts: BTreeMap<PartId, crate::numeric::NeumaierSum> = BTreeMap::new();
    for &p in &used {
        parts.insert(p, Default::default());
    }
    for piece in &pieces {
        if let Some(label) = piece_label(piece, labels) {
            parts.entry(label).or_default().add(piece.volume() * DM3_PER_M3);
        }
    }
    Ok(PartVolumes {
        parts: parts.into_iter().map(|(p, s)| (p, s.value())).collect(),
        total: total_m3 * DM3_PER_M3,
    })
}
