//! Plane cutting of closed triangle soups.
//!
//! A cut re-triangulates every face crossing the plane so that each face
//! lies on one side, then extracts the cross-section loops. Intersection
//! points are shared between the faces of both sides, so the two face sets
//! together are exactly the original surface and each loop can be closed
//! with a fan cap that is added to both sides with opposite orientation.

use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::Vector3;

use super::plane::Plane;
use super::MeshVolError;

/// Relative tolerance for snapping vertices onto the cutting plane.
const ON_PLANE_EPS: f64 = 1e-12;

/// Triangle soup that remembers where its vertices came from.
#[derive(Debug, Clone)]
pub(crate) struct Soup {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
    /// Index of the source mesh vertex, `None` for vertices created by cuts.
    pub origin: Vec<Option<usize>>,
    /// The vertex has lain on a cutting plane.
    pub pinned: Vec<bool>,
}

impl Soup {
    pub fn from_mesh(vertices: &[Vector3<f64>], faces: &[[usize; 3]]) -> Soup {
        Soup {
            vertices: vertices.to_vec(),
            faces: faces.to_vec(),
            origin: (0..vertices.len()).map(Some).collect(),
            pinned: vec![false; vertices.len()],
        }
    }

    pub fn volume(&self) -> f64 {
        super::volume::enclosed_volume(&self.vertices, &self.faces)
    }

    /// Sub-soup with the given faces; vertices are renumbered in order of
    /// first use.
    fn extract(&self, faces: impl IntoIterator<Item = [usize; 3]>) -> Soup {
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut out = Soup {
            vertices: Vec::new(),
            faces: Vec::new(),
            origin: Vec::new(),
            pinned: Vec::new(),
        };
        for f in faces {
            let mapped = f.map(|v| {
                *remap.entry(v).or_insert_with(|| {
                    out.vertices.push(self.vertices[v]);
                    out.origin.push(self.origin[v]);
                    out.pinned.push(self.pinned[v]);
                    out.vertices.len() - 1
                })
            });
            out.faces.push(mapped);
        }
        out
    }

    /// Edge-connected components, each as its own soup.
    pub fn components(&self) -> Vec<Soup> {
        let labels = face_components(&self.faces);
        let mut groups: BTreeMap<usize, Vec<[usize; 3]>> = BTreeMap::new();
        for (f, c) in self.faces.iter().zip(labels) {
            groups.entry(c).or_default().push(*f);
        }
        groups.into_values().map(|faces| self.extract(faces)).collect()
    }
}

/// Minimal union-find over `0..n`.
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // Keep the smaller root so labels are deterministic.
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }
}

/// Component id (smallest face index in the component) for every face.
pub(crate) fn face_components(faces: &[[usize; 3]]) -> Vec<usize> {
    let mut sets = DisjointSets::new(faces.len());
    let mut first_use: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            match first_use.get(&key) {
                Some(&other) => {
                    sets.union(fi, other);
                }
                None => {
                    first_use.insert(key, fi);
                }
            }
        }
    }
    (0..faces.len()).map(|f| sets.find(f)).collect()
}

/// Outcome of cutting a soup with a plane, before capping.
#[derive(Debug, Clone)]
pub(crate) struct Cut {
    pub soup: Soup,
    /// Faces with no vertex strictly above the plane.
    pub neg: Vec<[usize; 3]>,
    /// Faces with no vertex strictly below the plane.
    pub pos: Vec<[usize; 3]>,
    /// Cross-section loops, oriented as the boundary of the `neg` faces.
    pub loops: Vec<Vec<usize>>,
}

fn fan(poly: &[usize], out: &mut Vec<[usize; 3]>) {
    for i in 1..poly.len().saturating_sub(1) {
        out.push([poly[0], poly[i], poly[i + 1]]);
    }
}

pub(crate) fn cut(input: &Soup, plane: &Plane) -> Result<Cut, MeshVolError> {
    let scale = input
        .vertices
        .iter()
        .fold(plane.offset.abs().max(1.0), |m, v| m.max(v.amax()));
    let eps = ON_PLANE_EPS * scale;
    let dist: Vec<f64> = input.vertices.iter().map(|v| plane.signed_distance(v)).collect();
    let side: Vec<i8> = dist
        .iter()
        .map(|&d| if d > eps { 1 } else if d < -eps { -1 } else { 0 })
        .collect();

    let mut soup = input.clone();
    for (pin, s) in soup.pinned.iter_mut().zip(&side) {
        *pin |= *s == 0;
    }
    let mut crossings: HashMap<(usize, usize), usize> = HashMap::new();
    let mut neg = Vec::new();
    let mut pos = Vec::new();

    for f in &input.faces {
        let s = f.map(|v| side[v]);
        let has_neg = s.contains(&-1);
        let has_pos = s.contains(&1);
        match (has_neg, has_pos) {
            (false, true) => pos.push(*f),
            (true, false) => neg.push(*f),
            (false, false) => {
                // Face lies in the plane: it bounds the solid on the side its
                // normal points away from.
                let [a, b, c] = f.map(|v| input.vertices[v]);
                if (b - a).cross(&(c - a)).dot(&plane.normal) < 0.0 {
                    pos.push(*f);
                } else {
                    neg.push(*f);
                }
            }
            (true, true) => {
                let mut neg_poly = Vec::with_capacity(4);
                let mut pos_poly = Vec::with_capacity(4);
                for k in 0..3 {
                    let (p, q) = (f[k], f[(k + 1) % 3]);
                    if side[p] <= 0 {
                        neg_poly.push(p);
                    }
                    if side[p] >= 0 {
                        pos_poly.push(p);
                    }
                    if side[p] * side[q] < 0 {
                        let key = (p.min(q), p.max(q));
                        let x = *crossings.entry(key).or_insert_with(|| {
                            // Interpolate from the lower index so both faces
                            // sharing the edge get the identical point.
                            let (lo, hi) = key;
                            let t = dist[lo] / (dist[lo] - dist[hi]);
                            let point = input.vertices[lo] + (input.vertices[hi] - input.vertices[lo]) * t;
                            soup.vertices.push(point);
                            soup.origin.push(None);
                            soup.pinned.push(true);
                            soup.vertices.len() - 1
                        });
                        neg_poly.push(x);
                        pos_poly.push(x);
                    }
                }
                fan(&neg_poly, &mut neg);
                fan(&pos_poly, &mut pos);
            }
        }
    }
    soup.faces.clear();

    let loops = boundary_loops(&neg)?;
    Ok(Cut {
        soup,
        neg,
        pos,
        loops,
    })
}

/// Closed loops of directed boundary edges of a face set.
fn boundary_loops(faces: &[[usize; 3]]) -> Result<Vec<Vec<usize>>, MeshVolError> {
    let directed: HashSet<(usize, usize)> = faces
        .iter()
        .flat_map(|f| (0..3).map(move |k| (f[k], f[(k + 1) % 3])))
        .collect();
    let mut outgoing: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(u, v) in &directed {
        if !directed.contains(&(v, u)) {
            outgoing.entry(u).or_default().push(v);
        }
    }
    for targets in outgoing.values_mut() {
        // Pop from the back, so keep the smallest target last.
        targets.sort_unstable_by(|a, b| b.cmp(a));
    }

    let mut loops = Vec::new();
    while let Some((&start, _)) = outgoing.iter().find(|(_, t)| !t.is_empty()) {
        let mut ring = vec![start];
        let mut at = start;
        loop {
            let next = outgoing
                .get_mut(&at)
                .and_then(Vec::pop)
                .ok_or(MeshVolError::OpenCrossSection)?;
            if next == start {
                break;
            }
            ring.push(next);
            at = next;
        }
        loops.push(ring);
    }
    Ok(loops)
}

impl Cut {
    /// Close `loop_idx` with a fan around the loop centroid. Returns the cap
    /// faces for the negative and the positive side.
    pub fn cap(&mut self, loop_idx: usize) -> (Vec<[usize; 3]>, Vec<[usize; 3]>) {
        let ring = &self.loops[loop_idx];
        let centroid = ring.iter().map(|&v| self.soup.vertices[v]).sum::<Vector3<f64>>() / ring.len() as f64;
        self.soup.vertices.push(centroid);
        self.soup.origin.push(None);
        self.soup.pinned.push(true);
        let c = self.soup.vertices.len() - 1;
        let n = ring.len();
        let mut neg_cap = Vec::with_capacity(n);
        let mut pos_cap = Vec::with_capacity(n);
        for i in 0..n {
            let (u, v) = (ring[i], ring[(i + 1) % n]);
            neg_cap.push([v, u, c]);
            pos_cap.push([u, v, c]);
        }
        (neg_cap, pos_cap)
    }

    /// Cap every loop and return the closed negative and positive halves.
    pub fn into_halves(mut self) -> (Soup, Soup) {
        let mut neg = std::mem::take(&mut self.neg);
        let mut pos = std::mem::take(&mut self.pos);
        for i in 0..self.loops.len() {
            let (n, p) = self.cap(i);
            neg.extend(n);
            pos.extend(p);
        }
        (self.soup.extract(neg), self.soup.extract(pos))
    }

    /// Split into closed groups, capping only the loops selected by
    /// `separates`. Components on either side of an uncapped loop are
    /// reconnected along it.
    pub fn into_groups(mut self, separates: impl Fn(&Cut, usize) -> bool) -> (Vec<Soup>, usize) {
        let neg_comp = face_components(&self.neg);
        let pos_comp = face_components(&self.pos);
        let n_neg = self.neg.len();
        // Node ids: neg faces 0..n_neg, pos faces n_neg.. (component roots
        // are face indices, so faces double as component nodes).
        let mut sets = DisjointSets::new(n_neg + self.pos.len());
        for (f, &c) in neg_comp.iter().enumerate() {
            sets.union(f, c);
        }
        for (f, &c) in pos_comp.iter().enumerate() {
            sets.union(n_neg + f, n_neg + c);
        }

        let edge_owner = |faces: &[[usize; 3]]| {
            let mut map: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3);
            for (fi, f) in faces.iter().enumerate() {
                for k in 0..3 {
                    map.insert((f[k], f[(k + 1) % 3]), fi);
                }
            }
            map
        };
        let neg_owner = edge_owner(&self.neg);
        let pos_owner = edge_owner(&self.pos);

        let mut caps: Vec<(usize, Vec<[usize; 3]>, usize, Vec<[usize; 3]>)> = Vec::new();
        let mut capped = 0;
        for li in 0..self.loops.len() {
            let ring = &self.loops[li];
            let n = ring.len();
            let mut neg_faces = Vec::new();
            let mut pos_faces = Vec::new();
            for i in 0..n {
                let (u, v) = (ring[i], ring[(i + 1) % n]);
                if let Some(&f) = neg_owner.get(&(u, v)) {
                    neg_faces.push(f);
                }
                if let Some(&f) = pos_owner.get(&(v, u)) {
                    pos_faces.push(n_neg + f);
                }
            }
            for w in neg_faces.windows(2) {
                sets.union(w[0], w[1]);
            }
            for w in pos_faces.windows(2) {
                sets.union(w[0], w[1]);
            }
            let (Some(&a), Some(&b)) = (neg_faces.first(), pos_faces.first()) else {
                continue;
            };
            if separates(&self, li) {
                let (nc, pc) = self.cap(li);
                caps.push((a, nc, b, pc));
                capped += 1;
            } else {
                sets.union(a, b);
            }
        }

        let mut groups: BTreeMap<usize, Vec<[usize; 3]>> = BTreeMap::new();
        for (fi, f) in self.neg.iter().enumerate() {
            groups.entry(sets.find(fi)).or_default().push(*f);
        }
        for (fi, f) in self.pos.iter().enumerate() {
            groups.entry(sets.find(n_neg + fi)).or_default().push(*f);
        }
        for (neg_node, nc, pos_node, pc) in caps {
            groups.entry(sets.find(neg_node)).or_default().extend(nc);
            groups.entry(sets.find(pos_node)).or_default().extend(pc);
        }
        let soups = groups.into_values().map(|faces| self.soup.extract(faces)).collect();
        (soups, capped)
    }

    /// Faces adjacent to a loop on either side, as vertex triples.
    pub fn loop_neighbourhood(&self, loop_idx: usize) -> Vec<[usize; 3]> {
        let ring = &self.loops[loop_idx];
        let on_loop: HashSet<(usize, usize)> = (0..ring.len())
            .map(|i| (ring[i], ring[(i + 1) % ring.len()]))
            .collect();
        let mut out = Vec::new();
        for f in &self.neg {
            if (0..3).any(|k| on_loop.contains(&(f[k], f[(k + 1) % 3]))) {
                out.push(*f);
            }
        }
        for f in &self.pos {
            if (0..3).any(|k| on_loop.contains(&(f[(k + 1) % 3], f[k]))) {
                out.push(*f);
            }
        }
        out
    }
}
