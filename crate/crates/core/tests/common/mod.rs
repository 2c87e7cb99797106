#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cvekit_core::meshvol::shapes::icosphere;
use cvekit_core::scenegen::top_down;
use cvekit_core::{BBox, FrameAnnotation, Keypoint, PartTaxonomy, PersonAnnotation, TriMesh};
use nalgebra::Vector3;
use rand::Rng;

/// Star-shaped closed mesh: an icosphere with every vertex pushed along its
/// ray by a random factor, then shifted to `centre`.
pub fn random_star_mesh(rng: &mut impl Rng, centre: Vector3<f64>) -> TriMesh {
    let sphere = icosphere(1.0, 1);
    let vertices = sphere
        .vertices
        .iter()
        .map(|v| v * rng.random_range(0.5..1.5) + centre)
        .collect();
    TriMesh::new(vertices, sphere.faces.clone()).unwrap()
}

/// Random person with all default-taxonomy keypoints somewhere in the image.
pub fn random_person(rng: &mut impl Rng, tax: &PartTaxonomy, w: u32, h: u32, idx: usize) -> PersonAnnotation {
    let (wf, hf) = (w as f64, h as f64);
    let head = [rng.random_range(0.0..wf), rng.random_range(0.0..hf)];
    let mut part_volumes = BTreeMap::new();
    let mut keypoints = Vec::new();
    for part in tax.part_ids() {
        part_volumes.insert(part, rng.random_range(0.5..20.0));
        for _ in tax.keypoints(part) {
            keypoints.push(Keypoint {
                x: rng.random_range(0.0..wf),
                y: rng.random_range(0.0..hf),
                part_id: part,
                visible: rng.random_bool(0.8),
            });
        }
    }
    let volume = cvekit_core::numeric::sum(part_volumes.values().copied());
    let x0 = (head[0] - 5.0).max(0.0);
    let y0 = (head[1] - 2.0).max(0.0);
    PersonAnnotation {
        person_id: format!("p{idx:03}"),
        character_id: format!("c{idx:04}"),
        head_px: head,
        keypoints,
        bbox_px: BBox::new(x0, y0, (x0 + 10.0).min(wf), (y0 + 30.0).min(hf)),
        volume_dm3: volume,
        part_volumes_dm3: part_volumes,
    }
}

pub fn frame_with(frame_id: &str, w: u32, h: u32, persons: Vec<PersonAnnotation>) -> FrameAnnotation {
    FrameAnnotation {
        frame_id: frame_id.to_string(),
        image_w: w,
        image_h: h,
        persons,
        scene_tags: BTreeSet::new(),
        camera: top_down(&Vector3::new(0.0, 0.0, 0.0), 10.0, 300.0, w, h),
    }
}

/// Random frame; with `border` set, the first head sits within 2 px of an edge.
pub fn random_frame(rng: &mut impl Rng, tax: &PartTaxonomy, n: usize, border: bool) -> FrameAnnotation {
    let w = rng.random_range(16..96);
    let h = rng.random_range(16..96);
    let mut persons: Vec<_> = (0..n).map(|i| random_person(rng, tax, w, h, i)).collect();
    if border {
        if let Some(p) = persons.first_mut() {
            p.head_px = match rng.random_range(0..4) {
                0 => [rng.random_range(0.0..2.0), p.head_px[1]],
                1 => [w as f64 - rng.random_range(0.01..2.0), p.head_px[1]],
                2 => [p.head_px[0], rng.random_range(0.0..2.0)],
                _ => [p.head_px[0], h as f64 - rng.random_range(0.01..2.0)],
            };
        }
    }
    frame_with("f", w, h, persons)
}

pub fn rel(a: f64, b: f64) -> f64 {
    cvekit_core::numeric::rel_diff(a, b)
}
