//! Capsule humanoid: nine ring-stack primitives whose volumes have closed
//! forms, built as five disjoint chains (head+torso, two arms, two legs).
//!
//! Every primitive is a stack of circular frusta (cones at poles). Mesh
//! rings use area-corrected radii, so the triangulated solid has exactly the
//! analytic frustum volume and neighbouring parts meet at planar rings.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::SceneError;
use crate::anthro::PersonSample;
use crate::data_model::{parts, KeypointId, PartId, TriMesh, DM3_PER_M3};
use crate::meshvol::shapes::{lathe, polygon_area_factor, LatheEnd, Ring};
use crate::numeric::NeumaierSum;

/// Allowed range of the radius scale solved for the target volume.
pub const RADIUS_SCALE_RANGE: (f64, f64) = (0.3, 3.0);

/// Head sphere radius as a fraction of body height.
const HEAD_RADIUS: f64 = 0.058;
const NECK_Z: f64 = 0.84;
const NECK_RADIUS: f64 = 0.028;

// (height fraction, radius fraction) from bottom to top.
const TORSO: [(f64, f64); 6] = [
    (0.52, 0.088),
    (0.58, 0.084),
    (0.64, 0.080),
    (0.70, 0.086),
    (0.76, 0.092),
    (0.80, 0.088),
];
const LEG: [(f64, f64); 6] = [
    (0.005, 0.022),
    (0.04, 0.020),
    (0.20, 0.038),
    (0.285, 0.036),
    (0.40, 0.050),
    (0.50, 0.062),
];
const LEG_KNEE: usize = 3;
const ANKLE_Z: f64 = 0.04;
const ARM: [(f64, f64); 7] = [
    (0.44, 0.016),
    (0.47, 0.017),
    (0.55, 0.020),
    (0.62, 0.022),
    (0.70, 0.026),
    (0.78, 0.030),
    (0.80, 0.028),
];
const ARM_ELBOW: usize = 3;
const WRIST_Z: f64 = 0.47;

/// Mesh tessellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    /// Vertices per ring.
    pub segments: usize,
    /// Latitude bands of the head sphere.
    pub head_bands: usize,
}

impl Resolution {
    pub const FINE: Resolution = Resolution {
        segments: 64,
        head_bands: 24,
    };
    pub const COARSE: Resolution = Resolution {
        segments: 16,
        head_bands: 6,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyKeypoint {
    pub id: KeypointId,
    pub part_id: PartId,
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Humanoid {
    /// Labelled, watertight body mesh in meters; feet at z = 0, facing +y,
    /// right side toward +x.
    pub mesh: TriMesh,
    /// Closed-form part volumes.
    pub part_volumes_dm3: BTreeMap<PartId, f64>,
    pub total_volume_dm3: f64,
    pub keypoints: Vec<BodyKeypoint>,
    pub head_centre: Vector3<f64>,
    pub pelvis: Vector3<f64>,
    /// Factor applied to every profile radius to reach the target volume.
    pub radius_scale: f64,
}

/// One lathe chain in height-fraction units.
struct Chain {
    /// Profile rings (z, radius) bottom to top.
    rings: Vec<(f64, f64)>,
    /// Part of the segment above each ring (last entry unused).
    segment_part: Vec<PartId>,
    ring_label: Vec<PartId>,
    start: LatheEnd,
    end: LatheEnd,
    start_label: PartId,
    end_label: PartId,
    /// Part owning the end cone, if the end is a pole.
    end_cone: Option<PartId>,
    keypoints: Vec<(KeypointId, PartId, Vector3<f64>)>,
    /// Placement: x offset (in height units, radius-scaled part separately).
    x_offset: f64,
    pivot_z: f64,
    rotation: Rotation3<f64>,
}

impl Chain {
    fn analytic(&self, s: f64, height: f64, out: &mut BTreeMap<PartId, NeumaierSum>) {
        for k in 0..self.rings.len() - 1 {
            let (z0, r0) = self.rings[k];
            let (z1, r1) = self.rings[k + 1];
            let (r0, r1) = (s * r0 * height, s * r1 * height);
            let h = (z1 - z0) * height;
            let v = PI * h / 3.0 * (r0 * r0 + r0 * r1 + r1 * r1);
            out.entry(self.segment_part[k]).or_default().add(v * DM3_PER_M3);
        }
        if let (LatheEnd::Pole(zp), Some(part)) = (self.end, self.end_cone) {
            let (z, r) = *self.rings.last().unwrap();
            let r = s * r * height;
            let v = PI * r * r * (zp - z) * height / 3.0;
            out.entry(part).or_default().add(v * DM3_PER_M3);
        }
    }

    fn place(&self, p: &Vector3<f64>, height: f64) -> Vector3<f64> {
        let pivot = Vector3::new(0.0, 0.0, self.pivot_z * height);
        self.rotation * (p - pivot) + pivot + Vector3::new(self.x_offset, 0.0, 0.0)
    }

    fn mesh(&self, s: f64, height: f64, res: Resolution) -> TriMesh {
        let factor = polygon_area_factor(res.segments);
        let rings: Vec<Ring> = self
            .rings
            .iter()
            .map(|&(z, r)| Ring {
                axial: z * height,
                radius: s * r * height * factor,
            })
            .collect();
        let scale_end = |e: LatheEnd| match e {
            LatheEnd::Flat => LatheEnd::Flat,
            LatheEnd::Pole(z) => LatheEnd::Pole(z * height),
        };
        let mesh = lathe(&rings, res.segments, scale_end(self.start), scale_end(self.end));
        let mut labels = Vec::with_capacity(mesh.vertices.len());
        labels.push(self.start_label);
        for &l in &self.ring_label {
            labels.extend(std::iter::repeat_n(l, res.segments));
        }
        labels.push(self.end_label);
        let placed = mesh.map_vertices(|v| self.place(v, height));
        placed.with_labels(labels).expect("one label per vertex")
    }
}

fn ring_labels(segment_part: &[PartId]) -> Vec<PartId> {
    // Ring k sits between segments k-1 and k; a shared ring takes the
    // lower id.
    let n = segment_part.len();
    (0..n)
        .map(|k| {
            let above = segment_part[k.min(n - 2)];
            if k == 0 {
                above
            } else {
                above.min(segment_part[k - 1])
            }
        })
        .collect()
}

fn head_torso_chain(res: Resolution) -> Chain {
    let mut rings: Vec<(f64, f64)> = TORSO.to_vec();
    let mut segment_part = vec![parts::TORSO; TORSO.len()];
    rings.push((NECK_Z, NECK_RADIUS));
    segment_part.push(parts::HEAD);
    let centre = 1.0 - HEAD_RADIUS;
    let phi0 = (NECK_RADIUS / HEAD_RADIUS).asin();
    for k in 0..res.head_bands {
        let phi = phi0 + (PI - phi0) * k as f64 / res.head_bands as f64;
        rings.push((centre - HEAD_RADIUS * phi.cos(), HEAD_RADIUS * phi.sin()));
        segment_part.push(parts::HEAD);
    }
    let ring_label = ring_labels(&segment_part);
    let hip_x = 0.6 * TORSO[0].1;
    let shoulder_x = 0.8 * TORSO[5].1;
    Chain {
        ring_label,
        segment_part,
        start: LatheEnd::Flat,
        end: LatheEnd::Pole(1.0),
        start_label: parts::TORSO,
        end_label: parts::HEAD,
        end_cone: Some(parts::HEAD),
        // Radius-relative x and y are multiplied by the radius scale later.
        keypoints: vec![
            (0, parts::HEAD, Vector3::new(0.0, 0.0, 1.0)),
            (1, parts::HEAD, Vector3::new(0.0, HEAD_RADIUS, centre)),
            (2, parts::HEAD, Vector3::new(-HEAD_RADIUS, 0.0, centre)),
            (3, parts::HEAD, Vector3::new(HEAD_RADIUS, 0.0, centre)),
            (4, parts::TORSO, Vector3::new(0.0, 0.0, NECK_Z)),
            (5, parts::TORSO, Vector3::new(-shoulder_x, 0.0, TORSO[5].0)),
            (6, parts::TORSO, Vector3::new(shoulder_x, 0.0, TORSO[5].0)),
            (7, parts::TORSO, Vector3::new(-hip_x, 0.0, TORSO[0].0)),
            (8, parts::TORSO, Vector3::new(hip_x, 0.0, TORSO[0].0)),
        ],
        rings,
        x_offset: 0.0,
        pivot_z: 0.0,
        rotation: Rotation3::identity(),
    }
}

/// `side` is -1 for left (toward -x) and +1 for right.
fn leg_chain(side: f64, s: f64, height: f64, rng: &mut impl Rng) -> Chain {
    let (thigh, knee_kp, ankle_kp) = if side < 0.0 {
        (parts::LEFT_THIGH, 13, 15)
    } else {
        (parts::RIGHT_THIGH, 14, 16)
    };
    let segment_part: Vec<PartId> = (0..LEG.len())
        .map(|k| if k < LEG_KNEE { parts::CALVES } else { thigh })
        .collect();
    let pitch = rng.random_range(-3.0f64..3.0).to_radians();
    let roll = rng.random_range(-2.0f64..2.0).to_radians();
    Chain {
        rings: LEG.to_vec(),
        ring_label: ring_labels(&segment_part),
        segment_part,
        start: LatheEnd::Flat,
        end: LatheEnd::Flat,
        start_label: parts::CALVES,
        end_label: thigh,
        end_cone: None,
        keypoints: vec![
            (knee_kp, thigh, Vector3::new(0.0, 0.0, LEG[LEG_KNEE].0)),
            (ankle_kp, parts::CALVES, Vector3::new(0.0, 0.0, ANKLE_Z)),
        ],
        x_offset: side * (s * LEG[LEG.len() - 1].1 + 0.006) * height,
        pivot_z: LEG[LEG.len() - 1].0,
        rotation: Rotation3::from_euler_angles(pitch, roll, 0.0),
    }
}

fn arm_chain(side: f64, s: f64, height: f64, rng: &mut impl Rng) -> Chain {
    let (upper, fore, elbow_kp, wrist_kp) = if side < 0.0 {
        (parts::LEFT_ARM, parts::LEFT_FOREARM, 9, 11)
    } else {
        (parts::RIGHT_ARM, parts::RIGHT_FOREARM, 10, 12)
    };
    let segment_part: Vec<PartId> = (0..ARM.len())
        .map(|k| if k < ARM_ELBOW { fore } else { upper })
        .collect();
    // Arms hang slightly away from the body, swinging a little.
    let abduction = (8.0 + rng.random_range(-3.0f64..3.0)).to_radians();
    let swing = rng.random_range(-5.0f64..5.0).to_radians();
    Chain {
        rings: ARM.to_vec(),
        ring_label: ring_labels(&segment_part),
        segment_part,
        start: LatheEnd::Flat,
        end: LatheEnd::Flat,
        start_label: fore,
        end_label: upper,
        end_cone: None,
        keypoints: vec![
            (elbow_kp, upper, Vector3::new(0.0, 0.0, ARM[ARM_ELBOW].0)),
            (wrist_kp, fore, Vector3::new(0.0, 0.0, WRIST_Z)),
        ],
        x_offset: side * (s * (TORSO[5].1 + ARM[ARM.len() - 2].1) + 0.008) * height,
        pivot_z: ARM[ARM.len() - 1].0,
        rotation: Rotation3::from_euler_angles(swing, -side * abduction, 0.0),
    }
}

fn chains(s: f64, height: f64, res: Resolution, seed: u64) -> Vec<Chain> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let left_arm = arm_chain(-1.0, s, height, &mut rng);
    let right_arm = arm_chain(1.0, s, height, &mut rng);
    let left_leg = leg_chain(-1.0, s, height, &mut rng);
    let right_leg = leg_chain(1.0, s, height, &mut rng);
    vec![head_torso_chain(res), left_arm, right_arm, left_leg, right_leg]
}

fn analytic_volumes(chains: &[Chain], s: f64, height: f64) -> BTreeMap<PartId, f64> {
    let mut acc: BTreeMap<PartId, NeumaierSum> = BTreeMap::new();
    for c in chains {
        c.analytic(s, height, &mut acc);
    }
    acc.into_iter().map(|(p, v)| (p, v.value())).collect()
}

/// Build a body for `sample` with its volume hit exactly by a closed-form
/// radius scale. `seed` drives the limb jitter.
pub fn build_humanoid(sample: &PersonSample, seed: u64) -> Result<Humanoid, SceneError> {
    build_humanoid_with(sample, seed, Resolution::FINE)
}

pub fn build_humanoid_with(sample: &PersonSample, seed: u64, res: Resolution) -> Result<Humanoid, SceneError> {
    let height = sample.height_m;
    if !(height.is_finite() && height > 0.0 && sample.volume_dm3.is_finite() && sample.volume_dm3 > 0.0) {
        return Err(SceneError::UnreachableVolume {
            volume_dm3: sample.volume_dm3,
            height_m: height,
        });
    }
    // Lengths are fixed by height; volume is quadratic in the radius scale.
    let unit: f64 = analytic_volumes(&chains(1.0, height, res, seed), 1.0, height).values().sum();
    let s = (sample.volume_dm3 / unit).sqrt();
    if !(RADIUS_SCALE_RANGE.0..=RADIUS_SCALE_RANGE.1).contains(&s) {
        return Err(SceneError::UnreachableVolume {
            volume_dm3: sample.volume_dm3,
            height_m: height,
        });
    }
    let chains = chains(s, height, res, seed);
    let part_volumes_dm3 = analytic_volumes(&chains, s, height);
    let total_volume_dm3 = crate::numeric::sum(part_volumes_dm3.values().copied());
    let meshes: Vec<TriMesh> = chains.iter().map(|c| c.mesh(s, height, res)).collect();
    let mut keypoints: Vec<BodyKeypoint> = chains
        .iter()
        .flat_map(|c| {
            c.keypoints.iter().map(move |&(id, part_id, p)| {
                let local = Vector3::new(p.x * s * height, p.y * s * height, p.z * height);
                BodyKeypoint {
                    id,
                    part_id,
                    position: c.place(&local, height),
                }
            })
        })
        .collect();
    keypoints.sort_by_key(|k| k.id);
    Ok(Humanoid {
        mesh: TriMesh::merge(&meshes),
        part_volumes_dm3,
        total_volume_dm3,
        keypoints,
        head_centre: Vector3::new(0.0, 0.0, (1.0 - HEAD_RADIUS) * height),
        pelvis: Vector3::new(0.0, 0.0, TORSO[0].0 * height),
        radius_scale: s,
    })
}

impl Humanoid {
    /// Rotate about the vertical axis by `yaw` and move the feet to `at`.
    pub fn placed(&self, yaw: f64, at: &Vector3<f64>) -> Humanoid {
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
        let f = |p: &Vector3<f64>| r * p + at;
        Humanoid {
            mesh: self.mesh.map_vertices(f),
            part_volumes_dm3: self.part_volumes_dm3.clone(),
            total_volume_dm3: self.total_volume_dm3,
            keypoints: self
                .keypoints
                .iter()
                .map(|k| BodyKeypoint {
                    position: f(&k.position),
                    ..*k
                })
                .collect(),
            head_centre: f(&self.head_centre),
            pelvis: f(&self.pelvis),
            radius_scale: self.radius_scale,
        }
    }
}
