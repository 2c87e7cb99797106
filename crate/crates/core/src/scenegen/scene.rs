//! Frame and dataset generation.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::Vector3;
use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use super::camera::{look_at, project, top_down};
use super::config::{SceneConfig, Split};
use super::humanoid::{build_humanoid_with, Humanoid, Resolution};
use super::SceneError;
use crate::anthro::{sample_population, PersonSample};
use crate::data_model::{
    write_annotations, BBox, CameraParams, FrameAnnotation, Keypoint, PersonAnnotation,
};

/// Minimum camera-frame depth of any body vertex, meters.
const NEAR_PLANE: f64 = 0.05;
const BIRDS_EYE: &str = "birds_eye";
const HEAVY_OCCLUSION: &str = "heavy_occlusion";

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream seed for `(seed, label, index)`.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    // FNV-1a keeps the label hash stable across toolchains.
    let label_hash = label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    splitmix(splitmix(seed ^ label_hash) ^ index)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Character {
    pub id: String,
    pub sample: PersonSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacterPool {
    pub split: Split,
    pub characters: Vec<Character>,
}

/// Disjoint identity pools; ids are numbered globally across splits.
pub fn character_pools(cfg: &SceneConfig, seed: u64) -> Result<Vec<CharacterPool>, SceneError> {
    let samples = sample_population(&cfg.model, cfg.pools.total(), derive_seed(seed, "characters", 0))?;
    let mut next = 0usize;
    Ok(Split::ALL
        .iter()
        .map(|&split| {
            let characters = (0..cfg.pools.get(split))
                .map(|_| {
                    let c = Character {
                        id: format!("c{next:04}"),
                        sample: samples[next],
                    };
                    next += 1;
                    c
                })
                .collect();
            CharacterPool { split, characters }
        })
        .collect())
}

fn uniform(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..range[1])
    }
}

fn frame_camera(cfg: &SceneConfig, birds_eye: bool, rng: &mut impl Rng) -> CameraParams {
    let focal = uniform(rng, cfg.focal_range);
    let (cx, cy) = cfg.area.centre();
    if birds_eye {
        let h = uniform(rng, cfg.birds_eye_height_range);
        return top_down(&Vector3::new(cx, cy, 0.0), h, focal, cfg.image_w, cfg.image_h);
    }
    let h = uniform(rng, cfg.camera_height_range);
    let eye = Vector3::new(cx, cfg.area.y_min - 2.0, h);
    let target = Vector3::new(cx + rng.random_range(-1.0..1.0), cy, 0.0);
    look_at(&eye, &target, &Vector3::z(), focal, cfg.image_w, cfg.image_h).expect("oblique camera is well defined")
}

struct Placed {
    character: usize,
    body: Humanoid,
    bbox: BBox,
    head_px: [f64; 2],
    keypoints_px: Vec<[f64; 2]>,
    depth: f64,
}

/// Project a placed body; `None` if it is not fully in front of the camera
/// or its head centre misses the image.
fn image_of(body: Humanoid, character: usize, cam: &CameraParams, w: f64, h: f64) -> Option<Placed> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for v in &body.mesh.vertices {
        if cam.to_camera(v).z < NEAR_PLANE {
            return None;
        }
        let p = project(v, cam).ok()?;
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let head_px = project(&body.head_centre, cam).ok()?;
    if !(head_px[0] >= 0.0 && head_px[0] < w && head_px[1] >= 0.0 && head_px[1] < h) {
        return None;
    }
    let bbox = BBox::new(lo[0].clamp(0.0, w), lo[1].clamp(0.0, h), hi[0].clamp(0.0, w), hi[1].clamp(0.0, h));
    if !(bbox.area() > 0.0) {
        return None;
    }
    let keypoints_px = body
        .keypoints
        .iter()
        .map(|k| project(&k.position, cam))
        .collect::<Result<Vec<_>, _>>()
        .ok()?;
    let depth = cam.to_camera(&body.pelvis).z;
    Some(Placed {
        character,
        body,
        bbox,
        head_px,
        keypoints_px,
        depth,
    })
}

/// One annotated frame, a pure function of `(cfg, pool, seed, frame_idx)`.
pub fn generate_frame(
    cfg: &SceneConfig,
    pool: &CharacterPool,
    seed: u64,
    frame_idx: u64,
) -> Result<FrameAnnotation, SceneError> {
    let frame_id = format!("{}_{frame_idx:06}", pool.split);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, pool.split.name(), frame_idx));

    let mut scene_tags: BTreeSet<String> = cfg
        .tag_probabilities
        .iter()
        .filter(|(_, &p)| rng.random::<f64>() < p)
        .map(|(t, _)| t.clone())
        .collect();
    let camera = frame_camera(cfg, scene_tags.contains(BIRDS_EYE), &mut rng);
    let n = rng.random_range(cfg.persons_range[0]..=cfg.persons_range[1]);
    let pool_size = pool.characters.len();
    if n > 0 && pool_size == 0 {
        return Err(SceneError::PoolTooSmall {
            split: pool.split.to_string(),
            size: 0,
            needed: 1,
        });
    }
    let chosen: Vec<usize> = if n <= pool_size {
        index::sample(&mut rng, pool_size, n).into_vec()
    } else {
        (0..n).map(|_| rng.random_range(0..pool_size)).collect()
    };

    let (w, h) = (cfg.image_w as f64, cfg.image_h as f64);
    let mut placed: Vec<Placed> = Vec::with_capacity(n);
    let mut feet: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &c in &chosen {
        let body = build_humanoid_with(&pool.characters[c].sample, rng.next_u64(), Resolution::COARSE)?;
        let mut accepted = None;
        for _ in 0..cfg.placement_retries.max(1) {
            let x = rng.random_range(cfg.area.x_min..cfg.area.x_max);
            let y = rng.random_range(cfg.area.y_min..cfg.area.y_max);
            let yaw = rng.random_range(0.0..std::f64::consts::TAU);
            let min_gap = 2.0 * cfg.disc_radius;
            if feet.iter().any(|&(fx, fy)| (fx - x).hypot(fy - y) < min_gap) {
                continue;
            }
            if let Some(p) = image_of(body.placed(yaw, &Vector3::new(x, y, 0.0)), c, &camera, w, h) {
                accepted = Some((p, (x, y)));
                break;
            }
        }
        let Some((p, foot)) = accepted else {
            return Err(SceneError::Placement {
                frame_id,
                placed: placed.len(),
                requested: n,
            });
        };
        placed.push(p);
        feet.push(foot);
    }

    // Painter's test: a keypoint inside the box of a nearer person is hidden.
    let mut hidden = 0usize;
    let mut total = 0usize;
    let mut persons = Vec::with_capacity(n);
    for (i, p) in placed.iter().enumerate() {
        let keypoints: Vec<Keypoint> = p
            .body
            .keypoints
            .iter()
            .zip(&p.keypoints_px)
            .map(|(k, &[x, y])| {
                let in_image = x >= 0.0 && x < w && y >= 0.0 && y < h;
                let occluded = placed
                    .iter()
                    .enumerate()
                    .any(|(j, q)| j != i && q.depth < p.depth && q.bbox.contains(x, y));
                let visible = in_image && !occluded;
                total += 1;
                hidden += usize::from(!visible);
                Keypoint {
                    x,
                    y,
                    part_id: k.part_id,
                    visible,
                }
            })
            .collect();
        persons.push(PersonAnnotation {
            person_id: format!("{frame_id}_p{i:03}"),
            character_id: pool.characters[p.character].id.clone(),
            head_px: p.head_px,
            keypoints,
            bbox_px: p.bbox,
            volume_dm3: p.body.total_volume_dm3,
            part_volumes_dm3: p.body.part_volumes_dm3.clone(),
        });
    }
    if total > 0 && hidden as f64 > cfg.heavy_occlusion_fraction * total as f64 {
        scene_tags.insert(HEAVY_OCCLUSION.to_string());
    }
    let frame = FrameAnnotation {
        frame_id,
        image_w: cfg.image_w,
        image_h: cfg.image_h,
        persons,
        scene_tags,
        camera,
    };
    frame.validate_structure()?;
    Ok(frame)
}

/// All frames of one split, generated in parallel on the current rayon
/// pool and returned in frame order.
pub fn generate_split(cfg: &SceneConfig, pool: &CharacterPool, seed: u64) -> Result<Vec<FrameAnnotation>, SceneError> {
    let results: Vec<Result<FrameAnnotation, SceneError>> = (0..cfg.frames.get(pool.split) as u64)
        .into_par_iter()
        .map(|i| generate_frame(cfg, pool, seed, i))
        .collect();
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub frames: Vec<(Split, usize)>,
    pub persons: usize,
}

/// Write `train.jsonl`, `val.jsonl` and `test.jsonl` under `out_dir`.
pub fn generate_dataset(cfg: &SceneConfig, seed: u64, out_dir: &Path) -> Result<DatasetSummary, SceneError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let pools = character_pools(cfg, seed)?;
    let mut summary = DatasetSummary {
        frames: Vec::new(),
        persons: 0,
    };
    for pool in &pools {
        let frames = generate_split(cfg, pool, seed)?;
        summary.persons += frames.iter().map(|f| f.persons.len()).sum::<usize>();
        summary.frames.push((pool.split, frames.len()));
        write_annotations(&frames, out_dir.join(format!("{}.jsonl", pool.split)))?;
    }
    Ok(summary)
}
