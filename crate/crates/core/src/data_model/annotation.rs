use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::taxonomy::{PartId, PartTaxonomy};

/// Allowed relative gap between the sum of part volumes and the person volume.
pub const PART_SUM_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: ValidationError,
    },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// An invariant violation, naming the frame and the offending field.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("frame `{frame_id}`: invalid {field}: {message}")]
pub struct ValidationError {
    pub frame_id: String,
    pub field: String,
    pub message: String,
}

/// Axis-aligned pixel box, `x` right and `y` down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Intersection with `[0, w] x [0, h]`, `None` when empty.
    pub fn clip(&self, w: f64, h: f64) -> Option<BBox> {
        let b = BBox::new(
            self.x_min.max(0.0),
            self.y_min.max(0.0),
            self.x_max.min(w),
            self.y_max.min(h),
        );
        (b.x_min < b.x_max && b.y_min < b.y_max).then_some(b)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub part_id: PartId,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonAnnotation {
    pub person_id: String,
    /// Outfit-invariant identity.
    pub character_id: String,
    pub head_px: [f64; 2],
    pub keypoints: Vec<Keypoint>,
    pub bbox_px: BBox,
    pub volume_dm3: f64,
    pub part_volumes_dm3: BTreeMap<PartId, f64>,
}

/// Pinhole intrinsics plus the rigid world-to-camera transform
/// `X_cam = R * X_world + t` (meters). Camera looks down +z, y points down.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraParams {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraParams {
    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * world + self.translation
    }

    /// Camera centre in world coordinates.
    pub fn position(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnnotation {
    pub frame_id: String,
    pub image_w: u32,
    pub image_h: u32,
    pub persons: Vec<PersonAnnotation>,
    pub scene_tags: BTreeSet<String>,
    pub camera: CameraParams,
}

impl FrameAnnotation {
    pub fn person_count(&self) -> usize {
        self.persons.len()
    }

    /// Frame total volume, always derived from the persons.
    pub fn total_volume_dm3(&self) -> f64 {
        crate::numeric::sum(self.persons.iter().map(|p| p.volume_dm3))
    }

    pub fn in_image(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.image_w as f64 && y < self.image_h as f64
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.scene_tags.contains(tag)
    }

    /// All invariants that do not depend on a part taxonomy.
    pub fn validate_structure(&self) -> Result<(), ValidationError> {
        let fail = |field: String, message: String| ValidationError {
            frame_id: self.frame_id.clone(),
            field,
            message,
        };
        if self.frame_id.is_empty() {
            return Err(fail("frame_id".into(), "empty".into()));
        }
        if self.image_w == 0 || self.image_h == 0 {
            return Err(fail("image_w/image_h".into(), "must be positive".into()));
        }
        let cam = &self.camera;
        if !(cam.fx.is_finite() && cam.fx > 0.0 && cam.fy.is_finite() && cam.fy > 0.0) {
            return Err(fail("camera.fx/fy".into(), "must be finite and > 0".into()));
        }
        if !(cam.cx.is_finite()
            && cam.cy.is_finite()
            && cam.rotation.iter().all(|v| v.is_finite())
            && cam.translation.iter().all(|v| v.is_finite()))
        {
            return Err(fail("camera".into(), "non-finite value".into()));
        }

        let mut seen = BTreeSet::new();
        for (i, p) in self.persons.iter().enumerate() {
            let field = |name: &str| format!("persons[{i}].{name}");
            if !seen.insert(p.person_id.as_str()) {
                return Err(fail(field("person_id"), format!("duplicate `{}`", p.person_id)));
            }
            if !(p.volume_dm3.is_finite() && p.volume_dm3 > 0.0) {
                return Err(fail(field("volume_dm3"), format!("{} is not > 0", p.volume_dm3)));
            }
            for (part, v) in &p.part_volumes_dm3 {
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(fail(
                        field("part_volumes_dm3"),
                        format!("part {part} has volume {v}"),
                    ));
                }
            }
            let parts_sum = crate::numeric::sum(p.part_volumes_dm3.values().copied());
            if (parts_sum - p.volume_dm3).abs() > PART_SUM_REL_TOL * p.volume_dm3 {
                return Err(fail(
                    field("part_volumes_dm3"),
                    format!("parts sum to {parts_sum} but volume_dm3 is {}", p.volume_dm3),
                ));
            }
            if !p.bbox_px.is_well_formed() {
                return Err(fail(field("bbox_px"), format!("{:?} is not well formed", p.bbox_px.as_array())));
            }
            let [hx, hy] = p.head_px;
            if !self.in_image(hx, hy) {
                return Err(fail(
                    field("head_px"),
                    format!("({hx}, {hy}) outside {}x{} image", self.image_w, self.image_h),
                ));
            }
            if let Some(k) = p.keypoints.iter().find(|k| !(k.x.is_finite() && k.y.is_finite())) {
                return Err(fail(field("keypoints"), format!("non-finite keypoint {k:?}")));
            }
        }
        Ok(())
    }

    /// Full validation, including part ids against `taxonomy`.
    pub fn validate(&self, taxonomy: &PartTaxonomy) -> Result<(), ValidationError> {
        self.validate_structure()?;
        for (i, p) in self.persons.iter().enumerate() {
            let unknown = p
                .keypoints
                .iter()
                .map(|k| k.part_id)
                .chain(p.part_volumes_dm3.keys().copied())
                .find(|id| !taxonomy.contains(*id));
            if let Some(id) = unknown {
                return Err(ValidationError {
                    frame_id: self.frame_id.clone(),
                    field: format!("persons[{i}]"),
                    message: format!("part id {id} not in taxonomy"),
                });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON Lines wire format

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraRecord {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    rotation: [f64; 9],
    translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PersonRecord {
    person_id: String,
    character_id: String,
    head_px: [f64; 2],
    bbox_px: [f64; 4],
    volume_dm3: f64,
    part_volumes_dm3: BTreeMap<PartId, f64>,
    keypoints: Vec<(f64, f64, PartId, u8)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    frame_id: String,
    image_w: u32,
    image_h: u32,
    scene_tags: BTreeSet<String>,
    camera: CameraRecord,
    persons: Vec<PersonRecord>,
}

impl From<&FrameAnnotation> for FrameRecord {
    fn from(f: &FrameAnnotation) -> Self {
        let r = &f.camera.rotation;
        FrameRecord {
            frame_id: f.frame_id.clone(),
            image_w: f.image_w,
            image_h: f.image_h,
            scene_tags: f.scene_tags.clone(),
            camera: CameraRecord {
                fx: f.camera.fx,
                fy: f.camera.fy,
                cx: f.camera.cx,
                cy: f.camera.cy,
                rotation: [
                    r[(0, 0)], r[(0, 1)], r[(0, 2)],
                    r[(1, 0)], r[(1, 1)], r[(1, 2)],
                    r[(2, 0)], r[(2, 1)], r[(2, 2)],
                ],
                translation: f.camera.translation.into(),
            },
            persons: f
                .persons
                .iter()
                .map(|p| PersonRecord {
                    person_id: p.person_id.clone(),
                    character_id: p.character_id.clone(),
                    head_px: p.head_px,
                    bbox_px: p.bbox_px.as_array(),
                    volume_dm3: p.volume_dm3,
                    part_volumes_dm3: p.part_volumes_dm3.clone(),
                    keypoints: p
                        .keypoints
                        .iter()
                        .map(|k| (k.x, k.y, k.part_id, k.visible as u8))
                        .collect(),
                })
                .collect(),
        }
    }
}

impl From<FrameRecord> for FrameAnnotation {
    fn from(r: FrameRecord) -> Self {
        FrameAnnotation {
            frame_id: r.frame_id,
            image_w: r.image_w,
            image_h: r.image_h,
            scene_tags: r.scene_tags,
            camera: CameraParams {
                fx: r.camera.fx,
                fy: r.camera.fy,
                cx: r.camera.cx,
                cy: r.camera.cy,
                rotation: Matrix3::from_row_slice(&r.camera.rotation),
                translation: Vector3::from(r.camera.translation),
            },
            persons: r
                .persons
                .into_iter()
                .map(|p| PersonAnnotation {
                    person_id: p.person_id,
                    character_id: p.character_id,
                    head_px: p.head_px,
                    bbox_px: BBox::new(p.bbox_px[0], p.bbox_px[1], p.bbox_px[2], p.bbox_px[3]),
                    volume_dm3: p.volume_dm3,
                    part_volumes_dm3: p.part_volumes_dm3,
                    keypoints: p
                        .keypoints
                        .into_iter()
                        .map(|(x, y, part_id, vis)| Keypoint {
                            x,
                            y,
                            part_id,
                            visible: vis != 0,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Canonical single-line JSON for one frame: keys sorted, floats in
/// shortest round-trip form.
pub fn to_json_line(frame: &FrameAnnotation) -> Result<String, ValidationError> {
    frame.validate_structure()?;
    // Value maps are BTreeMap-backed, so re-serialising through Value sorts keys.
    let value = serde_json::to_value(FrameRecord::from(frame)).expect("record serialises");
    Ok(value.to_string())
}

/// Parse one JSON line and validate it against `taxonomy`.
pub fn from_json_line(line: &str, taxonomy: &PartTaxonomy) -> Result<FrameAnnotation, AnnotationError> {
    let record: FrameRecord =
        serde_json::from_str(line).map_err(|source| AnnotationError::Parse { line: 1, source })?;
    let frame = FrameAnnotation::from(record);
    frame.validate(taxonomy)?;
    Ok(frame)
}

/// Read a JSON Lines annotation file, validating every frame.
pub fn read_annotations(
    path: impl AsRef<Path>,
    taxonomy: &PartTaxonomy,
) -> Result<Vec<FrameAnnotation>, AnnotationError> {
    let reader = BufReader::new(File::open(path)?);
    let mut frames = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: FrameRecord = serde_json::from_str(&line)
            .map_err(|source| AnnotationError::Parse { line: idx + 1, source })?;
        let frame = FrameAnnotation::from(record);
        frame
            .validate(taxonomy)
            .map_err(|source| AnnotationError::Invalid { line: idx + 1, source })?;
        frames.push(frame);
    }
    Ok(frames)
}

/// Write frames as canonical JSON Lines. Identical frames give identical bytes.
pub fn write_annotations(
    frames: &[FrameAnnotation],
    path: impl AsRef<Path>,
) -> Result<(), AnnotationError> {
    let lines = frames
        .iter()
        .map(to_json_line)
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = BufWriter::new(File::create(path)?);
    for line in lines {
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
