//! Volume density maps (VDM) and per-part maps (PP-VDM).
//!
//! Each person is rendered into its own window and then added to the frame
//! map pixel by pixel in person order, so rendering persons separately and
//! summing gives bit-identical results to a joint render.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{DensityMap, FrameAnnotation, PartTaxonomy, PersonAnnotation};

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("invalid smoothing config: {0}")]
    Config(String),
    #[error("person {person_id}: head_px ({x}, {y}) is outside the image")]
    HeadOutOfImage { person_id: String, x: f64, y: f64 },
    #[error("person {person_id}: part {part_id} has volume but no keypoints")]
    UncoveredPart { person_id: String, part_id: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Gaussian standard deviation in pixels; 0 renders pure impulses.
    pub sigma_px: f64,
    /// Kernel half-width in multiples of `sigma_px`.
    pub truncation_radius: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            sigma_px: 4.0,
            truncation_radius: 4.0,
        }
    }
}

impl SmoothingConfig {
    pub fn impulses() -> Self {
        Self {
            sigma_px: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DensityError> {
        if !(self.sigma_px.is_finite() && self.sigma_px >= 0.0) {
            return Err(DensityError::Config(format!("sigma_px {} must be >= 0", self.sigma_px)));
        }
        if !(self.truncation_radius.is_finite() && self.truncation_radius > 0.0) {
            return Err(DensityError::Config(format!(
                "truncation_radius {} must be > 0",
                self.truncation_radius
            )));
        }
        Ok(())
    }

    /// Kernel half-width in pixels.
    pub fn radius_px(&self) -> usize {
        (self.truncation_radius * self.sigma_px).ceil() as usize
    }
}

/// Nearest pixel centre to a coordinate inside `[0, size)`, ties toward the
/// smaller index.
pub fn nearest_pixel(coord: f64, size: u32) -> usize {
    ((coord - 0.5).ceil().max(0.0) as usize).min(size as usize - 1)
}

/// One-dimensional Gaussian weights for offsets `-r..=r`.
struct Kernel {
    radius: usize,
    weights: Vec<f64>,
}

impl Kernel {
    fn new(cfg: &SmoothingConfig) -> Self {
        if cfg.sigma_px == 0.0 {
            return Self {
                radius: 0,
                weights: vec![1.0],
            };
        }
        let radius = cfg.radius_px();
        let weights = (0..=2 * radius)
            .map(|i| {
                let d = i as f64 - radius as f64;
                (-0.5 * (d / cfg.sigma_px).powi(2)).exp()
            })
            .collect();
        Self { radius, weights }
    }

    /// In-image pixel range and weights normalised over it, for a centre
    /// pixel `c` on an axis of `size` pixels.
    fn clipped(&self, c: usize, size: usize) -> (usize, Vec<f64>) {
        let lo = c.saturating_sub(self.radius);
        let hi = (c + self.radius).min(size - 1);
        let w: Vec<f64> = (lo..=hi).map(|p| self.weights[p + self.radius - c]).collect();
        let total = crate::numeric::sum(w.iter().copied());
        (lo, w.into_iter().map(|x| x / total).collect())
    }
}

/// A person's impulses accumulated over a local window.
struct Window {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    values: Vec<f64>,
}

impl Window {
    fn covering(impulses: &[(usize, usize, f64)], radius: usize, width: usize, height: usize) -> Window {
        let x0 = impulses.iter().map(|i| i.0).min().unwrap_or(0).saturating_sub(radius);
        let y0 = impulses.iter().map(|i| i.1).min().unwrap_or(0).saturating_sub(radius);
        let x1 = (impulses.iter().map(|i| i.0).max().unwrap_or(0) + radius).min(width - 1);
        let y1 = (impulses.iter().map(|i| i.1).max().unwrap_or(0) + radius).min(height - 1);
        let (w, h) = (x1 + 1 - x0, y1 + 1 - y0);
        Window {
            x0,
            y0,
            w,
            h,
            values: vec![0.0; w * h],
        }
    }

    fn splat(&mut self, kernel: &Kernel, px: usize, py: usize, mass: f64, width: usize, height: usize) {
        let (xs, wx) = kernel.clipped(px, width);
        let (ys, wy) = kernel.clipped(py, height);
        for (j, wyj) in wy.iter().enumerate() {
            let row = (ys + j - self.y0) * self.w;
            for (i, wxi) in wx.iter().enumerate() {
                self.values[row + xs + i - self.x0] += mass * wyj * wxi;
            }
        }
    }

    fn add_into(&self, map: &mut DensityMap) {
        for y in 0..self.h {
            for x in 0..self.w {
                let v = self.values[y * self.w + x];
                if v != 0.0 {
                    map.add_at(self.x0 + x, self.y0 + y, v);
                }
            }
        }
    }
}

fn render(
    frame: &FrameAnnotation,
    cfg: &SmoothingConfig,
    mut impulses_of: impl FnMut(&PersonAnnotation) -> Result<Vec<(usize, usize, f64)>, DensityError>,
) -> Result<DensityMap, DensityError> {
    cfg.validate()?;
    let (width, height) = (frame.image_w as usize, frame.image_h as usize);
    let mut map = DensityMap::zeros(width, height);
    let kernel = Kernel::new(cfg);
    for person in &frame.persons {
        let impulses = impulses_of(person)?;
        if impulses.is_empty() {
            continue;
        }
        let mut window = Window::covering(&impulses, kernel.radius, width, height);
        for &(px, py, mass) in &impulses {
            window.splat(&kernel, px, py, mass, width, height);
        }
        window.add_into(&mut map);
    }
    Ok(map)
}

fn head_pixel(frame: &FrameAnnotation, person: &PersonAnnotation) -> Result<(usize, usize), DensityError> {
    let [x, y] = person.head_px;
    if !frame.in_image(x, y) {
        return Err(DensityError::HeadOutOfImage {
            person_id: person.person_id.clone(),
            x,
            y,
        });
    }
    Ok((nearest_pixel(x, frame.image_w), nearest_pixel(y, frame.image_h)))
}

/// Whole-body map: each person's volume placed at the head.
pub fn render_vdm(frame: &FrameAnnotation, cfg: &SmoothingConfig) -> Result<DensityMap, DensityError> {
    render(frame, cfg, |person| {
        let (px, py) = head_pixel(frame, person)?;
        Ok(vec![(px, py, person.volume_dm3)])
    })
}

/// Per-part map: each part's volume is shared equally by its visible,
/// in-image keypoints, falling back to the head when none are left.
pub fn render_ppvdm(
    frame: &FrameAnnotation,
    taxonomy: &PartTaxonomy,
    cfg: &SmoothingConfig,
) -> Result<DensityMap, DensityError> {
    render(frame, cfg, |person| {
        let head = head_pixel(frame, person)?;
        if person.part_volumes_dm3.is_empty() {
            return Ok(vec![(head.0, head.1, person.volume_dm3)]);
        }
        let mut impulses = Vec::new();
        for (&part, &volume) in &person.part_volumes_dm3 {
            if volume == 0.0 {
                continue;
            }
            let listed: Vec<_> = person.keypoints.iter().filter(|k| k.part_id == part).collect();
            if listed.is_empty() {
                // A taxonomy part without keypoints has nowhere to go.
                let uncovered = !taxonomy.keypoints(part).is_empty();
                if uncovered {
                    return Err(DensityError::UncoveredPart {
                        person_id: person.person_id.clone(),
                        part_id: part,
                    });
                }
            }
            let usable: Vec<_> = listed
                .into_iter()
                .filter(|k| k.visible && frame.in_image(k.x, k.y))
                .collect();
            if usable.is_empty() {
                impulses.push((head.0, head.1, volume));
                continue;
            }
            let share = volume / usable.len() as f64;
            for k in usable {
                impulses.push((nearest_pixel(k.x, frame.image_w), nearest_pixel(k.y, frame.image_h), share));
            }
        }
        Ok(impulses)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{BBox, CameraParams, Keypoint};
    use nalgebra::{Matrix3, Vector3};
    use std::collections::BTreeMap;

    fn frame(w: u32, h: u32, persons: Vec<PersonAnnotation>) -> FrameAnnotation {
        FrameAnnotation {
            frame_id: "f".into(),
            image_w: w,
            image_h: h,
            persons,
            scene_tags: Default::default(),
            camera: CameraParams {
                fx: 100.0,
                fy: 100.0,
                cx: w as f64 / 2.0,
                cy: h as f64 / 2.0,
                rotation: Matrix3::identity(),
                translation: Vector3::zeros(),
            },
        }
    }

    fn person(head: [f64; 2], volume: f64) -> PersonAnnotation {
        PersonAnnotation {
            person_id: "p".into(),
            character_id: "c".into(),
            head_px: head,
            keypoints: vec![],
            bbox_px: BBox::new(head[0] - 1.0, head[1] - 1.0, head[0] + 1.0, head[1] + 1.0),
            volume_dm3: volume,
            part_volumes_dm3: BTreeMap::new(),
        }
    }

    #[test]
    fn empty_frame_is_zero() {
        let map = render_vdm(&frame(16, 8, vec![]), &SmoothingConfig::default()).unwrap();
        assert!(map.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_lands_on_the_head_pixel() {
        let f = frame(64, 64, vec![person([32.0, 32.0], 70.0)]);
        let map = render_vdm(&f, &SmoothingConfig::impulses()).unwrap();
        assert_eq!(map.get(32, 32), 70.0);
        assert_eq!(map.sum(), 70.0);
    }

    #[test]
    fn border_impulse_keeps_its_mass() {
        let f = frame(64, 64, vec![person([2.0, 30.0], 70.0)]);
        let map = render_vdm(&f, &SmoothingConfig::default()).unwrap();
        assert!((map.sum() - 70.0).abs() <= 1e-6 * 70.0);
        // Independent oracle: raw 2D Gaussian clipped to the image, renormalised.
        let mut raw = vec![0.0; 64 * 64];
        for y in 0..64 {
            for x in 0..64 {
                let (dx, dy) = (x as f64 - 2.0, y as f64 - 30.0);
                if dx.abs() <= 16.0 && dy.abs() <= 16.0 {
                    raw[y * 64 + x] = (-(dx * dx + dy * dy) / 32.0).exp();
                }
            }
        }
        let total: f64 = raw.iter().sum();
        let expected = 70.0 * raw[30 * 64 + 2] / total;
        assert!((map.get(2, 30) - expected).abs() < 1e-12);
    }

    #[test]
    fn ties_round_toward_the_smaller_pixel() {
        assert_eq!(nearest_pixel(3.5, 10), 3);
        assert_eq!(nearest_pixel(3.51, 10), 4);
        assert_eq!(nearest_pixel(0.2, 10), 0);
        assert_eq!(nearest_pixel(9.9, 10), 9);
    }

    #[test]
    fn head_outside_image_fails() {
        let f = frame(10, 10, vec![person([12.0, 3.0], 1.0)]);
        assert!(matches!(
            render_vdm(&f, &SmoothingConfig::impulses()),
            Err(DensityError::HeadOutOfImage { .. })
        ));
    }

    fn torso_person(visible: [bool; 5]) -> PersonAnnotation {
        let mut p = person([20.0, 5.0], 30.0);
        p.part_volumes_dm3.insert(1, 30.0);
        p.keypoints = (0..5)
            .map(|i| Keypoint {
                x: 10.0 + 4.0 * i as f64,
                y: 12.0,
                part_id: 1,
                visible: visible[i],
            })
            .collect();
        p
    }

    #[test]
    fn torso_volume_is_split_over_its_keypoints() {
        let tax = PartTaxonomy::default();
        let f = frame(40, 20, vec![torso_person([true; 5])]);
        let map = render_ppvdm(&f, &tax, &SmoothingConfig::impulses()).unwrap();
        for i in 0..5 {
            assert_eq!(map.get(10 + 4 * i, 12), 6.0);
        }
        let f = frame(40, 20, vec![torso_person([true, false, true, false, true])]);
        let map = render_ppvdm(&f, &tax, &SmoothingConfig::impulses()).unwrap();
        assert_eq!(map.get(10, 12), 10.0);
        assert_eq!(map.get(14, 12), 0.0);
        assert_eq!(map.sum(), 30.0);
    }

    #[test]
    fn hidden_part_falls_back_to_the_head() {
        let tax = PartTaxonomy::default();
        let f = frame(40, 20, vec![torso_person([false; 5])]);
        let map = render_ppvdm(&f, &tax, &SmoothingConfig::impulses()).unwrap();
        assert_eq!(map.get(20, 5), 30.0);
    }

    #[test]
    fn part_without_keypoints_is_an_error() {
        let tax = PartTaxonomy::default();
        let mut p = torso_person([true; 5]);
        p.part_volumes_dm3 = BTreeMap::from([(1, 20.0), (0, 10.0)]);
        let f = frame(40, 20, vec![p]);
        assert!(matches!(
            render_ppvdm(&f, &tax, &SmoothingConfig::impulses()),
            Err(DensityError::UncoveredPart { part_id: 0, .. })
        ));
    }
}
