//! Pinhole cameras in a z-up world.

use nalgebra::{Matrix3, Vector3};

use super::SceneError;
use crate::data_model::CameraParams;

/// Pixel coordinates of a world point.
pub fn project(point: &Vector3<f64>, camera: &CameraParams) -> Result<[f64; 2], SceneError> {
    let c = camera.to_camera(point);
    if c.z <= 0.0 {
        return Err(SceneError::BehindCamera { depth: c.z });
    }
    Ok([camera.fx * c.x / c.z + camera.cx, camera.fy * c.y / c.z + camera.cy])
}

/// Camera at `eye` looking at `target`; image x follows `forward × up`
/// and image y points down.
pub fn look_at(
    eye: &Vector3<f64>,
    target: &Vector3<f64>,
    up: &Vector3<f64>,
    focal: f64,
    image_w: u32,
    image_h: u32,
) -> Option<CameraParams> {
    let z = (target - eye).try_normalize(1e-12)?;
    let x = z.cross(up).try_normalize(1e-12)?;
    let y = z.cross(&x);
    let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    Some(CameraParams {
        fx: focal,
        fy: focal,
        cx: image_w as f64 / 2.0,
        cy: image_h as f64 / 2.0,
        rotation,
        translation: -(rotation * eye),
    })
}

/// Straight-down view from `height` above `centre`, image up along +y.
pub fn top_down(centre: &Vector3<f64>, height: f64, focal: f64, image_w: u32, image_h: u32) -> CameraParams {
    let eye = centre + Vector3::new(0.0, 0.0, height);
    look_at(&eye, centre, &Vector3::y(), focal, image_w, image_h).expect("vertical view is well defined")
}
