use std::cmp::Ordering;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::MeshVolError;

/// Default traversal tolerance for boundary-plane fitting, in meters.
pub const DEFAULT_PLANE_TOL: f64 = 5e-3;

/// Largest point count for which every point triple is a candidate.
pub const EXHAUSTIVE_LIMIT: usize = 30;

/// Number of sampled triples above [`EXHAUSTIVE_LIMIT`].
pub const SAMPLED_TRIPLES: usize = 2000;

const SAMPLING_SEED: u64 = 0x5eed_b0da_2d1e_9a11;

/// Oriented plane `{p : normal · p = offset}` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    /// Plane with the given normal direction through `point`. The normal is
    /// normalised; `None` if it is zero or non-finite.
    pub fn from_point_normal(point: &Vector3<f64>, normal: &Vector3<f64>) -> Option<Plane> {
        let n = normal.try_normalize(0.0)?;
        if !n.iter().all(|c| c.is_finite()) {
            return None;
        }
        Some(Plane {
            normal: n,
            offset: n.dot(point),
        })
    }

    /// Axis-aligned plane `z = height` with normal `+z`.
    pub fn horizontal(height: f64) -> Plane {
        Plane {
            normal: Vector3::z(),
            offset: height,
        }
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// Same plane with the normal's first nonzero component made positive.
    pub fn canonical(self) -> Plane {
        let flip = self
            .normal
            .iter()
            .find(|c| **c != 0.0)
            .is_some_and(|c| *c < 0.0);
        if flip {
            Plane {
                normal: -self.normal,
                offset: -self.offset,
            }
        } else {
            self
        }
    }

    fn through(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> Option<Plane> {
        let n = (b - a).cross(&(c - a));
        let scale = (b - a).norm() * (c - a).norm();
        // Reject (nearly) collinear triples.
        if !(n.norm() > 1e-12 * scale) {
            return None;
        }
        Plane::from_point_normal(a, &n).map(Plane::canonical)
    }

    fn lexicographic_cmp(&self, other: &Plane) -> Ordering {
        let a = [self.normal.x, self.normal.y, self.normal.z, self.offset];
        let b = [other.normal.x, other.normal.y, other.normal.z, other.offset];
        a.iter()
            .zip(&b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

/// Plane chosen for a boundary ring together with the points it traverses.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub plane: Plane,
    /// Indices into the input of points within `tol` of the plane, ascending.
    pub traversed: Vec<usize>,
    /// Root-mean-square distance of the remaining points (0 if none).
    pub rms_untraversed: f64,
}

fn score(plane: Plane, points: &[Vector3<f64>], tol: f64) -> PlaneFit {
    let mut traversed = Vec::new();
    let mut sq = crate::numeric::NeumaierSum::new();
    let mut misses = 0usize;
    for (i, p) in points.iter().enumerate() {
        let d = plane.signed_distance(p);
        if d.abs() <= tol {
            traversed.push(i);
        } else {
            sq.add(d * d);
            misses += 1;
        }
    }
    let rms_untraversed = if misses == 0 {
        0.0
    } else {
        (sq.value() / misses as f64).sqrt()
    };
    PlaneFit {
        plane,
        traversed,
        rms_untraversed,
    }
}

/// Total order: more traversed points first, then smaller RMS distance of
/// the rest, then the lexicographically smallest `(normal, offset)`.
fn better(a: &PlaneFit, b: &PlaneFit) -> bool {
    b.traversed
        .len()
        .cmp(&a.traversed.len())
        .then(a.rms_untraversed.total_cmp(&b.rms_untraversed))
        .then(a.plane.lexicographic_cmp(&b.plane))
        .is_lt()
}

pub fn least_squares_plane(points: &[Vector3<f64>]) -> Option<Plane> {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (min_idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let normal = eig.eigenvectors.column(min_idx).into_owned();
    Plane::from_point_normal(&centroid, &normal).map(Plane::canonical)
}

/// Fit the plane that traverses the most boundary points within `tol`,
/// preferring the smallest RMS distance to the points it misses.
///
/// Candidates are planes through point triples: all of them up to
/// [`EXHAUSTIVE_LIMIT`] points, otherwise [`SAMPLED_TRIPLES`] triples drawn
/// from a fixed seed plus the least-squares plane. The result depends only
/// on the input list.
pub fn fit_boundary_plane(points: &[Vector3<f64>], tol: f64) -> Result<PlaneFit, MeshVolError> {
    if points.len() < 3 {
        return Err(MeshVolError::TooFewPoints(points.len()));
    }
    let mut best: Option<PlaneFit> = None;
    let mut consider = |plane: Plane| {
        let fit = score(plane, points, tol);
        if best.as_ref().is_none_or(|b| better(&fit, b)) {
            best = Some(fit);
        }
    };

    let n = points.len();
    if n <= EXHAUSTIVE_LIMIT {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    if let Some(p) = Plane::through(&points[i], &points[j], &points[k]) {
                        consider(p);
                    }
                }
            }
        }
    } else {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(SAMPLING_SEED ^ n as u64);
        for _ in 0..SAMPLED_TRIPLES {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let k = rng.random_range(0..n);
            if i == j || j == k || i == k {
                continue;
            }
            if let Some(p) = Plane::through(&points[i], &points[j], &points[k]) {
                consider(p);
            }
        }
        if let Some(p) = least_squares_plane(points) {
            consider(p);
        }
    }
    best.ok_or(MeshVolError::Collinear)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_flips_sign() {
        let p = Plane {
            normal: Vector3::new(0.0, -1.0, 0.0),
            offset: 2.0,
        }
        .canonical();
        assert_eq!(p.normal, Vector3::new(0.0, 1.0, 0.0));
        assert_eq!(p.offset, -2.0);
    }

    #[test]
    fn three_points_give_their_plane() {
        let pts = [
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        ];
        let fit = fit_boundary_plane(&pts, 1e-9).unwrap();
        assert_eq!(fit.traversed, vec![0, 1, 2]);
        let s = 1.0 / 3f64.sqrt();
        assert!((fit.plane.normal - Vector3::new(s, s, s)).norm() < 1e-15);
        assert!((fit.plane.offset - s).abs() < 1e-15);
    }

    #[test]
    fn collinear_points_fail() {
        let pts: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(fit_boundary_plane(&pts, 1e-3), Err(MeshVolError::Collinear)));
        assert!(matches!(
            fit_boundary_plane(&pts[..2], 1e-3),
            Err(MeshVolError::TooFewPoints(2))
        ));
    }

    #[test]
    fn least_squares_recovers_tilted_plane() {
        let n = Vector3::new(0.2, -0.3, 1.0).normalize();
        let u = n.cross(&Vector3::x()).normalize();
        let v = n.cross(&u);
        let pts: Vec<_> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.7;
                u * t.cos() * 0.4 + v * t.sin() * 0.3 + n * 1.5
            })
            .collect();
        let p = least_squares_plane(&pts).unwrap();
        assert!((p.normal - n).norm() < 1e-9);
        assert!((p.offset - 1.5).abs() < 1e-9);
    }
}
