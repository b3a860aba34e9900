use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cloud::OrganizedPointCloud;
use crate::error::{Error, Result};

/// Plane `normal . p + offset = 0` with a unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneModel {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl PlaneModel {
    /// Builds a plane through `point`, normalising `normal`.
    pub fn through(point: &Vector3<f64>, normal: &Vector3<f64>) -> Option<Self> {
        let n = normal.try_normalize(1e-12)?;
        Some(Self {
            normal: n,
            offset: -n.dot(point),
        })
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) + self.offset
    }

    /// Flips the normal so that the origin (the camera centre) lies on the
    /// positive side.
    pub fn oriented_toward_origin(self) -> Self {
        if self.offset < 0.0 {
            Self {
                normal: -self.normal,
                offset: -self.offset,
            }
        } else {
            self
        }
    }
}

/// Least-squares plane through `points` (smallest-eigenvalue direction of
/// the scatter matrix through the centroid).
pub fn fit_plane(points: &[Vector3<f64>]) -> Option<PlaneModel> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let (i, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    PlaneModel::through(&centroid, &eig.eigenvectors.column(i).into_owned())
}

/// Seeded RANSAC for the dominant plane. The best hypothesis (most inliers
/// within `inlier_threshold`) is refit to its inliers by least squares and
/// oriented toward the camera.
pub fn ransac_plane(cloud: &OrganizedPointCloud, iterations: usize, inlier_threshold: f64, seed: u64) -> Result<PlaneModel> {
    let points: Vec<Vector3<f64>> = cloud.valid_points().map(|(_, p)| p).collect();
    if points.len() < 3 {
        return Err(Error::Segmentation(format!(
            "need at least 3 valid points, cloud has {}",
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, PlaneModel)> = None;
    for _ in 0..iterations.max(1) {
        let i = rng.random_range(0..points.len());
        let j = rng.random_range(0..points.len());
        let k = rng.random_range(0..points.len());
        if i == j || j == k || i == k {
            continue;
        }
        let n = (points[j] - points[i]).cross(&(points[k] - points[i]));
        let Some(plane) = PlaneModel::through(&points[i], &n) else {
            continue;
        };
        let count = points
            .iter()
            .filter(|p| plane.signed_distance(p).abs() <= inlier_threshold)
            .count();
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            best = Some((count, plane));
        }
    }
    let (_, hypothesis) = best.ok_or_else(|| Error::Segmentation("all samples were degenerate".into()))?;
    let inliers: Vec<Vector3<f64>> = points
        .iter()
        .copied()
        .filter(|p| hypothesis.signed_distance(p).abs() <= inlier_threshold)
        .collect();
    let refit = fit_plane(&inliers).unwrap_or(hypothesis);
    Ok(refit.oriented_toward_origin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_points() {
        let mut c = OrganizedPointCloud::empty(4, 4);
        c.set(0, 0, Some(Vector3::new(0.0, 0.0, 1.0)));
        c.set(1, 1, Some(Vector3::new(0.1, 0.0, 1.0)));
        assert!(matches!(ransac_plane(&c, 10, 0.005, 0), Err(Error::Segmentation(_))));
    }

    #[test]
    fn orientation_puts_camera_on_positive_side() {
        let p = PlaneModel::through(&Vector3::new(0.0, 0.0, 0.7), &Vector3::new(0.0, 0.0, 1.0))
            .unwrap()
            .oriented_toward_origin();
        assert!(p.signed_distance(&Vector3::zeros()) > 0.0);
        assert!((p.normal - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    }
}
