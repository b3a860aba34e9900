use nalgebra::{Matrix3, Point3, Vector3};

/// Pinhole camera above a table. The table frame has z up and the camera
/// looks along +y, pitched down so that the optical axis meets the table at
/// the table-frame origin. Pixel `(row, col)` has its centre at
/// `u = col`, `v = row`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Height of the optical centre above the table, meters.
    pub elevation: f64,
    /// Downward pitch of the optical axis, degrees.
    pub pitch_deg: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fx: 480.0,
            fy: 480.0,
            cx: 113.0,
            cy: 113.0,
            width: 227,
            height: 227,
            elevation: 0.70,
            pitch_deg: 55.0,
        }
    }
}

impl CameraModel {
    /// Columns are the camera x, y, z axes expressed in the table frame.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (s, c) = self.pitch_deg.to_radians().sin_cos();
        let x = Vector3::new(1.0, 0.0, 0.0);
        let z = Vector3::new(0.0, c, -s);
        let y = z.cross(&x);
        Matrix3::from_columns(&[x, y, z])
    }

    /// Optical centre in the table frame.
    pub fn center(&self) -> Point3<f64> {
        let t = self.pitch_deg.to_radians().tan();
        Point3::new(0.0, -self.elevation / t, self.elevation)
    }

    pub fn table_to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation().transpose() * (p - self.center())
    }

    pub fn camera_to_table(&self, p: &Vector3<f64>) -> Point3<f64> {
        self.center() + self.rotation() * p
    }

    /// `(row, col)` of a camera-frame point, or `None` behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        (p.z > 1e-9).then(|| (self.fy * p.y / p.z + self.cy, self.fx * p.x / p.z + self.cx))
    }

    /// Camera-frame ray direction (z = 1) through a sub-pixel location.
    pub fn ray(&self, row: f64, col: f64) -> Vector3<f64> {
        Vector3::new((col - self.cx) / self.fx, (row - self.cy) / self.fy, 1.0)
    }

    pub fn in_image(&self, row: f64, col: f64) -> bool {
        row >= -0.5 && col >= -0.5 && row < self.height as f64 - 0.5 && col < self.width as f64 - 0.5
    }

    /// Table plane `n . p + d = 0` in the camera frame, normal toward the camera.
    pub fn table_plane(&self) -> (Vector3<f64>, f64) {
        let n = self.rotation().transpose() * Vector3::z();
        let d = -n.dot(&self.table_to_camera(&Point3::origin()));
        (n, d)
    }

    /// Metric size of one pixel at the distance where the optical axis meets the table.
    pub fn voxel(&self) -> f64 {
        (self.center() - Point3::origin()).norm() / self.fx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_hits_principal_point_and_origin() {
        let cam = CameraModel::default();
        let o = cam.table_to_camera(&Point3::origin());
        assert!(o.x.abs() < 1e-12 && o.y.abs() < 1e-12);
        assert!((o.z - 0.70 / 55f64.to_radians().sin()).abs() < 1e-12);
        let (r, c) = cam.project(&o).unwrap();
        assert!((r - cam.cy).abs() < 1e-9 && (c - cam.cx).abs() < 1e-9);
    }

    #[test]
    fn up_in_the_world_is_up_in_the_image() {
        let cam = CameraModel::default();
        let lo = cam.project(&cam.table_to_camera(&Point3::origin())).unwrap();
        let hi = cam.project(&cam.table_to_camera(&Point3::new(0.0, 0.0, 0.1))).unwrap();
        assert!(hi.0 < lo.0);
        let right = cam.project(&cam.table_to_camera(&Point3::new(0.05, 0.0, 0.0))).unwrap();
        assert!(right.1 > lo.1);
    }

    #[test]
    fn rotation_is_proper() {
        let r = CameraModel::default().rotation();
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn table_plane_contains_table_points() {
        let cam = CameraModel::default();
        let (n, d) = cam.table_plane();
        let p = cam.table_to_camera(&Point3::new(0.1, -0.05, 0.0));
        assert!((n.dot(&p) + d).abs() < 1e-12);
        assert!(d > 0.0);
    }
}
