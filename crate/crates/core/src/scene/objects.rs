use nalgebra::{Point3, Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::grasp::{EndEffector, ObjectType, PerEffector};

/// Distance of the finger contacts from the left edge of a cuboid face.
pub const LEFT_EDGE_OFFSET: f64 = 0.03;
/// Distance of the hand frame from the finger midpoint, toward the camera.
pub const HAND_STANDOFF: f64 = 0.06;
pub const CYLINDER_SEGMENTS: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    /// `width` runs along the local x axis, `depth` along local y.
    Cuboid { width: f64, depth: f64, height: f64 },
    Cylinder { radius: f64, height: f64 },
}

impl Shape {
    pub fn object_type(&self) -> ObjectType {
        match self {
            Shape::Cuboid { .. } => ObjectType::Cuboid,
            Shape::Cylinder { .. } => ObjectType::Cylinder,
        }
    }

    pub fn height(&self) -> f64 {
        match *self {
            Shape::Cuboid { height, .. } | Shape::Cylinder { height, .. } => height,
        }
    }

    /// Radius of the footprint's bounding circle.
    pub fn footprint_radius(&self) -> f64 {
        match *self {
            Shape::Cuboid { width, depth, .. } => 0.5 * width.hypot(depth),
            Shape::Cylinder { radius, .. } => radius,
        }
    }
}

/// An object resting on the table at planar pose `(x, y, yaw)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectInstance {
    pub name: String,
    pub shape: Shape,
    pub x: f64,
    pub y: f64,
    /// Rotation about the table normal, radians.
    pub yaw: f64,
    /// Linear RGB albedo in `[0, 1]`.
    pub color: [f64; 3],
}

/// Triangle in the table frame with its outward unit face normal and the
/// per-vertex normals used for shading (equal to `normal` on flat faces).
#[derive(Clone, Copy, Debug)]
pub struct Triangle {
    pub v: [Point3<f64>; 3],
    pub normal: Vector3<f64>,
    pub shading: [Vector3<f64>; 3],
}

impl ObjectInstance {
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw)
    }

    /// Local object coordinates (origin at the footprint centre) to table frame.
    pub fn to_table(&self, local: &Vector3<f64>) -> Point3<f64> {
        Point3::new(self.x, self.y, 0.0) + self.rotation() * local
    }

    pub fn to_local(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation().inverse() * (p - Point3::new(self.x, self.y, 0.0))
    }

    /// Every mesh vertex in the table frame, bottom included.
    pub fn vertices(&self) -> Vec<Point3<f64>> {
        match self.shape {
            Shape::Cuboid { width, depth, height } => {
                let mut v = Vec::with_capacity(8);
                for z in [0.0, height] {
                    for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                        v.push(self.to_table(&Vector3::new(sx * width / 2.0, sy * depth / 2.0, z)));
                    }
                }
                v
            }
            Shape::Cylinder { radius, height } => {
                let mut v = Vec::with_capacity(2 * CYLINDER_SEGMENTS);
                for z in [0.0, height] {
                    for k in 0..CYLINDER_SEGMENTS {
                        let a = std::f64::consts::TAU * k as f64 / CYLINDER_SEGMENTS as f64;
                        v.push(self.to_table(&Vector3::new(radius * a.cos(), radius * a.sin(), z)));
                    }
                }
                v
            }
        }
    }

    /// Visible-side triangle mesh; the bottom face rests on the table and is omitted.
    pub fn triangles(&self) -> Vec<Triangle> {
        let v = self.vertices();
        let mut tris = Vec::new();
        let curved = matches!(self.shape, Shape::Cylinder { .. });
        // the lateral surface of a cylinder is shaded with its true radial normal
        let radial = |p: &Point3<f64>| {
            let l = self.to_local(p);
            self.rotation() * Vector3::new(l.x, l.y, 0.0).normalize()
        };
        let mut quad = |a: Point3<f64>, b: Point3<f64>, c: Point3<f64>, d: Point3<f64>, smooth: bool| {
            let n = (b - a).cross(&(c - a)).normalize();
            let s = |p: &Point3<f64>| if smooth { radial(p) } else { n };
            tris.push(Triangle { v: [a, b, c], normal: n, shading: [s(&a), s(&b), s(&c)] });
            tris.push(Triangle { v: [a, c, d], normal: n, shading: [s(&a), s(&c), s(&d)] });
        };
        let n = v.len() / 2;
        for k in 0..n {
            let (a, b) = (k, (k + 1) % n);
            // counter-clockwise seen from outside
            quad(v[a], v[b], v[n + b], v[n + a], curved);
        }
        match self.shape {
            Shape::Cuboid { .. } => quad(v[4], v[5], v[6], v[7], false),
            Shape::Cylinder { height, .. } => {
                let top = self.to_table(&Vector3::new(0.0, 0.0, height));
                for k in 0..n {
                    tris.push(Triangle {
                        v: [top, v[n + k], v[n + (k + 1) % n]],
                        normal: Vector3::z(),
                        shading: [Vector3::z(); 3],
                    });
                }
            }
        }
        tris
    }

    /// Signed distance to the ideal solid (negative inside), local frame.
    pub fn surface_distance(&self, p: &Point3<f64>) -> f64 {
        let q = self.to_local(p);
        match self.shape {
            Shape::Cuboid { width, depth, height } => {
                let d = Vector3::new(q.x.abs() - width / 2.0, q.y.abs() - depth / 2.0, (q.z - height / 2.0).abs() - height / 2.0);
                let outside = Vector3::new(d.x.max(0.0), d.y.max(0.0), d.z.max(0.0)).norm();
                outside + d.x.max(d.y).max(d.z).min(0.0)
            }
            Shape::Cylinder { radius, height } => {
                let dr = q.x.hypot(q.y) - radius;
                let dz = (q.z - height / 2.0).abs() - height / 2.0;
                dr.max(0.0).hypot(dz.max(0.0)) + dr.max(dz).min(0.0)
            }
        }
    }
}

/// Ground-truth effector positions (table frame) for a demonstrated grasp.
///
/// Cuboid: thumb on the camera-facing face and index on the opposite face,
/// both `LEFT_EDGE_OFFSET` in from the left edge at half height. Cylinder:
/// thumb at the point nearest the camera and index diametrically behind it,
/// at half height. In both cases the hand frame sits `HAND_STANDOFF` from the
/// finger midpoint, toward the camera.
pub fn annotate_grasp(inst: &ObjectInstance) -> Result<PerEffector<Point3<f64>>> {
    let (thumb, index) = match inst.shape {
        Shape::Cuboid { width, depth, height } => {
            if width <= LEFT_EDGE_OFFSET || depth <= 0.0 || height <= 0.0 {
                return Err(Error::Scene(format!(
                    "instance {}: face width {width} m too small for a {LEFT_EDGE_OFFSET} m edge offset",
                    inst.name
                )));
            }
            let x = -width / 2.0 + LEFT_EDGE_OFFSET;
            (
                inst.to_table(&Vector3::new(x, -depth / 2.0, height / 2.0)),
                inst.to_table(&Vector3::new(x, depth / 2.0, height / 2.0)),
            )
        }
        Shape::Cylinder { radius, height } => {
            if radius <= 0.0 || height <= 0.0 {
                return Err(Error::Scene(format!("instance {}: degenerate cylinder", inst.name)));
            }
            let c = Point3::new(inst.x, inst.y, height / 2.0);
            (c - Vector3::y() * radius, c + Vector3::y() * radius)
        }
    };
    let toward_camera = match inst.shape {
        Shape::Cuboid { .. } => inst.rotation() * -Vector3::y(),
        Shape::Cylinder { .. } => -Vector3::y(),
    };
    let hand = Point3::from((thumb.coords + index.coords) / 2.0) + toward_camera * HAND_STANDOFF;
    Ok(PerEffector::from_fn(|e| match e {
        EndEffector::HandFrame => hand,
        EndEffector::ThumbTip => thumb,
        EndEffector::IndexTip => index,
    }))
}

/// Objects in a scene; `target` names the instance the annotation refers to.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub objects: Vec<ObjectInstance>,
    pub target: Option<usize>,
    /// Scalar on the light intensity.
    pub lighting: f64,
    pub seed: u64,
    /// Fraction of pixels whose depth is dropped.
    pub dropout: f64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dropout) || self.lighting.is_nan() || self.lighting <= 0.0 {
            return Err(Error::Scene("dropout must lie in [0, 1] and lighting must be positive".into()));
        }
        if let Some(t) = self.target {
            if t >= self.objects.len() {
                return Err(Error::Scene(format!("target index {t} out of range")));
            }
        }
        for (i, a) in self.objects.iter().enumerate() {
            let dims_ok = match a.shape {
                Shape::Cuboid { width, depth, height } => width > 0.0 && depth > 0.0 && height > 0.0,
                Shape::Cylinder { radius, height } => radius > 0.0 && height > 0.0,
            };
            if !dims_ok {
                return Err(Error::Scene(format!("instance {}: non-positive dimension", a.name)));
            }
            for b in &self.objects[i + 1..] {
                let gap = (a.x - b.x).hypot(a.y - b.y);
                if gap < a.shape.footprint_radius() + b.shape.footprint_radius() {
                    return Err(Error::Scene(format!("instances {} and {} interpenetrate", a.name, b.name)));
                }
            }
        }
        Ok(())
    }
}
