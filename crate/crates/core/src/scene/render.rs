use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::camera::CameraModel;
use super::objects::{annotate_grasp, SceneSpec};
use crate::error::{Error, Result};
use crate::grasp::PerEffector;
use crate::image::RgbImage;
use crate::mask::Mask;
use crate::segmentation::OrganizedPointCloud;

pub const TABLE_ALBEDO: [f64; 3] = [0.2, 0.2, 0.2];
const AMBIENT: f64 = 0.35;
const DIFFUSE: f64 = 0.65;

/// Direction toward the light, table frame (unit length).
pub fn light_direction() -> Vector3<f64> {
    Vector3::new(-0.7, -0.5, 1.0).normalize()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedScene {
    pub image: RgbImage,
    pub cloud: OrganizedPointCloud,
    /// Per object, the pixels where it is the nearest surface.
    pub silhouettes: Vec<Mask>,
    /// Target effector positions in the camera frame, when the spec has a target.
    pub annotation: Option<PerEffector<Vector3<f64>>>,
}

fn shade(albedo: [f64; 3], normal: &Vector3<f64>, lighting: f64) -> [u8; 3] {
    let k = (AMBIENT + DIFFUSE * normal.dot(&light_direction()).max(0.0)) * lighting;
    albedo.map(|a| ((a * k).clamp(0.0, 1.0) * 255.0).round() as u8)
}

/// Z-buffered rasterization of the scene over the table plane.
///
/// Depth at each covered pixel centre is the exact intersection of the pixel
/// ray with the triangle's plane, so cloud points lie on the mesh surface.
pub fn render(spec: &SceneSpec, cam: &CameraModel) -> Result<RenderedScene> {
    spec.validate()?;
    let (h, w) = (cam.height, cam.width);
    let rot_t = cam.rotation().transpose();

    for inst in &spec.objects {
        for v in inst.vertices() {
            let pc = cam.table_to_camera(&v);
            match cam.project(&pc) {
                Some((r, c)) if cam.in_image(r, c) => {}
                _ => {
                    return Err(Error::Scene(format!("instance {} is outside the camera frustum", inst.name)));
                }
            }
        }
    }

    let mut depth = vec![f64::INFINITY; h * w];
    let mut owner: Vec<Option<usize>> = vec![None; h * w];
    let mut colour = vec![[0u8; 3]; h * w];

    for (id, inst) in spec.objects.iter().enumerate() {
        for tri in inst.triangles() {
            let n_cam = rot_t * tri.normal;
            let vc = tri.v.map(|p| cam.table_to_camera(&p));
            // back faces never win against the front of a closed solid
            if n_cam.dot(&vc[0]) >= 0.0 {
                continue;
            }
            let px = vc.map(|p| cam.project(&p).expect("vertex in front of camera"));
            let rmin = px.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
            let rmax = px.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil().min(h as f64 - 1.0) as usize;
            let cmin = px.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
            let cmax = px.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil().min(w as f64 - 1.0) as usize;
            let edge = |a: (f64, f64), b: (f64, f64), r: f64, c: f64| (b.1 - a.1) * (r - a.0) - (b.0 - a.0) * (c - a.1);
            let area = edge(px[0], px[1], px[2].0, px[2].1);
            if area.abs() < 1e-12 {
                continue;
            }
            let plane_k = n_cam.dot(&vc[0]);
            for r in rmin..=rmax {
                for c in cmin..=cmax {
                    let (rf, cf) = (r as f64, c as f64);
                    let e0 = edge(px[1], px[2], rf, cf) / area;
                    let e1 = edge(px[2], px[0], rf, cf) / area;
                    let e2 = edge(px[0], px[1], rf, cf) / area;
                    if e0 < -1e-9 || e1 < -1e-9 || e2 < -1e-9 {
                        continue;
                    }
                    let ray = cam.ray(rf, cf);
                    let t = plane_k / n_cam.dot(&ray);
                    let i = r * w + c;
                    if t > 0.0 && t < depth[i] {
                        let sn = (tri.shading[0] * e0 + tri.shading[1] * e1 + tri.shading[2] * e2).normalize();
                        depth[i] = t;
                        owner[i] = Some(id);
                        colour[i] = shade(inst.color, &sn, spec.lighting);
                    }
                }
            }
        }
    }

    let (tn, td) = cam.table_plane();
    let table_rgb = shade(TABLE_ALBEDO, &Vector3::z(), spec.lighting);
    let mut image = RgbImage::new(h, w, table_rgb);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cloud = OrganizedPointCloud::empty(h, w);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let ray = cam.ray(r as f64, c as f64);
            let t = if owner[i].is_some() {
                image.set(r, c, colour[i]);
                depth[i]
            } else {
                -td / tn.dot(&ray)
            };
            // draw unconditionally so the stream does not depend on geometry
            let dropped = rng.random::<f64>() < spec.dropout;
            if t > 0.0 && t.is_finite() && !dropped {
                cloud.set(r, c, Some(ray * t));
            }
        }
    }

    let silhouettes = (0..spec.objects.len())
        .map(|id| Mask::from_fn(h, w, |r, c| owner[r * w + c] == Some(id)))
        .collect();
    let annotation = match spec.target {
        Some(t) => {
            let a = annotate_grasp(&spec.objects[t])?;
            Some(a.map(|_, p: &Point3<f64>| cam.table_to_camera(p)))
        }
        None => None,
    };
    Ok(RenderedScene {
        image,
        cloud,
        silhouettes,
        annotation,
    })
}
