use std::path::Path;

use crate::error::Result;
use crate::grasp::{EndEffector, GraspPrediction};
use crate::image::RgbImage;
use crate::scene::CameraModel;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlayStyle {
    /// Half-width of the hollow square drawn at each grasp point.
    pub marker_radius: isize,
    /// Half-width of the filled square drawn at each candidate (0 = one pixel).
    pub dot_radius: isize,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self {
            marker_radius: 4,
            dot_radius: 0,
        }
    }
}

pub fn effector_color(e: EndEffector) -> [u8; 3] {
    match e {
        EndEffector::HandFrame => [255, 0, 0],
        EndEffector::ThumbTip => [0, 255, 0],
        EndEffector::IndexTip => [0, 0, 255],
    }
}

fn pixel(cam: &CameraModel, p: &nalgebra::Vector3<f64>) -> Option<(isize, isize)> {
    cam.project(p).map(|(r, c)| (r.round() as isize, c.round() as isize))
}

/// Candidates as dots, then grasp points as hollow squares on top.
/// Points behind the camera are skipped; the rest are clipped to the image.
pub fn draw_overlay(image: &RgbImage, prediction: &GraspPrediction, cam: &CameraModel, style: OverlayStyle) -> RgbImage {
    let mut out = image.clone();
    for e in EndEffector::ALL {
        let color = effector_color(e);
        for c in &prediction.candidates[e] {
            if let Some((r, col)) = pixel(cam, &c.position) {
                let d = style.dot_radius;
                for dy in -d..=d {
                    for dx in -d..=d {
                        out.put(r + dy, col + dx, color);
                    }
                }
            }
        }
    }
    for e in EndEffector::ALL {
        let color = effector_color(e);
        if let Some((r, c)) = pixel(cam, &prediction.points[e]) {
            let m = style.marker_radius;
            for t in -m..=m {
                out.put(r - m, c + t, color);
                out.put(r + m, c + t, color);
                out.put(r + t, c - m, color);
                out.put(r + t, c + m, color);
            }
            out.put(r, c, color);
        }
    }
    out
}

pub fn emit_overlay(path: &Path, image: &RgbImage, prediction: &GraspPrediction, cam: &CameraModel) -> Result<()> {
    draw_overlay(image, prediction, cam, OverlayStyle::default()).save(path)
}
