use super::cloud::OrganizedPointCloud;
use super::ransac::{ransac_plane, PlaneModel};
use crate::error::Result;
use crate::mask::Mask;

pub const DEFAULT_INLIER_THRESHOLD: f64 = 0.005;
pub const DEFAULT_MIN_HEIGHT: f64 = 0.01;
pub const DEFAULT_DILATION_RADIUS: usize = 3;
pub const DEFAULT_RANSAC_ITERATIONS: usize = 300;

/// Binary object mask at image resolution with the parameters that made it.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectMask {
    /// Pixels classified as object before dilation.
    pub core: Mask,
    /// `core` dilated by `dilation_radius`; this is what the forward pass uses.
    pub mask: Mask,
    pub inlier_threshold: f64,
    pub min_height: f64,
    pub dilation_radius: usize,
}

/// Marks pixels whose point lies more than `min_height` above `plane`
/// (the camera side), then dilates with a disc. Points within
/// `inlier_threshold` of the plane never enter the core mask.
pub fn object_mask(
    cloud: &OrganizedPointCloud,
    plane: &PlaneModel,
    inlier_threshold: f64,
    min_height: f64,
    dilation_radius: usize,
) -> ObjectMask {
    let plane = plane.oriented_toward_origin();
    let cut = min_height.max(inlier_threshold);
    let core = Mask::from_fn(cloud.height(), cloud.width(), |y, x| {
        cloud.get(y, x).is_some_and(|p| plane.signed_distance(&p) > cut)
    });
    let mask = core.dilate(dilation_radius);
    ObjectMask {
        core,
        mask,
        inlier_threshold,
        min_height,
        dilation_radius,
    }
}

/// Segmentation parameters used by the grasp pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentationParams {
    pub iterations: usize,
    pub inlier_threshold: f64,
    pub min_height: f64,
    pub dilation_radius: usize,
    pub seed: u64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_RANSAC_ITERATIONS,
            inlier_threshold: DEFAULT_INLIER_THRESHOLD,
            min_height: DEFAULT_MIN_HEIGHT,
            dilation_radius: DEFAULT_DILATION_RADIUS,
            seed: 0,
        }
    }
}

/// RANSAC followed by [`object_mask`].
pub fn segment(cloud: &OrganizedPointCloud, params: &SegmentationParams) -> Result<(PlaneModel, ObjectMask)> {
    let plane = ransac_plane(cloud, params.iterations, params.inlier_threshold, params.seed)?;
    let mask = object_mask(cloud, &plane, params.inlier_threshold, params.min_height, params.dilation_radius);
    Ok((plane, mask))
}
