//! Table-plane segmentation of organized point clouds.

mod cloud;
mod object_mask;
mod ransac;

pub use cloud::OrganizedPointCloud;
pub use object_mask::{
    object_mask, segment, ObjectMask, SegmentationParams, DEFAULT_DILATION_RADIUS, DEFAULT_INLIER_THRESHOLD,
    DEFAULT_MIN_HEIGHT, DEFAULT_RANSAC_ITERATIONS,
};
pub use ransac::{fit_plane, ransac_plane, PlaneModel};
