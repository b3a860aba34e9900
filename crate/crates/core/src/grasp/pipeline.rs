use std::sync::Arc;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::record::{GraspRecord, PerEffector};
use crate::cnn::{forward_pass, ActivationTrace, Network};
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::segmentation::{segment, OrganizedPointCloud, SegmentationParams};

/// Network plus segmentation settings: turns an RGB-D observation into a
/// masked activation trace.
#[derive(Clone, Debug)]
pub struct Perception {
    pub net: Arc<Network>,
    pub segmentation: SegmentationParams,
}

/// A masked trace paired with the object's part of the cloud.
#[derive(Clone, Debug)]
pub struct Observation {
    pub trace: ActivationTrace,
    /// Support-plane inliers are missing, so features near a silhouette
    /// never pick up table depth.
    pub cloud: OrganizedPointCloud,
}

/// An observation with its demonstrated effector positions.
#[derive(Clone, Debug)]
pub struct Demonstration {
    pub id: String,
    pub observation: Observation,
    pub effectors: PerEffector<Vector3<f64>>,
}

impl Perception {
    pub fn new(net: Arc<Network>) -> Self {
        Self {
            net,
            segmentation: SegmentationParams::default(),
        }
    }

    /// Table segmentation, object mask, masked forward pass.
    pub fn observe(&self, image: &RgbImage, cloud: &OrganizedPointCloud) -> Result<Observation> {
        if image.height() != cloud.height() || image.width() != cloud.width() {
            return Err(Error::Shape(format!(
                "image {}x{} vs cloud {}x{}",
                image.height(),
                image.width(),
                cloud.height(),
                cloud.width()
            )));
        }
        let (plane, mask) = segment(cloud, &self.segmentation)?;
        let trace = forward_pass(&self.net, &image.to_tensor(), Some(&mask.mask))?;
        let plane = plane.oriented_toward_origin();
        let cut = self.segmentation.inlier_threshold;
        let object = OrganizedPointCloud::from_fn(cloud.height(), cloud.width(), |y, x| {
            cloud.get(y, x).filter(|p| plane.signed_distance(p) > cut)
        });
        Ok(Observation { trace, cloud: object })
    }

    pub fn demonstrate(&self, record: &GraspRecord) -> Result<Demonstration> {
        record.validate()?;
        Ok(Demonstration {
            id: record.id.clone(),
            observation: self.observe(&record.image, &record.cloud)?,
            effectors: record.effectors,
        })
    }

    /// Observes many records in parallel; output order follows input order.
    pub fn demonstrate_all(&self, records: &[&GraspRecord]) -> Result<Vec<Demonstration>> {
        records.par_iter().map(|r| self.demonstrate(r)).collect()
    }
}
