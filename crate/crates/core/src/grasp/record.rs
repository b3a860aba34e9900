use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::segmentation::OrganizedPointCloud;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EndEffector {
    HandFrame,
    ThumbTip,
    IndexTip,
}

impl EndEffector {
    pub const ALL: [EndEffector; 3] = [EndEffector::HandFrame, EndEffector::ThumbTip, EndEffector::IndexTip];

    /// Conv tap whose features drive this effector.
    pub fn tap(self) -> &'static str {
        match self {
            EndEffector::HandFrame => "conv-4",
            EndEffector::ThumbTip | EndEffector::IndexTip => "conv-3",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EndEffector::HandFrame => "hand_frame",
            EndEffector::ThumbTip => "thumb_tip",
            EndEffector::IndexTip => "index_tip",
        }
    }
}

impl fmt::Display for EndEffector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EndEffector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EndEffector::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::parse("end effector", format!("unknown effector {s:?}")))
    }
}

/// One value per end effector.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PerEffector<T> {
    pub hand_frame: T,
    pub thumb_tip: T,
    pub index_tip: T,
}

impl<T> PerEffector<T> {
    pub fn from_fn(mut f: impl FnMut(EndEffector) -> T) -> Self {
        Self {
            hand_frame: f(EndEffector::HandFrame),
            thumb_tip: f(EndEffector::ThumbTip),
            index_tip: f(EndEffector::IndexTip),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(EndEffector, &T) -> U) -> PerEffector<U> {
        PerEffector::from_fn(|e| f(e, &self[e]))
    }

    pub fn try_from_fn<E>(mut f: impl FnMut(EndEffector) -> std::result::Result<T, E>) -> std::result::Result<Self, E> {
        Ok(Self {
            hand_frame: f(EndEffector::HandFrame)?,
            thumb_tip: f(EndEffector::ThumbTip)?,
            index_tip: f(EndEffector::IndexTip)?,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (EndEffector, &T)> {
        EndEffector::ALL.into_iter().map(move |e| (e, &self[e]))
    }
}

impl<T> Index<EndEffector> for PerEffector<T> {
    type Output = T;

    fn index(&self, e: EndEffector) -> &T {
        match e {
            EndEffector::HandFrame => &self.hand_frame,
            EndEffector::ThumbTip => &self.thumb_tip,
            EndEffector::IndexTip => &self.index_tip,
        }
    }
}

impl<T> IndexMut<EndEffector> for PerEffector<T> {
    fn index_mut(&mut self, e: EndEffector) -> &mut T {
        match e {
            EndEffector::HandFrame => &mut self.hand_frame,
            EndEffector::ThumbTip => &mut self.thumb_tip,
            EndEffector::IndexTip => &mut self.index_tip,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectType {
    Cuboid,
    Cylinder,
}

impl ObjectType {
    pub const ALL: [ObjectType; 2] = [ObjectType::Cuboid, ObjectType::Cylinder];

    pub fn name(self) -> &'static str {
        match self {
            ObjectType::Cuboid => "cuboid",
            ObjectType::Cylinder => "cylinder",
        }
    }
}

impl fmt::Display for ObjectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cuboid" => Ok(ObjectType::Cuboid),
            "cylinder" => Ok(ObjectType::Cylinder),
            _ => Err(Error::parse("object type", format!("unknown object type {s:?}"))),
        }
    }
}

/// One demonstration: observation plus the three effector positions in the
/// camera frame.
#[derive(Clone, Debug, PartialEq)]
pub struct GraspRecord {
    pub id: String,
    pub image: RgbImage,
    pub cloud: OrganizedPointCloud,
    pub effectors: PerEffector<Vector3<f64>>,
    pub object_type: ObjectType,
    /// Object instance the grasp is demonstrated on.
    pub instance: String,
    pub clutter: bool,
}

impl GraspRecord {
    pub fn validate(&self) -> Result<()> {
        if self.image.height() != self.cloud.height() || self.image.width() != self.cloud.width() {
            return Err(Error::Shape(format!(
                "record {}: image {}x{} vs cloud {}x{}",
                self.id,
                self.image.height(),
                self.image.width(),
                self.cloud.height(),
                self.cloud.width()
            )));
        }
        for (e, p) in self.effectors.iter() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::parse(format!("record {}", self.id), format!("{e} position is not finite")));
            }
        }
        Ok(())
    }
}
