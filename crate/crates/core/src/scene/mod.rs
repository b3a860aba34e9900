//! Synthetic tabletop RGB-D scenes with grasp annotations.

mod bank;
mod camera;
mod generate;
mod objects;
mod render;

pub use bank::{desk_network, desk_weights, DESK_INPUT};
pub use camera::CameraModel;
pub use objects::{
    annotate_grasp, ObjectInstance, SceneSpec, Shape, Triangle, CYLINDER_SEGMENTS, HAND_STANDOFF, LEFT_EDGE_OFFSET,
};
pub use render::{light_direction, render, RenderedScene, TABLE_ALBEDO};
pub use generate::{
    clutter_scene, dataset_instances, generate_dataset, sample_instance, single_object_scene, Dataset, DatasetConfig,
};
