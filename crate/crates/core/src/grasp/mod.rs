//! Grasp demonstrations, offset learning and prediction.

mod dataset;
mod learn;
mod model;
mod pipeline;
mod predict;
mod record;

pub use dataset::{read_dataset, write_dataset, MANIFEST};
pub use learn::{compare_strategies, learn_model, observe_features, tuple_depth};
pub use model::{offset_stats, CandidateMode, GraspModel, ModelParams, SelectedFeature, Strategy};
pub use pipeline::{Demonstration, Observation, Perception};
pub use predict::{predict_from_observation, predict_grasp, weighted_mean, Candidate, GraspPrediction};
pub use record::{EndEffector, GraspRecord, ObjectType, PerEffector};
