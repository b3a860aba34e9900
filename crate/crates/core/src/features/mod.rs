//! Hierarchical CNN features: consistent-filter ranking, single-path
//! expansion into filter tuples, and localization in the scene.

mod ids;
mod localize;
mod tree;

pub use ids::{FilterId, HierFeature, CONV3, CONV4, CONV5};
pub use localize::{
    child_scores, descend, gradient_centroid, localize_feature, log_score, lookup_point, merge_scores,
    FeatureObservation, Localization, PathUnit, CENTROID_CUTOFF, DEPTH_SEARCH_RADIUS, LOG_EPSILON,
};
pub use tree::{build_feature_tree, expand_feature, rank_conv5_filters, rank_filters, FeatureTree, TreeNode};
