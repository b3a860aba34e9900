//! Grasp point synthesis from hierarchical CNN features.
//!
//! Filters that fire consistently over a set of grasp demonstrations are
//! traced backwards one unit per layer, giving tuples of filters across
//! conv layers. Each tuple is localized in the RGB-D scene, and learned
//! offsets from those locations to the hand frame, thumb tip and index tip
//! turn a new observation into pre-shape grasp points.

pub mod cnn;
pub mod control;
pub mod error;
pub mod eval;
pub mod features;
pub mod grasp;
pub mod image;
pub mod mask;
pub mod scene;
pub mod segmentation;

pub use error::{Error, ErrorCategory, Result};
