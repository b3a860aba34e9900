use nalgebra::Vector3;

use super::ids::{FilterId, HierFeature};
use crate::cnn::{backward_patch, ActivationTrace};
use crate::error::Result;
use crate::segmentation::OrganizedPointCloud;

/// Entries at or below this value are left out of log scores.
pub const LOG_EPSILON: f64 = 1e-6;
/// Pixels under this fraction of the peak gradient magnitude do not enter the centroid.
pub const CENTROID_CUTOFF: f64 = 0.1;
/// Search radius (pixels) for a valid cloud point when the centroid pixel has none.
pub const DEPTH_SEARCH_RADIUS: usize = 5;

/// `sum ln v` over entries `v > LOG_EPSILON`; negative infinity when there are none.
pub fn log_score(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut any = false;
    let mut s = 0.0;
    for v in values {
        if v > LOG_EPSILON {
            any = true;
            s += v.ln();
        }
    }
    if any {
        s
    } else {
        f64::NEG_INFINITY
    }
}

/// Sum of two log scores where negative infinity stands for "no entries".
pub fn merge_scores(a: f64, b: f64) -> f64 {
    match (a == f64::NEG_INFINITY, b == f64::NEG_INFINITY) {
        (true, _) => b,
        (_, true) => a,
        _ => a + b,
    }
}

/// One selected unit on a descent path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathUnit {
    pub layer: usize,
    pub filter: usize,
    pub row: usize,
    pub col: usize,
    /// Activation for the top unit, gradient for the units below it.
    pub value: f64,
}

/// How the lowest unit of a feature is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Localization {
    /// Follow the tuple down from the parent's strongest unit, one unit per layer.
    SinglePath,
    /// Take the lowest filter's strongest activation anywhere in the map.
    GlobalArgmax,
}

/// A feature located in one observation.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureObservation {
    pub feature: HierFeature,
    pub response: f64,
    /// Sub-pixel `(row, col)`; `None` when the response is zero.
    pub centroid: Option<(f64, f64)>,
    pub position: Option<Vector3<f64>>,
    pub valid_depth: bool,
}

impl FeatureObservation {
    fn missing(feature: &HierFeature) -> Self {
        Self {
            feature: feature.clone(),
            response: 0.0,
            centroid: None,
            position: None,
            valid_depth: false,
        }
    }

    /// Usable as a grasp candidate or offset sample.
    pub fn is_usable(&self) -> bool {
        self.response > 0.0 && self.valid_depth
    }
}

fn strongest_activation(trace: &ActivationTrace, f: &FilterId) -> Result<Option<PathUnit>> {
    let layer = trace.network().tap_layer(&f.tap)?;
    let (row, col, value) = trace.layer(layer).output.argmax_in_channel(f.filter);
    Ok((value > 0.0).then_some(PathUnit {
        layer,
        filter: f.filter,
        row,
        col,
        value,
    }))
}

/// Strongest unit of `child` in the gradient of `from`.
fn strongest_child(trace: &ActivationTrace, from: &PathUnit, child: &FilterId) -> Result<Option<PathUnit>> {
    let layer = trace.network().tap_layer(&child.tap)?;
    let patch = backward_patch(trace, from.layer, from.filter, from.row, from.col, Some(layer))?;
    Ok(match patch.argmax_in_channel(child.filter) {
        Some((row, col, value)) if value > 0.0 => Some(PathUnit {
            layer,
            filter: child.filter,
            row,
            col,
            value,
        }),
        _ => None,
    })
}

/// The single-path descent: strongest parent unit, then at each lower
/// layer the strongest unit of the next filter in the gradient of the unit
/// above. `None` if any step has no positive value.
pub fn descend(trace: &ActivationTrace, feature: &HierFeature) -> Result<Option<Vec<PathUnit>>> {
    let Some(mut unit) = strongest_activation(trace, feature.parent())? else {
        return Ok(None);
    };
    let mut path = vec![unit.clone()];
    for f in &feature.filters()[1..] {
        match strongest_child(trace, &unit, f)? {
            Some(u) => unit = u,
            None => return Ok(None),
        }
        path.push(unit.clone());
    }
    Ok(Some(path))
}

/// Log score of every filter of `child_tap` in the gradient of the
/// parent's lowest unit. `None` when the parent is silent in this trace.
pub fn child_scores(trace: &ActivationTrace, parent: &HierFeature, child_tap: &str) -> Result<Option<Vec<f64>>> {
    let Some(path) = descend(trace, parent)? else {
        return Ok(None);
    };
    let from = path.last().expect("non-empty path");
    let layer = trace.network().tap_layer(child_tap)?;
    if layer >= from.layer {
        return Err(crate::Error::Feature(format!("{child_tap} is not below {}", parent.lowest())));
    }
    let patch = backward_patch(trace, from.layer, from.filter, from.row, from.col, Some(layer))?;
    Ok(Some((0..patch.channels).map(|c| log_score(patch.channel_window(c).iter().copied())).collect()))
}

/// Weighted centroid of `|gradient|` over pixels at or above the cutoff.
pub fn gradient_centroid(trace: &ActivationTrace, unit: &PathUnit) -> Result<Option<(f64, f64)>> {
    let patch = backward_patch(trace, unit.layer, unit.filter, unit.row, unit.col, None)?;
    let mag = patch.magnitude_window();
    let peak = mag.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(None);
    }
    let (mut sw, mut sr, mut sc) = (0.0, 0.0, 0.0);
    for (i, &m) in mag.iter().enumerate() {
        if m >= CENTROID_CUTOFF * peak {
            sw += m;
            sr += m * (patch.row0 + i / patch.cols) as f64;
            sc += m * (patch.col0 + i % patch.cols) as f64;
        }
    }
    Ok(Some((sr / sw, sc / sw)))
}

/// Cloud point at the rounded centroid, or the nearest valid one within
/// `DEPTH_SEARCH_RADIUS` pixels.
pub fn lookup_point(cloud: &OrganizedPointCloud, centroid: (f64, f64)) -> Option<Vector3<f64>> {
    let r = (centroid.0.round().max(0.0) as usize).min(cloud.height() - 1);
    let c = (centroid.1.round().max(0.0) as usize).min(cloud.width() - 1);
    cloud.nearest_valid(r, c, DEPTH_SEARCH_RADIUS).map(|(_, p)| p)
}

/// Locates `feature` in one observation.
///
/// The lowest unit comes from the single-path descent or, for
/// `GlobalArgmax`, from the lowest filter's own activation map. The response
/// is that unit's value: its gradient for a descended tuple, its activation
/// otherwise.
pub fn localize_feature(
    trace: &ActivationTrace,
    feature: &HierFeature,
    cloud: &OrganizedPointCloud,
    mode: Localization,
) -> Result<FeatureObservation> {
    let unit = match mode {
        Localization::SinglePath => descend(trace, feature)?.and_then(|mut p| p.pop()),
        Localization::GlobalArgmax => strongest_activation(trace, feature.lowest())?,
    };
    let Some(unit) = unit else {
        return Ok(FeatureObservation::missing(feature));
    };
    let Some(centroid) = gradient_centroid(trace, &unit)? else {
        return Ok(FeatureObservation::missing(feature));
    };
    let position = lookup_point(cloud, centroid);
    Ok(FeatureObservation {
        feature: feature.clone(),
        response: unit.value,
        centroid: Some(centroid),
        valid_depth: position.is_some(),
        position,
    })
}
