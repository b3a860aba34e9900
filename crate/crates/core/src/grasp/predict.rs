use std::collections::BTreeMap;

use nalgebra::Vector3;

use super::model::{CandidateMode, GraspModel, Strategy};
use super::pipeline::{Observation, Perception};
use super::record::{EndEffector, PerEffector};
use crate::error::{Error, Result};
use crate::features::{localize_feature, FeatureObservation, HierFeature};
use crate::image::RgbImage;
use crate::segmentation::OrganizedPointCloud;

/// A possible effector position and its weight (the feature response).
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub position: Vector3<f64>,
    pub weight: f64,
    pub feature: HierFeature,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraspPrediction {
    pub points: PerEffector<Vector3<f64>>,
    pub candidates: PerEffector<Vec<Candidate>>,
    /// Model features that produced candidates / that did not.
    pub found: usize,
    pub missing: usize,
}

/// `sum w p / sum w`, or `None` without positive weight.
pub fn weighted_mean(c: &[Candidate]) -> Option<Vector3<f64>> {
    let total: f64 = c.iter().map(|x| x.weight.max(0.0)).sum();
    (total > 0.0).then(|| c.iter().fold(Vector3::zeros(), |a, x| a + x.position * x.weight.max(0.0)) / total)
}

/// Predicts from an already masked observation.
pub fn predict_from_observation(model: &GraspModel, obs: &Observation) -> Result<GraspPrediction> {
    let mode = model.strategy.localization();
    let mut seen: BTreeMap<HierFeature, FeatureObservation> = BTreeMap::new();
    for (_, feats) in model.effectors.iter() {
        for s in feats {
            if !seen.contains_key(&s.feature) {
                let o = localize_feature(&obs.trace, &s.feature, &obs.cloud, mode)?;
                seen.insert(s.feature.clone(), o);
            }
        }
    }
    // conv5-max answers with its single strongest filter
    let only: Option<HierFeature> = (model.strategy == Strategy::Conv5Max)
        .then(|| {
            seen.values()
                .filter(|o| o.is_usable())
                .max_by(|a, b| a.response.total_cmp(&b.response))
                .map(|o| o.feature.clone())
        })
        .flatten();

    let (mut found, mut missing) = (0, 0);
    let mut candidates = PerEffector::<Vec<Candidate>>::default();
    for e in EndEffector::ALL {
        for s in &model.effectors[e] {
            let o = &seen[&s.feature];
            if !o.is_usable() || only.as_ref().is_some_and(|f| f != &s.feature) {
                missing += 1;
                continue;
            }
            found += 1;
            let p = o.position.expect("usable");
            match model.params.candidates {
                CandidateMode::PerExample => candidates[e].extend(s.offsets.iter().map(|off| Candidate {
                    position: p + off,
                    weight: o.response,
                    feature: s.feature.clone(),
                })),
                CandidateMode::MeanOffset => candidates[e].push(Candidate {
                    position: p + s.mean_offset,
                    weight: o.response,
                    feature: s.feature.clone(),
                }),
            }
        }
    }
    let points = PerEffector::try_from_fn(|e| {
        weighted_mean(&candidates[e]).ok_or_else(|| Error::Prediction { effector: e.name().to_string() })
    })?;
    Ok(GraspPrediction {
        points,
        candidates,
        found,
        missing,
    })
}

/// Segments the scene, runs the masked forward pass, and predicts the three grasp points.
pub fn predict_grasp(model: &GraspModel, perception: &Perception, image: &RgbImage, cloud: &OrganizedPointCloud) -> Result<GraspPrediction> {
    let obs = perception.observe(image, cloud)?;
    predict_from_observation(model, &obs)
}
