//! Rendered fixtures and structural checks shared by the pipeline tests.

use std::collections::BTreeSet;

use hiergrasp::features::{build_feature_tree, FeatureTree, HierFeature};
use hiergrasp::grasp::{
    observe_features, tuple_depth, Demonstration, EndEffector, GraspModel, GraspRecord, ModelParams, ObjectType,
    Perception, SelectedFeature, Strategy,
};
use hiergrasp::features::Localization;
use hiergrasp::scene::{desk_network, render, CameraModel, ObjectInstance, SceneSpec};

pub fn perception() -> Perception {
    Perception::new(desk_network().unwrap())
}

/// Renders `inst` alone with fixed lighting and no dropout.
pub fn record_of(inst: &ObjectInstance, id: &str, cam: &CameraModel) -> GraspRecord {
    let spec = SceneSpec {
        objects: vec![inst.clone()],
        target: Some(0),
        lighting: 1.0,
        seed: 1,
        dropout: 0.0,
    };
    let s = render(&spec, cam).unwrap();
    GraspRecord {
        id: id.to_string(),
        image: s.image,
        cloud: s.cloud,
        effectors: s.annotation.unwrap(),
        object_type: inst.shape.object_type(),
        instance: inst.name.clone(),
        clutter: false,
    }
}

pub fn tree_of(demos: &[Demonstration], p: &ModelParams) -> FeatureTree {
    let traces: Vec<_> = demos.iter().map(|d| d.observation.trace.clone()).collect();
    build_feature_tree(&traces, p.n5, p.n4, p.n3).unwrap()
}

/// Population trace of the offset covariance, computed from scratch.
fn trace_cov(offsets: &[nalgebra::Vector3<f64>]) -> f64 {
    let n = offsets.len() as f64;
    let mean = offsets.iter().sum::<nalgebra::Vector3<f64>>() / n;
    let mut cov = nalgebra::Matrix3::zeros();
    for o in offsets {
        let d = o - mean;
        cov += d * d.transpose();
    }
    (cov / n).trace()
}

/// Checks a hier-feat model against the tree and demonstrations it was
/// learned from. Returns a description of the first violation.
pub fn check_hier_model(model: &GraspModel, demos: &[Demonstration], tree: &FeatureTree) -> Result<(), String> {
    if model.strategy != Strategy::HierFeat {
        return Err("not a hier-feat model".into());
    }
    let parent = model.parent.as_ref().ok_or("no parent")?;
    for (e, feats) in model.effectors.iter() {
        if feats.is_empty() || feats.len() > model.params.n {
            return Err(format!("{e}: {} features with N = {}", feats.len(), model.params.n));
        }
        for f in feats {
            if f.feature.parent() != parent {
                return Err(format!("{e}: {} is not under {parent}", f.feature));
            }
            if f.feature.len() != tuple_depth(e) {
                return Err(format!("{e}: {} has the wrong depth", f.feature));
            }
        }
    }

    // every tree feature, so that dropped records are identified as the learner does
    let mut all: Vec<HierFeature> = tree.features(2);
    all.extend(tree.features(3));
    let obs = observe_features(demos, &all, Localization::SinglePath).unwrap();
    let keep: Vec<bool> = (0..demos.len()).map(|d| obs.iter().any(|row| row[d].is_usable())).collect();
    let kept = keep.iter().filter(|&&k| k).count();
    let need = ((model.params.min_coverage * kept as f64).ceil() as usize).max(kept.min(2)).max(1);

    for e in EndEffector::ALL {
        let selected: &Vec<SelectedFeature> = &model.effectors[e];
        let chosen: BTreeSet<&HierFeature> = selected.iter().map(|s| &s.feature).collect();
        let worst = selected.iter().map(|s| s.variance).fold(f64::NEG_INFINITY, f64::max);
        for s in selected {
            let v = trace_cov(&s.offsets);
            if (v - s.variance).abs() > 1e-12 + 1e-9 * v {
                return Err(format!("{e}: stored variance {} vs {v}", s.variance));
            }
        }
        for (f, row) in all.iter().zip(&obs) {
            if f.parent() != parent || f.len() != tuple_depth(e) || chosen.contains(f) {
                continue;
            }
            let offsets: Vec<_> = row
                .iter()
                .zip(demos)
                .zip(&keep)
                .filter(|((o, _), k)| **k && o.is_usable())
                .map(|((o, d), _)| d.effectors[e] - o.position.unwrap())
                .collect();
            if offsets.len() < need {
                continue;
            }
            let v = trace_cov(&offsets);
            if selected.len() < model.params.n {
                return Err(format!("{e}: eligible {f} left out with only {} selected", selected.len()));
            }
            if v < worst - 1e-15 {
                return Err(format!("{e}: unselected {f} has variance {v} below selected {worst}"));
            }
        }
    }
    Ok(())
}

pub fn of_type(records: &[GraspRecord], ty: ObjectType) -> Vec<&GraspRecord> {
    records.iter().filter(|r| r.object_type == ty && !r.clutter).collect()
}
