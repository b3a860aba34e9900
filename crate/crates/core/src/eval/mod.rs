//! Cross-validation, cluttered-scene evaluation and report output.

mod overlay;
mod preshape;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::build_feature_tree;
use crate::grasp::{
    learn_model, predict_from_observation, Demonstration, EndEffector, GraspModel, GraspRecord, ModelParams,
    ObjectType, PerEffector, Perception, Strategy,
};

pub use overlay::{draw_overlay, effector_color, emit_overlay, OverlayStyle};
pub use preshape::{
    preshape_from_prediction, preshape_trials, start_state, trials_to_csv, PreshapeTrial, PRESHAPE_TOLERANCE_M,
};

/// Thumb and index must land closer than this for a cluttered success.
pub const FINGER_SUCCESS_M: f64 = 0.05;
pub const HAND_SUCCESS_M: f64 = 0.10;

pub fn errors(prediction: &PerEffector<Vector3<f64>>, truth: &PerEffector<Vector3<f64>>) -> PerEffector<f64> {
    PerEffector::from_fn(|e| (prediction[e] - truth[e]).norm())
}

pub fn clutter_success(err: &PerEffector<f64>) -> bool {
    err.thumb_tip < FINGER_SUCCESS_M && err.index_tip < FINGER_SUCCESS_M && err.hand_frame < HAND_SUCCESS_M
}

/// Mean errors over the held-out records of one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceErrors {
    pub instance: String,
    pub object_type: ObjectType,
    pub mean: PerEffector<f64>,
    /// Records predicted successfully / records where prediction failed.
    pub predicted: usize,
    pub misses: usize,
}

/// Training record ids of one cross-validation fold.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldManifest {
    pub held_out: String,
    pub object_type: ObjectType,
    pub training: Vec<String>,
    pub training_instances: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTable {
    pub strategy: Strategy,
    pub rows: Vec<InstanceErrors>,
    pub folds: Vec<FoldManifest>,
}

impl ErrorTable {
    /// Mean of the instance cells of one type (instances with no prediction skipped).
    pub fn type_average(&self, ty: ObjectType) -> Option<PerEffector<f64>> {
        let rows: Vec<&InstanceErrors> = self.rows.iter().filter(|r| r.object_type == ty && r.predicted > 0).collect();
        (!rows.is_empty()).then(|| PerEffector::from_fn(|e| rows.iter().map(|r| r.mean[e]).sum::<f64>() / rows.len() as f64))
    }

    /// Mean of all instance cells.
    pub fn overall_average(&self) -> Option<PerEffector<f64>> {
        let rows: Vec<&InstanceErrors> = self.rows.iter().filter(|r| r.predicted > 0).collect();
        (!rows.is_empty()).then(|| PerEffector::from_fn(|e| rows.iter().map(|r| r.mean[e]).sum::<f64>() / rows.len() as f64))
    }

    pub fn total_misses(&self) -> usize {
        self.rows.iter().map(|r| r.misses).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("strategy,instance,object_type,hand_frame_m,thumb_tip_m,index_tip_m,predicted,misses\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6},{:.6},{},{}",
                self.strategy, r.instance, r.object_type, r.mean.hand_frame, r.mean.thumb_tip, r.mean.index_tip, r.predicted, r.misses
            );
        }
        s
    }

    /// Per-type averages laid out as object type by effector.
    pub fn to_text_table(&self) -> String {
        let mut s = format!("average grasp position error (m), strategy {}\n", self.strategy);
        let _ = writeln!(s, "{:<10} {:>11} {:>11} {:>11}", "", "hand frame", "thumb tip", "index tip");
        for ty in ObjectType::ALL {
            if let Some(a) = self.type_average(ty) {
                let _ = writeln!(s, "{:<10} {:>11.4} {:>11.4} {:>11.4}", ty.name(), a.hand_frame, a.thumb_tip, a.index_tip);
            }
        }
        let misses = self.total_misses();
        if misses > 0 {
            let _ = writeln!(s, "prediction failures: {misses}");
        }
        s
    }
}

/// Builds the feature tree from `demos` and learns a model of `strategy`.
pub fn train(ty: ObjectType, demos: &[Demonstration], params: &ModelParams, strategy: Strategy) -> Result<GraspModel> {
    let traces: Vec<_> = demos.iter().map(|d| d.observation.trace.clone()).collect();
    let tree = build_feature_tree(&traces, params.n5, params.n4, params.n3)?;
    learn_model(ty, demos, &tree, params, strategy)
}

/// Leave-one-instance-out evaluation. Each fold trains on the other
/// instances of the held-out instance's type and predicts its records.
pub fn cross_validate(records: &[GraspRecord], perception: &Perception, params: &ModelParams, strategy: Strategy) -> Result<ErrorTable> {
    let mut rows = Vec::new();
    let mut folds = Vec::new();
    for ty in ObjectType::ALL {
        let of_type: Vec<&GraspRecord> = records.iter().filter(|r| r.object_type == ty && !r.clutter).collect();
        if of_type.is_empty() {
            continue;
        }
        let instances: BTreeSet<&str> = of_type.iter().map(|r| r.instance.as_str()).collect();
        if instances.len() < 2 {
            return Err(Error::Config(format!("cross-validation needs at least 2 {ty} instances, found {}", instances.len())));
        }
        // one masked trace per record, shared by every fold of this type
        let demos = perception.demonstrate_all(&of_type)?;
        for held in instances {
            let (test, train_set): (Vec<_>, Vec<_>) = of_type.iter().zip(&demos).partition(|(r, _)| r.instance == held);
            let training: Vec<Demonstration> = train_set.iter().map(|(_, d)| (*d).clone()).collect();
            folds.push(FoldManifest {
                held_out: held.to_string(),
                object_type: ty,
                training: train_set.iter().map(|(r, _)| r.id.clone()).collect(),
                training_instances: train_set.iter().map(|(r, _)| r.instance.clone()).collect(),
            });
            let model = train(ty, &training, params, strategy)?;
            let results: Vec<Option<PerEffector<f64>>> = test
                .par_iter()
                .map(|(r, d)| match predict_from_observation(&model, &d.observation) {
                    Ok(p) => Some(errors(&p.points, &r.effectors)),
                    Err(e) => {
                        log::warn!("{}: {e}", r.id);
                        None
                    }
                })
                .collect();
            let ok: Vec<&PerEffector<f64>> = results.iter().flatten().collect();
            let mean = if ok.is_empty() {
                PerEffector::from_fn(|_| f64::NAN)
            } else {
                PerEffector::from_fn(|e| ok.iter().map(|x| x[e]).sum::<f64>() / ok.len() as f64)
            };
            rows.push(InstanceErrors {
                instance: held.to_string(),
                object_type: ty,
                mean,
                predicted: ok.len(),
                misses: results.len() - ok.len(),
            });
        }
    }
    Ok(ErrorTable { strategy, rows, folds })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClutterCase {
    pub id: String,
    pub object_type: ObjectType,
    pub strategy: Strategy,
    /// `None` when prediction failed.
    pub errors: Option<PerEffector<f64>>,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClutterResult {
    pub cases: Vec<ClutterCase>,
}

impl ClutterResult {
    pub fn successes(&self, s: Strategy) -> usize {
        self.cases.iter().filter(|c| c.strategy == s && c.success).count()
    }

    pub fn failures(&self, s: Strategy) -> usize {
        self.cases.iter().filter(|c| c.strategy == s && !c.success).count()
    }

    pub fn strategies(&self) -> Vec<Strategy> {
        let set: BTreeSet<Strategy> = self.cases.iter().map(|c| c.strategy).collect();
        set.into_iter().collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,object_type,strategy,hand_frame_m,thumb_tip_m,index_tip_m,success\n");
        for c in &self.cases {
            let e = c.errors.unwrap_or(PerEffector::from_fn(|_| f64::NAN));
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6},{:.6},{}",
                c.id, c.object_type, c.strategy, e.hand_frame, e.thumb_tip, e.index_tip, c.success
            );
        }
        s
    }

    pub fn to_text_table(&self) -> String {
        let total = self.cases.iter().map(|c| &c.id).collect::<BTreeSet<_>>().len();
        let mut s = format!("failed cluttered cases ({total} total)\n");
        for st in self.strategies() {
            let _ = writeln!(s, "{:<14} {:>3}", st.name(), self.failures(st));
        }
        s
    }
}

/// Applies every model of the matching object type to every cluttered record.
pub fn evaluate_clutter(records: &[GraspRecord], models: &[GraspModel], perception: &Perception) -> Result<ClutterResult> {
    let mut by_key: BTreeMap<(ObjectType, Strategy), &GraspModel> = BTreeMap::new();
    for m in models {
        by_key.insert((m.object_type, m.strategy), m);
    }
    let per_record: Vec<Vec<ClutterCase>> = records
        .par_iter()
        .map(|r| -> Result<Vec<ClutterCase>> {
            let obs = perception.observe(&r.image, &r.cloud)?;
            Ok(by_key
                .iter()
                .filter(|((ty, _), _)| *ty == r.object_type)
                .map(|((_, st), m)| {
                    let errors = predict_from_observation(m, &obs).ok().map(|p| errors(&p.points, &r.effectors));
                    ClutterCase {
                        id: r.id.clone(),
                        object_type: r.object_type,
                        strategy: *st,
                        success: errors.as_ref().is_some_and(clutter_success),
                        errors,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(ClutterResult {
        cases: per_record.into_iter().flatten().collect(),
    })
}

/// Trains every strategy for every object type present in `records`.
pub fn train_all(records: &[GraspRecord], perception: &Perception, params: &ModelParams, strategies: &[Strategy]) -> Result<Vec<GraspModel>> {
    let mut out = Vec::new();
    for ty in ObjectType::ALL {
        let of_type: Vec<&GraspRecord> = records.iter().filter(|r| r.object_type == ty && !r.clutter).collect();
        if of_type.is_empty() {
            continue;
        }
        let demos = perception.demonstrate_all(&of_type)?;
        for &s in strategies {
            out.push(train(ty, &demos, params, s)?);
        }
    }
    Ok(out)
}

/// Per-effector error means over a set of records, for a quick summary.
pub fn mean_errors(errs: &[PerEffector<f64>]) -> Option<PerEffector<f64>> {
    (!errs.is_empty()).then(|| PerEffector::from_fn(|e: EndEffector| errs.iter().map(|x| x[e]).sum::<f64>() / errs.len() as f64))
}
