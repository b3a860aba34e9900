use std::fmt::Write as _;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::control::{run_preshape, ControlStatus, KinematicState, PotentialConfig, Preshape};
use crate::error::{Error, Result};
use crate::grasp::{predict_from_observation, GraspModel, GraspPrediction, Perception, PerEffector};
use crate::scene::{single_object_scene, CameraModel, DatasetConfig, ObjectInstance};

/// Both final tips must be this close to the annotated ones.
pub const PRESHAPE_TOLERANCE_M: f64 = 0.015;

/// Where the simulated hand starts, relative to the predicted hand frame.
pub fn start_state(prediction: &GraspPrediction) -> Result<KinematicState> {
    KinematicState::open_hand(prediction.points.hand_frame + Vector3::new(0.05, -0.1, -0.1), 0.03)
}

/// Predicts, then runs both controller stages from [`start_state`].
pub fn preshape_from_prediction(prediction: &GraspPrediction, cfg: &PotentialConfig) -> Result<Preshape> {
    run_preshape(start_state(prediction)?, prediction, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreshapeTrial {
    pub instance: String,
    /// `None` when prediction failed.
    pub tip_errors: Option<(f64, f64)>,
    pub arm: Option<ControlStatus>,
    pub hand: Option<ControlStatus>,
}

impl PreshapeTrial {
    pub fn within(&self, tol: f64) -> bool {
        self.tip_errors.is_some_and(|(t, i)| t < tol && i < tol)
    }
}

/// Renders `scenes` fresh single-object scenes cycling through `instances`,
/// predicts with the model of the matching type and pre-shapes toward the
/// prediction. Final tips are compared with the renderer's annotation.
#[allow(clippy::too_many_arguments)]
pub fn preshape_trials(
    models: &[GraspModel],
    perception: &Perception,
    instances: &[ObjectInstance],
    dataset: &DatasetConfig,
    cam: &CameraModel,
    scenes: usize,
    seed: u64,
    cfg: &PotentialConfig,
) -> Result<Vec<PreshapeTrial>> {
    if instances.is_empty() {
        return Err(Error::Config("no instances to pre-shape on".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(scenes);
    for k in 0..scenes {
        let inst = &instances[k % instances.len()];
        let ty = inst.shape.object_type();
        let model = models
            .iter()
            .find(|m| m.object_type == ty)
            .ok_or_else(|| Error::Config(format!("no {ty} model")))?;
        let (_, scene) = single_object_scene(&mut rng, inst, dataset, cam)?;
        let truth: PerEffector<Vector3<f64>> = scene
            .annotation
            .ok_or_else(|| Error::Scene("single-object scene without annotation".into()))?;
        let obs = perception.observe(&scene.image, &scene.cloud)?;
        let trial = match predict_from_observation(model, &obs) {
            Ok(p) => {
                let run = preshape_from_prediction(&p, cfg)?;
                PreshapeTrial {
                    instance: inst.name.clone(),
                    tip_errors: Some(((run.state.thumb() - truth.thumb_tip).norm(), (run.state.index() - truth.index_tip).norm())),
                    arm: Some(run.arm),
                    hand: run.hand,
                }
            }
            Err(e) => {
                log::warn!("scene {k} ({}): {e}", inst.name);
                PreshapeTrial {
                    instance: inst.name.clone(),
                    tip_errors: None,
                    arm: None,
                    hand: None,
                }
            }
        };
        out.push(trial);
    }
    Ok(out)
}

pub fn trials_to_csv(trials: &[PreshapeTrial]) -> String {
    let mut s = String::from("scene,instance,thumb_tip_m,index_tip_m,arm,hand\n");
    let status = |c: Option<ControlStatus>| c.map_or("none".to_string(), |c| format!("{c:?}").to_lowercase());
    for (k, t) in trials.iter().enumerate() {
        let (a, b) = t.tip_errors.unwrap_or((f64::NAN, f64::NAN));
        let _ = writeln!(s, "{k},{},{a:.6},{b:.6},{},{}", t.instance, status(t.arm), status(t.hand));
    }
    s
}
