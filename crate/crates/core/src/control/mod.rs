//! Two-stage pre-shape over free effector points: the arm stage carries the
//! whole hand toward the hand-frame target, then the hand stage moves the
//! thumb and index tips inside a reach sphere around the fixed hand frame.
//!
//! Both stages descend a sum of squared distances with the exact gradient.
//! One iteration moves each engaged point by `gain * (target - x)`, that is
//! `gain / 2` times the negative gradient.

use std::fmt::{self, Write as _};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::grasp::{EndEffector, GraspPrediction, PerEffector};

pub const DEFAULT_REACH: f64 = 0.12;

/// A tip that moved less than this fraction of epsilon in one iteration has stalled.
const STALL_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Arm,
    Hand,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Arm => "arm",
            Stage::Hand => "hand",
        }
    }

    /// Effectors the stage drives directly. The arm stage carries the tips along.
    pub fn engaged(self) -> PerEffector<bool> {
        match self {
            Stage::Arm => PerEffector { hand_frame: true, thumb_tip: false, index_tip: false },
            Stage::Hand => PerEffector { hand_frame: false, thumb_tip: true, index_tip: true },
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinematicState {
    pub points: PerEffector<Vector3<f64>>,
    pub reach: f64,
    pub engaged: PerEffector<bool>,
}

impl KinematicState {
    pub fn new(hand: Vector3<f64>, thumb: Vector3<f64>, index: Vector3<f64>, reach: f64) -> Result<Self> {
        if !(reach > 0.0 && reach.is_finite()) {
            return Err(Error::Config(format!("reach radius must be positive, got {reach}")));
        }
        let s = Self {
            points: PerEffector { hand_frame: hand, thumb_tip: thumb, index_tip: index },
            reach,
            engaged: PerEffector::default(),
        };
        if s.points.iter().any(|(_, p)| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::Config("kinematic state has a non-finite position".into()));
        }
        for e in [EndEffector::ThumbTip, EndEffector::IndexTip] {
            let d = (s.points[e] - hand).norm();
            if d > reach {
                return Err(Error::Config(format!("{e} is {d:.4} m from the hand frame, beyond reach {reach}")));
            }
        }
        Ok(s)
    }

    /// Hand at `hand`, tips spread `spread` meters either side along x.
    pub fn open_hand(hand: Vector3<f64>, spread: f64) -> Result<Self> {
        let dx = Vector3::x() * spread;
        Self::new(hand, hand - dx, hand + dx, DEFAULT_REACH)
    }

    pub fn hand(&self) -> Vector3<f64> {
        self.points.hand_frame
    }

    pub fn thumb(&self) -> Vector3<f64> {
        self.points.thumb_tip
    }

    pub fn index(&self) -> Vector3<f64> {
        self.points.index_tip
    }

    fn clamp_to_reach(&self, p: Vector3<f64>) -> Vector3<f64> {
        let d = p - self.hand();
        let n = d.norm();
        if n > self.reach {
            self.hand() + d * (self.reach / n)
        } else {
            p
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialConfig {
    pub gain: f64,
    /// Convergence distance per engaged effector, meters.
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self { gain: 0.5, epsilon: 1e-3, max_iter: 500 }
    }
}

impl PotentialConfig {
    pub fn validate(&self) -> Result<()> {
        // gain at or above 1 overshoots; at 2 and beyond it diverges
        if !(self.gain > 0.0 && self.gain <= 1.0) {
            return Err(Error::Config(format!("controller gain must be in (0, 1], got {}", self.gain)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("controller epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlStatus {
    Converged,
    /// Settled on the reach sphere short of a target.
    Constrained,
    MaxIterations,
}

impl ControlStatus {
    pub fn name(self) -> &'static str {
        match self {
            ControlStatus::Converged => "converged",
            ControlStatus::Constrained => "constrained",
            ControlStatus::MaxIterations => "max-iterations",
        }
    }
}

impl fmt::Display for ControlStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogEntry {
    pub stage: Stage,
    pub iteration: usize,
    pub phi: f64,
    pub points: PerEffector<Vector3<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ControllerLog {
    pub entries: Vec<LogEntry>,
}

impl ControllerLog {
    pub fn phis(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.phi)
    }

    pub fn last_phi(&self) -> Option<f64> {
        self.entries.last().map(|e| e.phi)
    }

    pub fn stage(&self, s: Stage) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(move |e| e.stage == s)
    }

    /// Iterations actually taken (entries after the initial one).
    pub fn iterations(&self) -> usize {
        self.entries.iter().filter(|e| e.iteration > 0).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,iteration,phi,hand_x,hand_y,hand_z,thumb_x,thumb_y,thumb_z,index_x,index_y,index_z\n");
        for e in &self.entries {
            let _ = write!(s, "{},{},{:.9e}", e.stage, e.iteration, e.phi);
            for (_, p) in e.points.iter() {
                let _ = write!(s, ",{:.6},{:.6},{:.6}", p.x, p.y, p.z);
            }
            s.push('\n');
        }
        s
    }
}

fn check_target(stage: Stage, e: EndEffector, t: &Vector3<f64>) -> Result<()> {
    if t.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Controller { stage: stage.name().into(), message: format!("{e} target is not finite") })
    }
}

fn potential(points: &PerEffector<Vector3<f64>>, targets: &[(EndEffector, Vector3<f64>)]) -> f64 {
    targets.iter().map(|(e, t)| (points[*e] - t).norm_squared()).sum()
}

fn descend(mut state: KinematicState, stage: Stage, targets: &[(EndEffector, Vector3<f64>)], cfg: &PotentialConfig) -> Result<(KinematicState, ControllerLog, ControlStatus)> {
    cfg.validate()?;
    for (e, t) in targets {
        check_target(stage, *e, t)?;
    }
    state.engaged = stage.engaged();
    // every engaged effector within epsilon, which also bounds phi by n epsilon^2
    let done = |points: &PerEffector<Vector3<f64>>| targets.iter().all(|(e, t)| (points[*e] - t).norm() < cfg.epsilon);
    let mut phi = potential(&state.points, targets);
    let mut log = ControllerLog::default();
    log.entries.push(LogEntry { stage, iteration: 0, phi, points: state.points });
    for it in 1..=cfg.max_iter {
        if done(&state.points) {
            return Ok((state, log, ControlStatus::Converged));
        }
        let mut moved: f64 = 0.0;
        match stage {
            Stage::Arm => {
                let (_, t) = targets[0];
                let step = (t - state.hand()) * cfg.gain;
                for e in EndEffector::ALL {
                    state.points[e] += step;
                }
                moved = step.norm();
            }
            Stage::Hand => {
                for (e, t) in targets {
                    let p = state.points[*e];
                    let next = state.clamp_to_reach(p + (t - p) * cfg.gain);
                    moved = moved.max((next - p).norm());
                    state.points[*e] = next;
                }
            }
        }
        phi = potential(&state.points, targets);
        log.entries.push(LogEntry { stage, iteration: it, phi, points: state.points });
        if !done(&state.points) && moved < cfg.epsilon * STALL_FRACTION {
            return Ok((state, log, ControlStatus::Constrained));
        }
    }
    let status = if done(&state.points) { ControlStatus::Converged } else { ControlStatus::MaxIterations };
    Ok((state, log, status))
}

/// Translates the whole hand until the hand frame is within epsilon of `hand_target`.
pub fn run_arm_controller(state: KinematicState, hand_target: Vector3<f64>, cfg: &PotentialConfig) -> Result<(KinematicState, ControllerLog, ControlStatus)> {
    descend(state, Stage::Arm, &[(EndEffector::HandFrame, hand_target)], cfg)
}

/// Moves the two tips with the hand frame held still. Targets out of reach
/// end on the reach sphere with status `Constrained`.
pub fn run_hand_controller(
    state: KinematicState,
    thumb_target: Vector3<f64>,
    index_target: Vector3<f64>,
    cfg: &PotentialConfig,
) -> Result<(KinematicState, ControllerLog, ControlStatus)> {
    descend(state, Stage::Hand, &[(EndEffector::ThumbTip, thumb_target), (EndEffector::IndexTip, index_target)], cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preshape {
    pub state: KinematicState,
    /// Arm entries, then hand entries.
    pub log: ControllerLog,
    pub arm: ControlStatus,
    /// `None` when the arm stage did not converge and the hand stage never ran.
    pub hand: Option<ControlStatus>,
}

impl Preshape {
    pub fn succeeded(&self) -> bool {
        self.arm == ControlStatus::Converged && self.hand == Some(ControlStatus::Converged)
    }
}

/// Arm stage to the predicted hand frame, then, once it has converged, hand
/// stage to the predicted tips.
pub fn run_preshape(state: KinematicState, prediction: &GraspPrediction, cfg: &PotentialConfig) -> Result<Preshape> {
    run_preshape_to(state, &prediction.points, cfg)
}

pub fn run_preshape_to(state: KinematicState, targets: &PerEffector<Vector3<f64>>, cfg: &PotentialConfig) -> Result<Preshape> {
    let (state, mut log, arm) = run_arm_controller(state, targets.hand_frame, cfg)?;
    if arm != ControlStatus::Converged {
        return Ok(Preshape { state, log, arm, hand: None });
    }
    let (state, hand_log, hand) = run_hand_controller(state, targets.thumb_tip, targets.index_tip, cfg)?;
    log.entries.extend(hand_log.entries);
    Ok(Preshape { state, log, arm, hand: Some(hand) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn already_at_target_takes_no_step() {
        let s = KinematicState::open_hand(v(0.0, 0.0, 0.7), 0.03).unwrap();
        let (out, log, st) = run_arm_controller(s, s.hand(), &PotentialConfig::default()).unwrap();
        assert_eq!(st, ControlStatus::Converged);
        assert_eq!(log.entries.len(), 1);
        assert_eq!(log.last_phi(), Some(0.0));
        assert_eq!(out.points, s.points);
    }

    #[test]
    fn state_outside_reach_is_rejected() {
        assert!(KinematicState::new(v(0.0, 0.0, 0.0), v(0.2, 0.0, 0.0), v(0.0, 0.0, 0.0), 0.12).is_err());
    }

    #[test]
    fn bad_gain_is_rejected() {
        let s = KinematicState::open_hand(v(0.0, 0.0, 0.7), 0.03).unwrap();
        let cfg = PotentialConfig { gain: 2.5, ..Default::default() };
        assert!(matches!(run_arm_controller(s, v(0.1, 0.0, 0.7), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn non_finite_target_names_the_stage() {
        let s = KinematicState::open_hand(v(0.0, 0.0, 0.7), 0.03).unwrap();
        let err = run_hand_controller(s, v(f64::NAN, 0.0, 0.0), s.index(), &PotentialConfig::default()).unwrap_err();
        assert!(err.to_string().contains("hand stage"));
    }

    #[test]
    fn csv_has_one_row_per_entry() {
        let s = KinematicState::open_hand(v(0.0, 0.0, 0.7), 0.03).unwrap();
        let (_, log, _) = run_arm_controller(s, v(0.05, 0.0, 0.7), &PotentialConfig::default()).unwrap();
        let csv = log.to_csv();
        assert_eq!(csv.lines().count(), log.entries.len() + 1);
        assert!(csv.lines().nth(1).unwrap().starts_with("arm,0,"));
    }
}
