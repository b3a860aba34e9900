use approx::assert_relative_eq;
use hiergrasp::control::*;
use hiergrasp::grasp::PerEffector;
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(x, y, z)
}

fn random_in_ball(rng: &mut impl Rng, r: f64) -> Vector3<f64> {
    loop {
        let p = v(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r));
        if p.norm() <= r {
            return p;
        }
    }
}

#[test]
fn arm_distance_halves_each_step_from_ten_centimetres() {
    let start = KinematicState::open_hand(v(0.0, 0.0, 0.7), 0.03).unwrap();
    let target = start.hand() + v(0.06, 0.0, -0.08);
    let (out, log, st) = run_arm_controller(start, target, &PotentialConfig::default()).unwrap();
    assert_eq!(st, ControlStatus::Converged);
    // d_k = 0.1 / 2^k; first k with d_k < 1 mm is 7
    assert_eq!(log.iterations(), 7);
    for (k, phi) in log.phis().enumerate() {
        assert_relative_eq!(phi, 0.01 * 0.25f64.powi(k as i32), max_relative = 1e-9);
    }
    assert!((out.hand() - target).norm() < 1e-3);
}

#[test]
fn arm_stage_moves_the_tips_rigidly() {
    let start = KinematicState::new(v(0.1, 0.0, 0.6), v(0.08, 0.01, 0.62), v(0.13, -0.02, 0.6), DEFAULT_REACH).unwrap();
    let (out, _, _) = run_arm_controller(start, v(-0.2, 0.1, 0.8), &PotentialConfig::default()).unwrap();
    let shift = out.hand() - start.hand();
    assert_relative_eq!(out.thumb() - start.thumb(), shift, epsilon = 1e-12);
    assert_relative_eq!(out.index() - start.index(), shift, epsilon = 1e-12);
}

#[test]
fn hand_stage_at_targets_is_a_fixed_point() {
    let s = KinematicState::open_hand(v(0.0, 0.1, 0.7), 0.04).unwrap();
    let (out, log, st) = run_hand_controller(s, s.thumb(), s.index(), &PotentialConfig::default()).unwrap();
    assert_eq!(st, ControlStatus::Converged);
    assert_eq!(log.entries.len(), 1);
    assert_eq!(log.last_phi(), Some(0.0));
    assert_eq!(out.points, s.points);
}

#[test]
fn far_target_ends_on_the_reach_sphere() {
    let s = KinematicState::open_hand(v(0.0, 0.0, 0.7), 0.03).unwrap();
    let far = s.hand() + v(0.6, 0.8, 0.0);
    let near = s.hand() + v(0.0, 0.02, 0.01);
    let (out, _, st) = run_hand_controller(s, far, near, &PotentialConfig::default()).unwrap();
    assert_eq!(st, ControlStatus::Constrained);
    let expected = s.hand() + v(0.6, 0.8, 0.0) * DEFAULT_REACH;
    assert!((out.thumb() - expected).norm() < 1e-4, "{:?}", out.thumb());
    assert!((out.index() - near).norm() < 1e-3);
}

#[test]
fn hand_frame_is_untouched_by_the_hand_stage() {
    let s = KinematicState::open_hand(v(0.02, -0.03, 0.66), 0.03).unwrap();
    let (out, log, _) = run_hand_controller(s, s.hand() + v(0.05, 0.0, 0.02), s.hand() + v(-0.04, 0.03, 0.0), &PotentialConfig::default()).unwrap();
    assert_eq!(out.hand(), s.hand());
    assert!(log.entries.iter().all(|e| e.points.hand_frame == s.hand()));
}

#[test]
fn hand_stage_waits_for_the_arm() {
    let s = KinematicState::open_hand(v(0.0, 0.0, 0.7), 0.03).unwrap();
    let targets = PerEffector {
        hand_frame: v(0.5, 0.0, 0.7),
        thumb_tip: v(0.48, 0.0, 0.7),
        index_tip: v(0.52, 0.0, 0.7),
    };
    let cfg = PotentialConfig { max_iter: 3, ..Default::default() };
    let run = run_preshape_to(s, &targets, &cfg).unwrap();
    assert_eq!(run.arm, ControlStatus::MaxIterations);
    assert_eq!(run.hand, None);
    assert!(!run.succeeded());
    assert_eq!(run.log.stage(Stage::Hand).count(), 0);

    let run = run_preshape_to(s, &targets, &PotentialConfig::default()).unwrap();
    assert!(run.succeeded());
    let arm = run.log.stage(Stage::Arm).count();
    assert!(run.log.entries[..arm].iter().all(|e| e.stage == Stage::Arm));
    assert!(run.log.entries[arm..].iter().all(|e| e.stage == Stage::Hand));
    assert!(run.log.last_phi().unwrap() < 2e-6);
}

#[test]
fn hundred_random_reachable_targets_converge() {
    let cfg = PotentialConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let hand = v(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(0.4..0.9));
        let s = KinematicState::new(hand, hand + random_in_ball(&mut rng, 0.1), hand + random_in_ball(&mut rng, 0.1), DEFAULT_REACH).unwrap();
        let goal = hand + random_in_ball(&mut rng, 0.3);
        let targets = PerEffector {
            hand_frame: goal,
            thumb_tip: goal + random_in_ball(&mut rng, DEFAULT_REACH * 0.95),
            index_tip: goal + random_in_ball(&mut rng, DEFAULT_REACH * 0.95),
        };
        let run = run_preshape_to(s, &targets, &cfg).unwrap();
        assert!(run.succeeded(), "{:?} {:?}", run.arm, run.hand);
        assert!(run.log.entries.len() <= 2 * (cfg.max_iter + 1));
        assert!((run.state.thumb() - targets.thumb_tip).norm() < 1e-3);
        assert!((run.state.index() - targets.index_tip).norm() < 1e-3);
    }
}

#[test]
fn non_finite_hand_target_is_attributed_to_the_hand_stage() {
    let s = KinematicState::open_hand(v(0.0, 0.0, 0.7), 0.03).unwrap();
    let targets = PerEffector {
        hand_frame: v(0.0, 0.0, 0.7),
        thumb_tip: v(f64::NAN, 0.0, 0.7),
        index_tip: v(0.0, 0.0, 0.7),
    };
    let err = run_preshape_to(s, &targets, &PotentialConfig::default()).unwrap_err();
    assert!(err.to_string().contains("hand stage"), "{err}");
}

fn point() -> impl Strategy<Value = Vector3<f64>> {
    (-0.5f64..0.5, -0.5f64..0.5, -0.5f64..0.5).prop_map(|(x, y, z)| v(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn potential_never_increases(hand in point(), t1 in point(), t2 in point(), th in point(), gain in 0.05f64..1.0) {
        let s = KinematicState::open_hand(hand, 0.03).unwrap();
        let cfg = PotentialConfig { gain, ..Default::default() };
        let run = run_preshape_to(s, &PerEffector { hand_frame: th, thumb_tip: t1, index_tip: t2 }, &cfg).unwrap();
        for stage in [Stage::Arm, Stage::Hand] {
            let phis: Vec<f64> = run.log.stage(stage).map(|e| e.phi).collect();
            for w in phis.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "{stage}: {} -> {}", w[0], w[1]);
            }
        }
        prop_assert!(run.log.entries.iter().all(|e| e.phi.is_finite()));
    }

    #[test]
    fn tips_stay_within_reach(hand in point(), t1 in point(), t2 in point()) {
        let s = KinematicState::open_hand(hand, 0.05).unwrap();
        let (_, log, _) = run_hand_controller(s, t1, t2, &PotentialConfig::default()).unwrap();
        for e in &log.entries {
            prop_assert!((e.points.thumb_tip - e.points.hand_frame).norm() <= DEFAULT_REACH + 1e-12);
            prop_assert!((e.points.index_tip - e.points.hand_frame).norm() <= DEFAULT_REACH + 1e-12);
        }
    }
}
