mod common;

use common::scenes::{perception, record_of};
use hiergrasp::eval::*;
use hiergrasp::features::HierFeature;
use hiergrasp::grasp::*;
use hiergrasp::image::RgbImage;
use hiergrasp::scene::{dataset_instances, generate_dataset, CameraModel, DatasetConfig};
use nalgebra::Vector3;
use proptest::prelude::{prop_assert_eq, proptest};

fn small() -> Vec<GraspRecord> {
    let cfg = DatasetConfig {
        instances_per_type: 3,
        records_per_instance: 3,
        clutter_scenes: 0,
        ..DatasetConfig::default()
    };
    generate_dataset(&cfg, &CameraModel::default()).unwrap().records
}

proptest! {
    #[test]
    fn success_follows_the_thresholds(h in 0.0f64..0.2, t in 0.0f64..0.1, i in 0.0f64..0.1) {
        let err = PerEffector { hand_frame: h, thumb_tip: t, index_tip: i };
        prop_assert_eq!(clutter_success(&err), t < 0.05 && i < 0.05 && h < 0.10);
    }
}

#[test]
fn success_is_strict_at_the_boundary() {
    let ok = PerEffector { hand_frame: 0.0999, thumb_tip: 0.0499, index_tip: 0.0499 };
    assert!(clutter_success(&ok));
    assert!(!clutter_success(&PerEffector { thumb_tip: 0.05, ..ok }));
    assert!(!clutter_success(&PerEffector { index_tip: 0.05, ..ok }));
    assert!(!clutter_success(&PerEffector { hand_frame: 0.10, ..ok }));
}

#[test]
fn folds_never_train_on_the_held_out_instance() {
    let records = small();
    let p = perception();
    let table = cross_validate(&records, &p, &ModelParams::default(), Strategy::HierFeat).unwrap();
    assert_eq!(table.folds.len(), 6);
    for f in &table.folds {
        assert!(!f.training_instances.contains(&f.held_out));
        for id in &f.training {
            let r = records.iter().find(|r| &r.id == id).unwrap();
            assert_ne!(r.instance, f.held_out);
            assert_eq!(r.object_type, f.object_type);
        }
        let expected = records.iter().filter(|r| r.object_type == f.object_type && r.instance != f.held_out).count();
        assert_eq!(f.training.len(), expected);
    }
    for ty in ObjectType::ALL {
        let rows: Vec<_> = table.rows.iter().filter(|r| r.object_type == ty).collect();
        let avg = table.type_average(ty).unwrap();
        for (e, v) in avg.iter() {
            assert!(rows.iter().all(|r| r.mean[e] >= 0.0));
            let mean = rows.iter().map(|r| r.mean[e]).sum::<f64>() / rows.len() as f64;
            assert!((*v - mean).abs() < 1e-15);
        }
    }
    let again = cross_validate(&records, &p, &ModelParams::default(), Strategy::HierFeat).unwrap();
    assert_eq!(table.to_csv(), again.to_csv());
    assert!(table.to_text_table().contains("cuboid"));
}

#[test]
fn duplicated_scene_is_reproduced_exactly() {
    let cam = CameraModel::default();
    let base = record_of(&dataset_instances(&DatasetConfig::default())[0], "x", &cam);
    let records: Vec<GraspRecord> = (0..6)
        .map(|k| GraspRecord {
            id: format!("dup-{k}"),
            instance: format!("copy-{}", k / 2),
            ..base.clone()
        })
        .collect();
    let table = cross_validate(&records, &perception(), &ModelParams::default(), Strategy::HierFeat).unwrap();
    assert_eq!(table.rows.len(), 3);
    for r in &table.rows {
        assert_eq!(r.misses, 0);
        for (e, v) in r.mean.iter() {
            assert!(*v < 2.0 * cam.voxel(), "{} {e}: {v}", r.instance);
        }
    }
}

#[test]
fn lone_target_scores_like_a_single_object_scene() {
    let records = small();
    let p = perception();
    let models = train_all(&records, &p, &ModelParams::default(), &[Strategy::HierFeat, Strategy::Baseline]).unwrap();
    let cam = CameraModel::default();
    let inst = &dataset_instances(&DatasetConfig::default())[4];
    let mut lone = record_of(inst, "lone", &cam);
    lone.clutter = true;
    let res = evaluate_clutter(std::slice::from_ref(&lone), &models, &p).unwrap();
    assert_eq!(res.cases.len(), 2);
    for c in &res.cases {
        let m = models.iter().find(|m| m.strategy == c.strategy && m.object_type == lone.object_type).unwrap();
        let pred = predict_grasp(m, &p, &lone.image, &lone.cloud).unwrap();
        assert_eq!(c.errors, Some(errors(&pred.points, &lone.effectors)));
        assert_eq!(c.success, clutter_success(&c.errors.unwrap()));
    }
    assert_eq!(res.successes(Strategy::HierFeat) + res.failures(Strategy::HierFeat), 1);
}

fn one_each() -> GraspPrediction {
    let f: HierFeature = "conv-5/0".parse().unwrap();
    let pts = PerEffector {
        hand_frame: Vector3::new(-0.05, 0.02, 0.8),
        thumb_tip: Vector3::new(0.0, -0.03, 0.75),
        index_tip: Vector3::new(0.06, 0.04, 0.85),
    };
    let shift = Vector3::new(0.0, 0.02, 0.0);
    GraspPrediction {
        points: pts,
        candidates: pts.map(|_, p| {
            vec![Candidate {
                position: p + shift,
                weight: 1.0,
                feature: f.clone(),
            }]
        }),
        found: 3,
        missing: 0,
    }
}

#[test]
fn overlay_puts_markers_on_the_projections() {
    let cam = CameraModel::default();
    let pred = one_each();
    let img = draw_overlay(&RgbImage::new(cam.height, cam.width, [0, 0, 0]), &pred, &cam, OverlayStyle::default());
    for e in EndEffector::ALL {
        let color = effector_color(e);
        let (r, c) = cam.project(&pred.points[e]).unwrap();
        let (ri, ci) = (r.round() as usize, c.round() as usize);
        assert!((ri as f64 - r).abs() <= 1.0 && (ci as f64 - c).abs() <= 1.0);
        assert_eq!(img.get(ri, ci), color);
        let (dr, dc) = cam.project(&pred.candidates[e][0].position).unwrap();
        assert_eq!(img.get(dr.round() as usize, dc.round() as usize), color);
        // hollow 9x9 square, its centre, and one dot
        let n = (0..cam.height)
            .flat_map(|y| (0..cam.width).map(move |x| (y, x)))
            .filter(|&(y, x)| img.get(y, x) == color)
            .count();
        assert_eq!(n, 32 + 1 + 1, "{e}");
    }
}

#[test]
fn overlay_file_is_reproducible() {
    let cam = CameraModel::default();
    let dir = tempfile::tempdir().unwrap();
    let base = RgbImage::new(cam.height, cam.width, [40, 40, 40]);
    let (a, b) = (dir.path().join("a.ppm"), dir.path().join("b.ppm"));
    emit_overlay(&a, &base, &one_each(), &cam).unwrap();
    emit_overlay(&b, &base, &one_each(), &cam).unwrap();
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_eq!(RgbImage::from_ppm(&bytes).unwrap(), draw_overlay(&base, &one_each(), &cam, OverlayStyle::default()));
}

#[test]
fn preshape_trials_report_every_scene() {
    let records = small();
    let p = perception();
    let models = train_all(&records, &p, &ModelParams::default(), &[Strategy::HierFeat]).unwrap();
    let cfg = DatasetConfig::default();
    let inst = dataset_instances(&DatasetConfig {
        instances_per_type: 3,
        ..cfg.clone()
    });
    let cam = CameraModel::default();
    let trials = preshape_trials(&models, &p, &inst, &cfg, &cam, 6, 1, &hiergrasp::control::PotentialConfig::default()).unwrap();
    assert_eq!(trials.len(), 6);
    assert_eq!(trials_to_csv(&trials).lines().count(), 7);
    let again = preshape_trials(&models, &p, &inst, &cfg, &cam, 6, 1, &hiergrasp::control::PotentialConfig::default()).unwrap();
    assert_eq!(trials, again);
}
