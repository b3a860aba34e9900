use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::camera::CameraModel;
use super::objects::{ObjectInstance, SceneSpec, Shape};
use super::render::{render, RenderedScene, TABLE_ALBEDO};
use crate::error::{Error, Result};
use crate::grasp::{GraspRecord, ObjectType};

/// Knobs for the synthetic dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub instances_per_type: usize,
    pub records_per_instance: usize,
    pub clutter_scenes: usize,
    pub dropout: f64,
    /// Largest cuboid yaw, radians.
    pub max_yaw: f64,
    /// Lighting scalar range.
    pub lighting: (f64, f64),
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            instances_per_type: 6,
            records_per_instance: 10,
            clutter_scenes: 24,
            dropout: 0.02,
            max_yaw: 10f64.to_radians(),
            lighting: (0.85, 1.15),
            seed: 7,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    /// Single-object demonstrations.
    pub records: Vec<GraspRecord>,
    /// Two-object scenes; the record annotates the target instance.
    pub clutter: Vec<GraspRecord>,
}

fn luminance(c: [f64; 3]) -> f64 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

/// Albedo at least 0.25 brighter than the table, so every visible face
/// stands out from it.
fn sample_color(rng: &mut impl Rng) -> [f64; 3] {
    let table = luminance(TABLE_ALBEDO);
    loop {
        let c = [rng.random_range(0.05..1.0), rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)];
        if luminance(c) - table > 0.25 {
            return c;
        }
    }
}

/// New instance with random dimensions and colour, posed at the origin.
pub fn sample_instance(rng: &mut impl Rng, ty: ObjectType, name: &str) -> ObjectInstance {
    let shape = match ty {
        ObjectType::Cuboid => Shape::Cuboid {
            width: rng.random_range(0.09..0.12),
            depth: rng.random_range(0.06..0.08),
            height: rng.random_range(0.09..0.12),
        },
        ObjectType::Cylinder => Shape::Cylinder {
            radius: rng.random_range(0.03..0.04),
            height: rng.random_range(0.10..0.13),
        },
    };
    ObjectInstance {
        name: name.to_string(),
        shape,
        x: 0.0,
        y: 0.0,
        yaw: 0.0,
        color: sample_color(rng),
    }
}

fn place(rng: &mut impl Rng, inst: &ObjectInstance, x: (f64, f64), y: (f64, f64), max_yaw: f64) -> ObjectInstance {
    let yaw = match inst.shape {
        Shape::Cuboid { .. } => rng.random_range(-max_yaw..=max_yaw),
        Shape::Cylinder { .. } => 0.0,
    };
    ObjectInstance {
        x: rng.random_range(x.0..x.1),
        y: rng.random_range(y.0..y.1),
        yaw,
        ..inst.clone()
    }
}

fn to_record(id: String, scene: RenderedScene, target: &ObjectInstance, clutter: bool) -> GraspRecord {
    GraspRecord {
        id,
        image: scene.image,
        cloud: scene.cloud,
        effectors: scene.annotation.expect("spec has a target"),
        object_type: target.shape.object_type(),
        instance: target.name.clone(),
        clutter,
    }
}

/// Renders one single-object demonstration of `inst` at a random pose.
pub fn single_object_scene(rng: &mut impl Rng, inst: &ObjectInstance, cfg: &DatasetConfig, cam: &CameraModel) -> Result<(SceneSpec, RenderedScene)> {
    for _ in 0..100 {
        let spec = SceneSpec {
            objects: vec![place(rng, inst, (-0.05, 0.05), (-0.05, 0.05), cfg.max_yaw)],
            target: Some(0),
            lighting: rng.random_range(cfg.lighting.0..cfg.lighting.1),
            seed: rng.random(),
            dropout: cfg.dropout,
        };
        match render(&spec, cam) {
            Ok(scene) => return Ok((spec, scene)),
            Err(Error::Scene(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Scene(format!("could not place instance {} in view", inst.name)))
}

/// Renders `target` beside a distractor of the other type.
pub fn clutter_scene(
    rng: &mut impl Rng,
    target: &ObjectInstance,
    distractor: &ObjectInstance,
    cfg: &DatasetConfig,
    cam: &CameraModel,
) -> Result<(SceneSpec, RenderedScene)> {
    for _ in 0..200 {
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let t = place(rng, target, (side * 0.09 - 0.02, side * 0.09 + 0.02), (-0.04, 0.04), cfg.max_yaw);
        let d = place(rng, distractor, (-side * 0.09 - 0.02, -side * 0.09 + 0.02), (-0.04, 0.04), cfg.max_yaw);
        let spec = SceneSpec {
            objects: vec![t, d],
            target: Some(0),
            lighting: rng.random_range(cfg.lighting.0..cfg.lighting.1),
            seed: rng.random(),
            dropout: cfg.dropout,
        };
        match render(&spec, cam) {
            Ok(scene) => return Ok((spec, scene)),
            Err(Error::Scene(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Scene(format!("could not place {} and {} in view", target.name, distractor.name)))
}

/// Instances in generation order: all cuboids, then all cylinders.
pub fn dataset_instances(cfg: &DatasetConfig) -> Vec<ObjectInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for ty in ObjectType::ALL {
        for i in 0..cfg.instances_per_type {
            out.push(sample_instance(&mut rng, ty, &format!("{ty}-{i:02}")));
        }
    }
    out
}

/// Deterministic dataset: `records_per_instance` demonstrations of each
/// instance plus `clutter_scenes` two-object scenes built from fresh
/// instances, targets alternating between the two types.
pub fn generate_dataset(cfg: &DatasetConfig, cam: &CameraModel) -> Result<Dataset> {
    let instances = dataset_instances(cfg);
    let mut records = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x9e37_79b9 * (k as u64 + 1)));
        for r in 0..cfg.records_per_instance {
            let (_, scene) = single_object_scene(&mut rng, inst, cfg, cam)?;
            records.push(to_record(format!("{}-r{r:02}", inst.name), scene, inst, false));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0xc1u64 << 32));
    let mut clutter = Vec::new();
    for k in 0..cfg.clutter_scenes {
        let ty = ObjectType::ALL[k % 2];
        let other = ObjectType::ALL[(k + 1) % 2];
        let target = sample_instance(&mut rng, ty, &format!("clutter-{k:02}-{ty}"));
        let distractor = sample_instance(&mut rng, other, &format!("clutter-{k:02}-{other}"));
        let (spec, scene) = clutter_scene(&mut rng, &target, &distractor, cfg, cam)?;
        clutter.push(to_record(format!("clutter-{k:02}"), scene, &spec.objects[0], true));
    }
    Ok(Dataset { records, clutter })
}
