#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde_json::{json, Value};

use teleassist_core::affordance::{door_handle_template, save_template, TemplateDocument};
use teleassist_core::basis::BasisConfig;
use teleassist_core::pose::Pose;
use teleassist_core::promp::{fit_promp, ProMP, DEFAULT_RIDGE};
use teleassist_core::scene::TaskRegistry;
use teleassist_core::synthetic::{generate_synthetic, pool_punches, TaskSpec, DOOR_CLASS, PUNCH_CLASS};
use teleassist_core::trajectory::{Sample, Trajectory};
use teleassist_service::config::ServiceConfig;

pub struct Models {
    pub door: ProMP,
    pub punch: ProMP,
    /// jab, hook, uppercut
    pub families: Vec<ProMP>,
}

fn fit(demos: &[Trajectory], label: &str, frame: &str) -> ProMP {
    fit_with(demos, label, frame, 20)
}

fn fit_with(demos: &[Trajectory], label: &str, frame: &str, m: usize) -> ProMP {
    let basis = BasisConfig::uniform(m, demos[0].dim()).unwrap();
    fit_promp(demos, &basis, DEFAULT_RIDGE, label, frame).unwrap()
}

pub fn models() -> &'static Models {
    static MODELS: OnceLock<Models> = OnceLock::new();
    MODELS.get_or_init(|| {
        let door = &generate_synthetic(&TaskSpec::door(20), 1).unwrap()[0];
        let families = generate_synthetic(&TaskSpec::punch(9), 2).unwrap();
        let pooled = pool_punches(&families).unwrap();
        Models {
            door: fit(&door.demos, &door.task_label, &door.frame),
            punch: fit(&pooled.demos, &pooled.task_label, &pooled.frame),
            families: families
                .iter()
                .map(|s| fit(&s.demos, &s.task_label, &s.frame))
                .collect(),
        }
    })
}

/// door (with the handle template), punch_target (no template) and chair (no tasks).
pub fn registry() -> TaskRegistry {
    let m = models();
    let mut r = TaskRegistry::new();
    r.register(DOOR_CLASS, vec![m.door.clone()], Some(door_handle_template()))
        .unwrap();
    r.register(PUNCH_CLASS, vec![m.punch.clone()], None).unwrap();
    r.register("chair", vec![], None).unwrap();
    r
}

/// Same classes with 8 basis functions per dimension; cheap to condition.
pub fn coarse_registry() -> TaskRegistry {
    let door = &generate_synthetic(&TaskSpec::door(20), 1).unwrap()[0];
    let punch = pool_punches(&generate_synthetic(&TaskSpec::punch(9), 2).unwrap()).unwrap();
    let mut r = TaskRegistry::new();
    let door = fit_with(&door.demos, &door.task_label, &door.frame, 8);
    r.register(DOOR_CLASS, vec![door], Some(door_handle_template()))
        .unwrap();
    r.register(
        PUNCH_CLASS,
        vec![fit_with(&punch.demos, &punch.task_label, &punch.frame, 8)],
        None,
    )
    .unwrap();
    r.register("chair", vec![], None).unwrap();
    r
}

/// Writes primitives, templates and a manifest into `dir`; returns a config
/// pointing at them, bound to an ephemeral port.
pub fn write_assets(dir: &Path) -> ServiceConfig {
    let m = models();
    m.door.save(&dir.join("door.promp.json")).unwrap();
    m.punch.save(&dir.join("punch.promp.json")).unwrap();
    save_template(&door_handle_template(), &dir.join("door.at.json")).unwrap();
    let none = serde_json::to_string(&TemplateDocument::none(PUNCH_CLASS)).unwrap();
    std::fs::write(dir.join("punch.at.json"), none).unwrap();
    let manifest = dir.join("manifest.toml");
    std::fs::write(
        &manifest,
        r#"version = 1
[classes.door]
promps = ["door.promp.json"]
affordance = "door.at.json"
[classes.punch_target]
promps = ["punch.promp.json"]
affordance = "punch.at.json"
[classes.chair]
"#,
    )
    .unwrap();
    let mut cfg = ServiceConfig::default();
    cfg.server.manifest = manifest;
    cfg.server.port = 0;
    cfg
}

pub fn asset_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// A held-out motion in the world frame: a short rest, then the movement,
/// with timestamps starting at `t0`.
pub fn world_stream(traj: &Trajectory, pose: &Pose, t0: f64) -> Vec<Sample> {
    let rest = 10;
    let dt = traj.samples[1].t - traj.samples[0].t;
    let first = &traj.samples[0].values;
    let mut out: Vec<Sample> = (0..rest)
        .map(|i| Sample::new(t0 + i as f64 * dt, first.clone()))
        .collect();
    out.extend(
        traj.samples
            .iter()
            .map(|s| Sample::new(t0 + (rest as f64) * dt + s.t, s.values.clone())),
    );
    let mut prev: Option<Vec<f64>> = None;
    for s in &mut out {
        s.values = pose.transform_values(&traj.channels, &s.values, prev.as_deref());
        prev = Some(s.values.clone());
    }
    out
}

pub fn door_test(seed: u64) -> Trajectory {
    generate_synthetic(&TaskSpec::door(2), seed).unwrap()[0].demos[0].clone()
}

pub fn punch_test(seed: u64, family: usize) -> Trajectory {
    generate_synthetic(&TaskSpec::punch(2), seed).unwrap()[family].demos[0].clone()
}

pub fn inject(class: &str, pose: &Pose) -> Value {
    json!({"type": "inject_detection", "object_class": class, "pose": pose.to_wire()})
}

pub fn feed(s: &Sample) -> Value {
    json!({"type": "feed_observation", "t": s.t, "values": s.values})
}

pub fn door_pose() -> Pose {
    Pose::from_yaw(nalgebra::Vector3::new(1.2, -0.4, 0.95), 2.6)
}
