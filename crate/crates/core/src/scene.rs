//! Detected objects and the primitives and templates attached to their class.
//!
//! Fiducial detection is out of the loop: objects enter the scene through
//! pose injection and can be corrected by a manual override.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::affordance::{load_template, AffordanceTemplate};
use crate::error::{CoreError, Result};
use crate::pose::Pose;
use crate::promp::ProMP;

pub type ObjectId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoseSource {
    Injected,
    ManualOverride,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    pub object_class: String,
    pub pose: Pose,
    pub pose_source: PoseSource,
    pub associated_tasks: Vec<String>,
    /// Class whose template applies, when the class has one.
    pub affordance: Option<String>,
}

impl SceneObject {
    pub fn has_tasks(&self) -> bool {
        !self.associated_tasks.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskEntry {
    pub promps: Vec<ProMP>,
    pub affordance: Option<AffordanceTemplate>,
}

/// Object class to primitives/template lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskRegistry {
    classes: BTreeMap<String, TaskEntry>,
}

impl TaskRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds primitives to a class, keeping registration order.
    pub fn register(
        &mut self,
        object_class: &str,
        promps: Vec<ProMP>,
        affordance: Option<AffordanceTemplate>,
    ) -> Result<()> {
        if let Some(layout) = promps.first().map(|p| &p.channels) {
            if promps.iter().any(|p| &p.channels != layout) {
                return Err(CoreError::Schema(format!(
                    "primitives for {object_class} use different channel layouts"
                )));
            }
        }
        let entry = self.classes.entry(object_class.to_string()).or_default();
        if let (Some(existing), Some(new)) = (entry.promps.first(), promps.first()) {
            if existing.channels != new.channels {
                return Err(CoreError::Schema(format!(
                    "primitives for {object_class} use different channel layouts"
                )));
            }
        }
        entry.promps.extend(promps);
        if affordance.is_some() {
            entry.affordance = affordance;
        }
        Ok(())
    }

    pub fn contains(&self, object_class: &str) -> bool {
        self.classes.contains_key(object_class)
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    /// Primitives for a class in registration order.
    pub fn tasks_for(&self, object_class: &str) -> Result<&[ProMP]> {
        self.classes
            .get(object_class)
            .map(|e| e.promps.as_slice())
            .ok_or_else(|| CoreError::UnknownObject(object_class.to_string()))
    }

    pub fn affordance_for(&self, object_class: &str) -> Option<&AffordanceTemplate> {
        self.classes.get(object_class).and_then(|e| e.affordance.as_ref())
    }

    /// Loads a manifest mapping each class to primitive and template files.
    ///
    /// Relative paths resolve against the manifest's directory.
    pub fn load_manifest(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| CoreError::Parse {
            location: path.display().to_string(),
            message: e.to_string(),
        })?;
        if manifest.version != MANIFEST_VERSION {
            return Err(CoreError::Version {
                found: manifest.version,
                supported: MANIFEST_VERSION,
            });
        }
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut registry = Self::new();
        for (class, entry) in manifest.classes {
            let promps = entry
                .promps
                .iter()
                .map(|p| ProMP::load(&base.join(p)))
                .collect::<Result<Vec<_>>>()?;
            let affordance = match &entry.affordance {
                Some(p) => load_template(&base.join(p))?,
                None => None,
            };
            if let Some(at) = &affordance {
                if at.object_class != class {
                    return Err(CoreError::Schema(format!(
                        "template for {} registered under class {class}",
                        at.object_class
                    )));
                }
            }
            registry.register(&class, promps, affordance)?;
        }
        Ok(registry)
    }
}

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    #[serde(default)]
    pub classes: BTreeMap<String, ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    #[serde(default)]
    pub promps: Vec<String>,
    pub affordance: Option<String>,
}

/// Outcome of an injection.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub object: SceneObject,
    /// The class has primitives, so assistance can be offered.
    pub available: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scene {
    registry: TaskRegistry,
    objects: Vec<SceneObject>,
    next_id: ObjectId,
}

impl Scene {
    pub fn new(registry: TaskRegistry) -> Self {
        Self {
            registry,
            objects: Vec::new(),
            next_id: 1,
        }
    }

    pub fn registry(&self) -> &TaskRegistry {
        &self.registry
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn object(&self, id: ObjectId) -> Result<&SceneObject> {
        self.objects
            .iter()
            .find(|o| o.id == id)
            .ok_or_else(|| CoreError::UnknownObject(format!("object #{id}")))
    }

    pub fn tasks_for(&self, object_class: &str) -> Result<&[ProMP]> {
        self.registry.tasks_for(object_class)
    }

    pub fn inject_detection(&mut self, object_class: &str, pose: Pose) -> Result<Injection> {
        let tasks = self.registry.tasks_for(object_class)?;
        let associated_tasks: Vec<String> = tasks.iter().map(|p| p.task_label.clone()).collect();
        let affordance = self
            .registry
            .affordance_for(object_class)
            .map(|_| object_class.to_string());
        let object = SceneObject {
            id: self.next_id.max(1),
            object_class: object_class.to_string(),
            pose,
            pose_source: PoseSource::Injected,
            associated_tasks,
            affordance,
        };
        self.next_id = object.id + 1;
        self.objects.push(object.clone());
        Ok(Injection {
            available: object.has_tasks(),
            object,
        })
    }

    /// Replaces an object's pose. Returns the previous pose.
    ///
    /// Session-level rules (no retargeting once a proposal exists) are
    /// enforced by the caller.
    pub fn override_pose(&mut self, id: ObjectId, pose: Pose) -> Result<(Pose, SceneObject)> {
        let obj = self
            .objects
            .iter_mut()
            .find(|o| o.id == id)
            .ok_or_else(|| CoreError::UnknownObject(format!("object #{id}")))?;
        let old = obj.pose;
        obj.pose = pose;
        obj.pose_source = PoseSource::ManualOverride;
        Ok((old, obj.clone()))
    }

    /// Most recently injected object that offers assistance.
    pub fn latest_available(&self) -> Option<&SceneObject> {
        self.objects.iter().rev().find(|o| o.has_tasks())
    }

    /// Object offering assistance whose origin is nearest to `point`.
    ///
    /// Ties keep the earlier object.
    pub fn nearest_available(&self, point: &Vector3<f64>) -> Option<&SceneObject> {
        self.objects
            .iter()
            .filter(|o| o.has_tasks())
            .fold(None::<(&SceneObject, f64)>, |best, o| {
                let d = (o.pose.translation() - point).norm();
                match best {
                    Some((_, bd)) if bd <= d => best,
                    _ => Some((o, d)),
                }
            })
            .map(|(o, _)| o)
    }
}
