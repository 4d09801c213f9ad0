//! Affordance templates: object-centric waypoint and gripper sequences.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::pose::Pose;
use crate::trajectory::{ChannelKind, ChannelLayout};

pub const TEMPLATE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GripperCommand {
    Open,
    Close,
    Hold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub name: String,
    /// Channel group driven by this action, e.g. `right_hand`.
    pub end_effector: String,
    pub waypoints: Vec<Pose>,
    pub gripper: GripperCommand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffordanceTemplate {
    pub object_class: String,
    pub frame: String,
    pub grasp_point: Pose,
    pub actions: Vec<Action>,
}

/// A template registered at a world pose.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldPlan {
    pub object_class: String,
    pub grasp_point: Pose,
    pub actions: Vec<Action>,
}

impl AffordanceTemplate {
    pub fn validate(&self) -> Result<()> {
        if self.actions.is_empty() {
            return Err(CoreError::Schema(format!(
                "template {} has no actions",
                self.object_class
            )));
        }
        for a in &self.actions {
            if a.waypoints.is_empty() {
                return Err(CoreError::Schema(format!("action {} has no waypoints", a.name)));
            }
        }
        let finite = |p: &Pose| p.to_pose_vector().iter().all(|v| v.is_finite());
        if !finite(&self.grasp_point) || self.actions.iter().flat_map(|a| &a.waypoints).any(|p| !finite(p)) {
            return Err(CoreError::Schema("template pose is not finite".into()));
        }
        Ok(())
    }

    /// First action and its first waypoint, the hand-over point for blending.
    pub fn first_waypoint(&self) -> (&Action, &Pose) {
        let action = &self.actions[0];
        (action, &action.waypoints[0])
    }
}

/// Expresses every template pose in the frame that `object_pose` maps into.
pub fn register_template(at: &AffordanceTemplate, object_pose: &Pose) -> Result<WorldPlan> {
    at.validate()?;
    let q = object_pose.rotation().quaternion();
    if ((q.norm() - 1.0).abs() > 1e-9) || !object_pose.translation().iter().all(|v| v.is_finite()) {
        return Err(CoreError::NonRigid("object pose is not a rigid transform".into()));
    }
    Ok(WorldPlan {
        object_class: at.object_class.clone(),
        grasp_point: object_pose.compose(&at.grasp_point),
        actions: at
            .actions
            .iter()
            .map(|a| Action {
                waypoints: a.waypoints.iter().map(|w| object_pose.compose(w)).collect(),
                ..a.clone()
            })
            .collect(),
    })
}

impl WorldPlan {
    /// Inverse of [`register_template`].
    pub fn to_object_frame(&self, object_pose: &Pose, frame: &str) -> AffordanceTemplate {
        let inv = object_pose.inverse();
        AffordanceTemplate {
            object_class: self.object_class.clone(),
            frame: frame.to_string(),
            grasp_point: inv.compose(&self.grasp_point),
            actions: self
                .actions
                .iter()
                .map(|a| Action {
                    waypoints: a.waypoints.iter().map(|w| inv.compose(w)).collect(),
                    ..a.clone()
                })
                .collect(),
        }
    }
}

/// Writes `pose` into the channels of `group` inside a stacked vector.
///
/// Channels of other groups keep the values of `base`. The rotation vector is
/// unwrapped next to the value already in `base` so it stays continuous.
pub fn fill_group_pose(layout: &ChannelLayout, group: &str, pose: &Pose, base: &[f64]) -> Result<Vec<f64>> {
    let mut out = base.to_vec();
    let mut touched = false;
    if let Some((off, ch)) = layout.find(group, ChannelKind::Position) {
        if ch.dim == 3 {
            out[off..off + 3].copy_from_slice(pose.translation().as_slice());
            touched = true;
        }
    }
    if let Some((off, ch)) = layout.find(group, ChannelKind::Orientation) {
        if ch.dim == 3 {
            let near = Vector3::new(base[off], base[off + 1], base[off + 2]);
            let r = crate::pose::unwrap_rotation_vector(&pose.rotation().scaled_axis(), &near);
            out[off..off + 3].copy_from_slice(r.as_slice());
            touched = true;
        }
    }
    if !touched {
        return Err(CoreError::Schema(format!("no 3-D channels for end effector {group}")));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub length: String,
    pub angle: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            length: "m".into(),
            angle: "rad".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDocument {
    pub position: [f64; 3],
    pub rotation_vector: [f64; 3],
}

impl PoseDocument {
    fn to_pose(self) -> Result<Pose> {
        let v = self.position;
        let r = self.rotation_vector;
        Pose::from_pose_vector(&[v[0], v[1], v[2], r[0], r[1], r[2]])
    }

    fn from_pose(p: &Pose) -> Self {
        let v = p.to_pose_vector();
        Self {
            position: [v[0], v[1], v[2]],
            rotation_vector: [v[3], v[4], v[5]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDocument {
    pub name: String,
    pub end_effector: String,
    pub gripper: GripperCommand,
    pub waypoints: Vec<PoseDocument>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    Template,
    /// Explicit "no affordance" marker for tasks without manipulation.
    None,
}

/// On-disk form; `kind = "none"` files carry no grasp point or actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateDocument {
    pub version: u32,
    pub kind: TemplateKind,
    pub object_class: String,
    pub frame: String,
    #[serde(default)]
    pub units: Units,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasp_point: Option<PoseDocument>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<ActionDocument>,
}

impl TemplateDocument {
    pub fn none(object_class: &str) -> Self {
        Self {
            version: TEMPLATE_FORMAT_VERSION,
            kind: TemplateKind::None,
            object_class: object_class.into(),
            frame: object_class.into(),
            units: Units::default(),
            grasp_point: None,
            actions: Vec::new(),
        }
    }

    pub fn from_template(at: &AffordanceTemplate) -> Self {
        Self {
            version: TEMPLATE_FORMAT_VERSION,
            kind: TemplateKind::Template,
            object_class: at.object_class.clone(),
            frame: at.frame.clone(),
            units: Units::default(),
            grasp_point: Some(PoseDocument::from_pose(&at.grasp_point)),
            actions: at
                .actions
                .iter()
                .map(|a| ActionDocument {
                    name: a.name.clone(),
                    end_effector: a.end_effector.clone(),
                    gripper: a.gripper,
                    waypoints: a.waypoints.iter().map(PoseDocument::from_pose).collect(),
                })
                .collect(),
        }
    }

    /// `None` for the null template.
    pub fn into_template(self) -> Result<Option<AffordanceTemplate>> {
        if self.version != TEMPLATE_FORMAT_VERSION {
            return Err(CoreError::Version {
                found: self.version,
                supported: TEMPLATE_FORMAT_VERSION,
            });
        }
        if self.units.length != "m" || self.units.angle != "rad" {
            return Err(CoreError::field(
                "units",
                format!("expected m/rad, found {}/{}", self.units.length, self.units.angle),
            ));
        }
        match self.kind {
            TemplateKind::None => {
                if self.grasp_point.is_some() || !self.actions.is_empty() {
                    return Err(CoreError::field("kind", "null template must not define poses"));
                }
                Ok(None)
            }
            TemplateKind::Template => {
                let grasp = self
                    .grasp_point
                    .ok_or_else(|| CoreError::field("grasp_point", "missing"))?
                    .to_pose()
                    .map_err(|e| CoreError::field("grasp_point", e.to_string()))?;
                let mut actions = Vec::with_capacity(self.actions.len());
                for (i, a) in self.actions.into_iter().enumerate() {
                    let waypoints = a
                        .waypoints
                        .iter()
                        .enumerate()
                        .map(|(j, w)| {
                            w.to_pose()
                                .map_err(|e| CoreError::field(format!("actions[{i}].waypoints[{j}]"), e.to_string()))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    actions.push(Action {
                        name: a.name,
                        end_effector: a.end_effector,
                        waypoints,
                        gripper: a.gripper,
                    });
                }
                let at = AffordanceTemplate {
                    object_class: self.object_class,
                    frame: self.frame,
                    grasp_point: grasp,
                    actions,
                };
                at.validate()?;
                Ok(Some(at))
            }
        }
    }
}

pub fn template_from_json(text: &str) -> Result<Option<AffordanceTemplate>> {
    let doc: TemplateDocument = serde_json::from_str(text).map_err(|e| CoreError::json("template", e))?;
    doc.into_template()
}

pub fn template_to_json(at: &AffordanceTemplate) -> String {
    serde_json::to_string_pretty(&TemplateDocument::from_template(at)).expect("template serializes")
}

pub fn load_template(path: &Path) -> Result<Option<AffordanceTemplate>> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    template_from_json(&text)
}

pub fn save_template(at: &AffordanceTemplate, path: &Path) -> Result<()> {
    std::fs::write(path, template_to_json(at)).map_err(|e| CoreError::io(path, e))
}

/// Door handle template: reach, grasp, turn, push, in the handle frame.
///
/// The handle frame has +x pointing out of the door towards the operator and
/// +y along the handle lever.
pub fn door_handle_template() -> AffordanceTemplate {
    let pose = |v: [f64; 6]| Pose::from_pose_vector(&v).expect("finite pose");
    let approach = pose([0.05, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let at_handle = pose([0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let turned = pose([0.0, 0.0, -0.03, 0.6, 0.0, 0.0]);
    let pushed = pose([-0.10, 0.0, -0.03, 0.6, 0.0, 0.0]);
    let hand = "right_hand".to_string();
    AffordanceTemplate {
        object_class: "door".into(),
        frame: "door_handle".into(),
        grasp_point: approach,
        actions: vec![
            Action {
                name: "reach".into(),
                end_effector: hand.clone(),
                waypoints: vec![approach, at_handle],
                gripper: GripperCommand::Open,
            },
            Action {
                name: "grasp".into(),
                end_effector: hand.clone(),
                waypoints: vec![at_handle],
                gripper: GripperCommand::Close,
            },
            Action {
                name: "turn".into(),
                end_effector: hand.clone(),
                waypoints: vec![turned],
                gripper: GripperCommand::Hold,
            },
            Action {
                name: "push".into(),
                end_effector: hand,
                waypoints: vec![pushed],
                gripper: GripperCommand::Hold,
            },
        ],
    }
}
