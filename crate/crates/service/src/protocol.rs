//! Wire schema shared by the websocket, the HTTP routes and the event log.
//!
//! Every message is an [`Envelope`] holding a JSON payload tagged by `type`.
//!
//! Commands (`kind: "command"`):
//!
//! | type               | fields                                              |
//! |--------------------|-----------------------------------------------------|
//! | `inject_detection` | `object_class`, `pose {position, quaternion[w,x,y,z]}` |
//! | `override_pose`    | `object_id`, `pose`                                 |
//! | `activate`         |                                                     |
//! | `feed_observation` | `t` (s), `values` (stacked, world frame)            |
//! | `respond`          | `verdict`: `accept` or `reject`                     |
//! | `advance`          | `delta` (fraction of the reference, ≥ 0)            |
//! | `step_follower`    | `dt` (s, > 0)                                       |
//! | `abort`            |                                                     |
//! | `snapshot`         |                                                     |
//!
//! Every command gets exactly one reply (`kind: "reply"`, `reply_to` = the
//! command's `seq`) shaped like [`Reply`], sent after the events it caused.
//! Events (`kind: "event"`) are the session events (`state_changed`,
//! `assistance_available`, `onset_detected`, `proposal_ready`, `progress`,
//! `follower_telemetry`, `deviation_warning`, `gripper`, `retargeted`) plus
//! `snapshot`, `session_started`, `object_added` and `object_updated`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use teleassist_core::pose::WirePose;
use teleassist_core::scene::{ObjectId, SceneObject};
use teleassist_core::session::{SessionSnapshot, SessionState, Verdict};
use teleassist_core::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Event,
    Command,
    Reply,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// Monotonic per connection and direction.
    pub seq: u64,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to: Option<u64>,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    InjectDetection { object_class: String, pose: WirePose },
    OverridePose { object_id: ObjectId, pose: WirePose },
    Activate,
    FeedObservation { t: f64, values: Vec<f64> },
    Respond { verdict: Verdict },
    Advance { delta: f64 },
    StepFollower { dt: f64 },
    Abort,
    Snapshot,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::InjectDetection { .. } => "inject_detection",
            Command::OverridePose { .. } => "override_pose",
            Command::Activate => "activate",
            Command::FeedObservation { .. } => "feed_observation",
            Command::Respond { .. } => "respond",
            Command::Advance { .. } => "advance",
            Command::StepFollower { .. } => "step_follower",
            Command::Abort => "abort",
            Command::Snapshot => "snapshot",
        }
    }

    /// Commands that start a fresh session when the current one has ended.
    pub fn drives_lifecycle(&self) -> bool {
        !matches!(self, Command::Snapshot | Command::StepFollower { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub ok: bool,
    /// Offending or acknowledged command; `null` when the payload did not parse.
    pub command: Option<String>,
    /// Session state after the command.
    pub state: SessionState,
    pub session_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

pub fn error_code(e: &CoreError) -> &'static str {
    match e {
        CoreError::DegenerateInput(_) => "degenerate_input",
        CoreError::InvalidTrajectory(_) => "invalid_trajectory",
        CoreError::Schema(_) => "schema",
        CoreError::Singular(_) => "singular",
        CoreError::InvalidArgument(_) => "invalid_argument",
        CoreError::NoContext => "no_context",
        CoreError::InsufficientObservation { .. } => "insufficient_observation",
        CoreError::Constraint(_) => "constraint",
        CoreError::NonRigid(_) => "non_rigid",
        CoreError::UnknownObject(_) => "unknown_object",
        CoreError::IllegalTransition { .. } => "illegal_transition",
        CoreError::ActiveExecution(_) => "active_execution",
        CoreError::Parse { .. } => "parse",
        CoreError::Version { .. } => "version",
        CoreError::Io { .. } => "io",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassInfo {
    pub object_class: String,
    pub tasks: Vec<String>,
    pub has_affordance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub session: SessionSnapshot,
    pub objects: Vec<SceneObject>,
    pub classes: Vec<ClassInfo>,
    pub dropped_observations: u64,
}

/// Events produced by the service itself rather than the session.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServiceEvent {
    Snapshot(Box<Snapshot>),
    SessionStarted { session_id: u64 },
    ObjectAdded { object: SceneObject },
    ObjectUpdated { object: SceneObject },
}

pub fn event_envelope(seq: u64, payload: Value) -> Envelope {
    Envelope {
        seq,
        kind: Kind::Event,
        reply_to: None,
        payload,
    }
}

pub fn reply_envelope(seq: u64, reply_to: Option<u64>, reply: &Reply) -> Envelope {
    Envelope {
        seq,
        kind: Kind::Reply,
        reply_to,
        payload: serde_json::to_value(reply).expect("reply serializes"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn commands_parse_from_tagged_json() {
        let c: Command = serde_json::from_value(json!({"type": "advance", "delta": 0.1})).unwrap();
        assert_eq!(c, Command::Advance { delta: 0.1 });
        let c: Command = serde_json::from_value(json!({"type": "respond", "verdict": "accept"})).unwrap();
        assert_eq!(c.name(), "respond");
        let c: Command = serde_json::from_value(json!({
            "type": "inject_detection",
            "object_class": "door",
            "pose": {"position": [1.0, 0.0, 0.5], "quaternion": [1.0, 0.0, 0.0, 0.0]}
        }))
        .unwrap();
        assert_eq!(c.name(), "inject_detection");
        assert!(serde_json::from_value::<Command>(json!({"type": "fly"})).is_err());
        assert!(serde_json::from_value::<Command>(json!({"type": "advance"})).is_err());
    }

    #[test]
    fn envelope_round_trip() {
        let e = Envelope {
            seq: 4,
            kind: Kind::Command,
            reply_to: None,
            payload: json!({"type": "activate"}),
        };
        let text = serde_json::to_string(&e).unwrap();
        assert!(!text.contains("reply_to"));
        assert_eq!(serde_json::from_str::<Envelope>(&text).unwrap(), e);
    }
}
