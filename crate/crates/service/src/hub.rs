//! Single command stream into the scene and the session.
//!
//! The hub is synchronous and deterministic: the same command sequence
//! always yields the same replies and events. Transport, clocks and
//! recording live outside it.

use serde_json::Value;

use teleassist_core::config::AssistConfig;
use teleassist_core::pose::Pose;
use teleassist_core::scene::{Scene, TaskRegistry};
use teleassist_core::session::{AssistSession, SessionEvent};
use teleassist_core::trajectory::Sample;
use teleassist_core::CoreError;

use crate::config::ServiceConfig;
use crate::protocol::{error_code, ClassInfo, Command, ErrorBody, Reply, ServiceEvent, Snapshot};

/// Reply and events produced by one command, in emission order.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub reply: Reply,
    pub events: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HubLimits {
    pub max_observation_rate: f64,
    pub telemetry_rate: f64,
}

impl Default for HubLimits {
    fn default() -> Self {
        Self {
            max_observation_rate: 50.0,
            telemetry_rate: 50.0,
        }
    }
}

pub struct Hub {
    scene: Scene,
    config: AssistConfig,
    limits: HubLimits,
    session: AssistSession,
    last_fed: Option<f64>,
    dropped: u64,
    /// Simulated seconds since the last follower telemetry event.
    since_telemetry: f64,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("event serializes")
}

fn session_values(events: Vec<SessionEvent>, out: &mut Vec<Value>) {
    out.extend(events.iter().map(to_value));
}

impl Hub {
    pub fn new(registry: TaskRegistry, config: AssistConfig, limits: HubLimits) -> Self {
        Self {
            scene: Scene::new(registry),
            session: AssistSession::new(1, config.clone()),
            config,
            limits,
            last_fed: None,
            dropped: 0,
            since_telemetry: f64::INFINITY,
        }
    }

    pub fn from_config(config: &ServiceConfig) -> Result<Self, crate::ServiceError> {
        Ok(Self::new(
            config.registry()?,
            config.assist.clone(),
            HubLimits {
                max_observation_rate: config.server.max_observation_rate,
                telemetry_rate: config.server.telemetry_rate,
            },
        ))
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn session(&self) -> &AssistSession {
        &self.session
    }

    pub fn dropped_observations(&self) -> u64 {
        self.dropped
    }

    pub fn snapshot(&self) -> Snapshot {
        let registry = self.scene.registry();
        let classes = registry
            .classes()
            .map(|c| ClassInfo {
                object_class: c.to_string(),
                tasks: registry
                    .tasks_for(c)
                    .map(|ps| ps.iter().map(|p| p.task_label.clone()).collect())
                    .unwrap_or_default(),
                has_affordance: registry.affordance_for(c).is_some(),
            })
            .collect();
        Snapshot {
            session: self.session.snapshot(),
            objects: self.scene.objects().to_vec(),
            classes,
            dropped_observations: self.dropped,
        }
    }

    pub fn snapshot_event(&self) -> Value {
        to_value(&ServiceEvent::Snapshot(Box::new(self.snapshot())))
    }

    /// Parses and applies a raw command payload.
    pub fn apply_value(&mut self, payload: &Value) -> Outcome {
        match serde_json::from_value::<Command>(payload.clone()) {
            Ok(cmd) => self.apply(&cmd),
            Err(e) => {
                let command = payload.get("type").and_then(Value::as_str).map(str::to_string);
                Outcome {
                    reply: self.reply_err(command, "malformed", e.to_string()),
                    events: Vec::new(),
                }
            }
        }
    }

    pub fn apply(&mut self, cmd: &Command) -> Outcome {
        let mut events = Vec::new();
        if cmd.drives_lifecycle() && self.session.state().is_terminal() {
            self.start_session(&mut events);
        }
        match self.dispatch(cmd, &mut events) {
            Ok(result) => Outcome {
                reply: Reply {
                    ok: true,
                    command: Some(cmd.name().to_string()),
                    state: self.session.state(),
                    session_id: self.session.id(),
                    result,
                    error: None,
                },
                events,
            },
            Err(e) => Outcome {
                reply: self.reply_err(Some(cmd.name().to_string()), error_code(&e), e.to_string()),
                events,
            },
        }
    }

    fn reply_err(&self, command: Option<String>, code: &str, message: String) -> Reply {
        Reply {
            ok: false,
            command,
            state: self.session.state(),
            session_id: self.session.id(),
            result: None,
            error: Some(ErrorBody {
                code: code.to_string(),
                message,
            }),
        }
    }

    fn start_session(&mut self, events: &mut Vec<Value>) {
        let id = self.session.id() + 1;
        self.session = AssistSession::new(id, self.config.clone());
        self.last_fed = None;
        self.since_telemetry = f64::INFINITY;
        events.push(to_value(&ServiceEvent::SessionStarted { session_id: id }));
        if let Some(obj) = self.scene.latest_available() {
            let offered = self.session.offer(obj);
            session_values(offered, events);
        }
    }

    fn dispatch(&mut self, cmd: &Command, events: &mut Vec<Value>) -> Result<Option<Value>, CoreError> {
        match cmd {
            Command::InjectDetection { object_class, pose } => {
                let pose = Pose::try_from(*pose)?;
                let injection = self.scene.inject_detection(object_class, pose)?;
                events.push(to_value(&ServiceEvent::ObjectAdded {
                    object: injection.object.clone(),
                }));
                let offered = self.session.offer(&injection.object);
                session_values(offered, events);
                Ok(Some(serde_json::json!({
                    "object_id": injection.object.id,
                    "available": injection.available,
                })))
            }
            Command::OverridePose { object_id, pose } => {
                let pose = Pose::try_from(*pose)?;
                self.scene.object(*object_id)?;
                self.session.guard_override(*object_id)?;
                let (old, object) = self.scene.override_pose(*object_id, pose)?;
                events.push(to_value(&ServiceEvent::ObjectUpdated { object }));
                let moved = self.session.retarget(*object_id, &old, &pose);
                session_values(moved, events);
                Ok(None)
            }
            Command::Activate => {
                let out = self.session.activate(&self.scene)?;
                session_values(out, events);
                Ok(None)
            }
            Command::FeedObservation { t, values } => {
                if !teleassist_core::session::command_allowed("feed_observation", self.session.state()) {
                    return Err(CoreError::IllegalTransition {
                        state: self.session.state(),
                        command: "feed_observation",
                    });
                }
                if let Some(last) = self.last_fed {
                    if *t > last && t - last < 1.0 / self.limits.max_observation_rate - 1e-9 {
                        self.dropped += 1;
                        return Ok(Some(serde_json::json!({
                            "accepted": false,
                            "dropped_observations": self.dropped,
                        })));
                    }
                }
                let out = self
                    .session
                    .feed_observation(&self.scene, Sample::new(*t, values.clone()))?;
                self.last_fed = Some(*t);
                session_values(out, events);
                Ok(Some(serde_json::json!({
                    "accepted": true,
                    "dropped_observations": self.dropped,
                })))
            }
            Command::Respond { verdict } => {
                let out = self.session.respond(*verdict)?;
                session_values(out, events);
                Ok(None)
            }
            Command::Advance { delta } => {
                let out = self.session.advance(*delta)?;
                session_values(out, events);
                Ok(Some(serde_json::json!({ "cursor": self.session.cursor() })))
            }
            Command::StepFollower { dt } => {
                let out = self.session.step_follower(*dt)?;
                self.since_telemetry += dt;
                let emit = self.since_telemetry + 1e-12 >= 1.0 / self.limits.telemetry_rate;
                for e in out {
                    if e.is_telemetry() {
                        if !emit {
                            continue;
                        }
                        self.since_telemetry = 0.0;
                    }
                    events.push(to_value(&e));
                }
                Ok(None)
            }
            Command::Abort => {
                let out = self.session.abort()?;
                session_values(out, events);
                Ok(None)
            }
            Command::Snapshot => Ok(Some(to_value(&self.snapshot()))),
        }
    }
}
