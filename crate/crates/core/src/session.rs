//! One operator episode: availability, generation, validation, execution.
//!
//! Every entry point checks the current state first and answers with
//! [`CoreError::IllegalTransition`] when the command does not apply, leaving
//! the session untouched.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::affordance::{fill_group_pose, register_template, GripperCommand};
use crate::blend::{blend, solve_blend_profile};
use crate::config::AssistConfig;
use crate::error::{CoreError, Result};
use crate::follower::{Follower, FollowerConfig, GroupDeviation};
use crate::pose::Pose;
use crate::promp::{ConditionReport, ObservationPoint, ProMP};
use crate::recognition::{recognize, ObservationBuffer, OnsetDetector, RecognitionResult};
use crate::scene::{ObjectId, Scene, SceneObject};
use crate::trajectory::{ChannelKind, ChannelLayout, Sample, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionState {
    Idle,
    PreActivation,
    Generation,
    Validation,
    Executing,
    Paused,
    Completed,
    Aborted,
}

impl SessionState {
    pub const ALL: [SessionState; 8] = [
        SessionState::Idle,
        SessionState::PreActivation,
        SessionState::Generation,
        SessionState::Validation,
        SessionState::Executing,
        SessionState::Paused,
        SessionState::Completed,
        SessionState::Aborted,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, SessionState::Completed | SessionState::Aborted)
    }

    /// A proposal exists and is tied to the target object's pose.
    pub fn has_proposal(self) -> bool {
        matches!(
            self,
            SessionState::Validation | SessionState::Executing | SessionState::Paused
        )
    }
}

/// Every transition the session may take.
pub const TRANSITIONS: &[(SessionState, SessionState)] = {
    use SessionState::*;
    &[
        (Idle, PreActivation),
        (PreActivation, Generation),
        (Generation, Validation),
        (Validation, Executing),
        (Validation, Generation),
        (Executing, Paused),
        (Paused, Executing),
        (Executing, Completed),
        (Idle, Aborted),
        (PreActivation, Aborted),
        (Generation, Aborted),
        (Validation, Aborted),
        (Executing, Aborted),
        (Paused, Aborted),
    ]
};

pub fn is_declared(from: SessionState, to: SessionState) -> bool {
    TRANSITIONS.contains(&(from, to))
}

/// States in which a session command is accepted.
pub fn command_allowed(command: &str, state: SessionState) -> bool {
    use SessionState::*;
    match command {
        "activate" => state == PreActivation,
        "feed_observation" => matches!(state, Generation | Validation),
        "respond" => state == Validation,
        "advance" => matches!(state, Executing | Paused),
        "abort" => !state.is_terminal(),
        "step_follower" => true,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

/// The trajectory offered to the operator for validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Proposal {
    pub object_id: ObjectId,
    pub object_class: String,
    pub recognition: RecognitionResult,
    /// Reference in the world frame, blended into the template when one exists.
    pub reference: Trajectory,
    /// Per sample, per channel: square root of the summed posterior variances.
    pub spread: Vec<Vec<f64>>,
    /// First sample of the blend window.
    pub blend_start_index: Option<usize>,
    /// Gripper command of the template's first action.
    pub gripper: Option<(String, GripperCommand)>,
    pub report: ConditionReport,
    #[serde(skip)]
    pub conditioned: ProMP,
}

impl Proposal {
    /// Linear interpolation of the reference at a fraction of its length.
    ///
    /// `cursor = 1` returns the last sample exactly.
    pub fn reference_at(&self, cursor: f64) -> Vec<f64> {
        let samples = &self.reference.samples;
        let last = samples.len() - 1;
        let x = cursor.clamp(0.0, 1.0) * last as f64;
        let i = x.floor() as usize;
        if i >= last {
            return samples[last].values.clone();
        }
        let frac = x - i as f64;
        if frac == 0.0 {
            return samples[i].values.clone();
        }
        samples[i]
            .values
            .iter()
            .zip(&samples[i + 1].values)
            .map(|(a, b)| a + frac * (b - a))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    StateChanged {
        from: SessionState,
        to: SessionState,
    },
    AssistanceAvailable {
        object_id: ObjectId,
        object_class: String,
        tasks: Vec<String>,
    },
    OnsetDetected {
        t: f64,
        object_id: ObjectId,
    },
    ProposalReady {
        proposal: Box<Proposal>,
    },
    Progress {
        cursor: f64,
        commanded: Vec<f64>,
    },
    FollowerTelemetry {
        commanded: Vec<f64>,
        actual: Vec<f64>,
        deviation: Vec<GroupDeviation>,
    },
    DeviationWarning {
        group: String,
        position: f64,
        orientation: f64,
    },
    Gripper {
        action: String,
        command: GripperCommand,
    },
    Retargeted {
        object_id: ObjectId,
    },
}

impl SessionEvent {
    /// High-rate events that may be decimated on the way out.
    pub fn is_telemetry(&self) -> bool {
        matches!(self, SessionEvent::FollowerTelemetry { .. })
    }
}

/// Serializable view of a session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSnapshot {
    pub id: u64,
    pub state: SessionState,
    pub target: Option<ObjectId>,
    pub observations: usize,
    pub cursor: f64,
    pub proposal: Option<Proposal>,
    pub commanded: Option<Vec<f64>>,
    pub actual: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct AssistSession {
    id: u64,
    config: AssistConfig,
    state: SessionState,
    target: Option<ObjectId>,
    layout: Option<ChannelLayout>,
    onset: Option<OnsetDetector>,
    buffer: ObservationBuffer,
    onset_world: Option<Vec<f64>>,
    last_t: Option<f64>,
    proposal: Option<Proposal>,
    cursor: f64,
    follower: Option<Follower>,
}

impl AssistSession {
    pub fn new(id: u64, config: AssistConfig) -> Self {
        Self {
            id,
            config,
            state: SessionState::Idle,
            target: None,
            layout: None,
            onset: None,
            buffer: ObservationBuffer::new(),
            onset_world: None,
            last_t: None,
            proposal: None,
            cursor: 0.0,
            follower: None,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn target(&self) -> Option<ObjectId> {
        self.target
    }

    pub fn cursor(&self) -> f64 {
        self.cursor
    }

    pub fn proposal(&self) -> Option<&Proposal> {
        self.proposal.as_ref()
    }

    pub fn follower(&self) -> Option<&Follower> {
        self.follower.as_ref()
    }

    pub fn buffer(&self) -> &ObservationBuffer {
        &self.buffer
    }

    pub fn config(&self) -> &AssistConfig {
        &self.config
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id,
            state: self.state,
            target: self.target,
            observations: self.buffer.len(),
            cursor: self.cursor,
            proposal: self.proposal.clone(),
            commanded: self.follower.as_ref().map(|f| f.commanded().to_vec()),
            actual: self.follower.as_ref().map(|f| f.actual().to_vec()),
        }
    }

    fn go(&mut self, to: SessionState, events: &mut Vec<SessionEvent>) {
        let from = self.state;
        assert!(is_declared(from, to), "undeclared transition {from:?} -> {to:?}");
        self.state = to;
        events.push(SessionEvent::StateChanged { from, to });
    }

    fn require(&self, command: &'static str) -> Result<()> {
        if command_allowed(command, self.state) {
            Ok(())
        } else {
            Err(CoreError::IllegalTransition {
                state: self.state,
                command,
            })
        }
    }

    /// Offers assistance for `object` if the session is idle.
    ///
    /// Returns no events when the session is busy or the object has no tasks.
    pub fn offer(&mut self, object: &SceneObject) -> Vec<SessionEvent> {
        let mut events = Vec::new();
        if self.state != SessionState::Idle || !object.has_tasks() {
            return events;
        }
        self.target = Some(object.id);
        events.push(SessionEvent::AssistanceAvailable {
            object_id: object.id,
            object_class: object.object_class.clone(),
            tasks: object.associated_tasks.clone(),
        });
        self.go(SessionState::PreActivation, &mut events);
        events
    }

    pub fn activate(&mut self, scene: &Scene) -> Result<Vec<SessionEvent>> {
        self.require("activate")?;
        let id = self.target.ok_or(CoreError::NoContext)?;
        let object = scene.object(id)?;
        let first = scene
            .tasks_for(&object.object_class)?
            .first()
            .ok_or(CoreError::NoContext)?;
        let layout = first.channels.clone();
        self.onset = Some(OnsetDetector::new(
            &layout,
            self.config.onset_threshold,
            &self.config.onset_channels,
        )?);
        self.layout = Some(layout);
        self.buffer.clear();
        self.onset_world = None;
        let mut events = Vec::new();
        self.go(SessionState::Generation, &mut events);
        Ok(events)
    }

    /// Feeds one world-frame operator sample.
    ///
    /// Samples arriving while a proposal awaits validation are ignored.
    pub fn feed_observation(&mut self, scene: &Scene, sample: Sample) -> Result<Vec<SessionEvent>> {
        self.require("feed_observation")?;
        if self.state == SessionState::Validation {
            return Ok(Vec::new());
        }
        let layout = self.layout.clone().ok_or(CoreError::NoContext)?;
        if sample.values.len() != layout.dim() {
            return Err(CoreError::Schema(format!(
                "observation has {} values, expected {}",
                sample.values.len(),
                layout.dim()
            )));
        }
        if !sample.t.is_finite() || sample.values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidArgument("observation is not finite".into()));
        }
        if let Some(last) = self.last_t {
            if sample.t <= last {
                return Err(CoreError::InvalidTrajectory(format!(
                    "observation at t = {} does not follow t = {last}",
                    sample.t
                )));
            }
        }
        self.last_t = Some(sample.t);

        let mut events = Vec::new();
        if !self.buffer.started() {
            let detector = self.onset.as_mut().ok_or(CoreError::NoContext)?;
            let Some(start) = detector.push(&sample) else {
                return Ok(events);
            };
            self.pick_target(scene, &layout, &start)?;
            let object = scene.object(self.target.ok_or(CoreError::NoContext)?)?;
            let to_object = object.pose.inverse();
            let first = to_object.transform_values(&layout, &start.values, None);
            let second = to_object.transform_values(&layout, &sample.values, Some(&first));
            self.buffer.start(start.t);
            self.buffer.push(Sample::new(start.t, first))?;
            self.buffer.push(Sample::new(sample.t, second))?;
            self.onset_world = Some(start.values.clone());
            events.push(SessionEvent::OnsetDetected {
                t: start.t,
                object_id: object.id,
            });
        } else {
            let object = scene.object(self.target.ok_or(CoreError::NoContext)?)?;
            let near = self.buffer.points().last().map(|p| p.values.clone());
            let local = object
                .pose
                .inverse()
                .transform_values(&layout, &sample.values, near.as_deref());
            self.buffer.push(Sample::new(sample.t, local))?;
        }

        let object = scene.object(self.target.ok_or(CoreError::NoContext)?)?;
        let candidates = scene.tasks_for(&object.object_class)?;
        let shortest = candidates.iter().map(|c| c.mean_duration).fold(f64::INFINITY, f64::min);
        if self.buffer.span() + 1e-9 >= self.config.window_fraction * shortest {
            let proposal = self.build_proposal(scene)?;
            events.push(SessionEvent::ProposalReady {
                proposal: Box::new(proposal.clone()),
            });
            self.proposal = Some(proposal);
            self.go(SessionState::Validation, &mut events);
        }
        Ok(events)
    }

    /// Among objects of the activated class, the one nearest the end effector.
    fn pick_target(&mut self, scene: &Scene, layout: &ChannelLayout, at: &Sample) -> Result<()> {
        let current = scene.object(self.target.ok_or(CoreError::NoContext)?)?;
        let Some((off, _)) = layout
            .slices()
            .find(|(_, c)| c.kind == ChannelKind::Position && c.dim == 3)
        else {
            return Ok(());
        };
        let hand = Vector3::new(at.values[off], at.values[off + 1], at.values[off + 2]);
        let nearest = scene
            .objects()
            .iter()
            .filter(|o| o.object_class == current.object_class)
            .fold(None::<(&SceneObject, f64)>, |best, o| {
                let d = (o.pose.translation() - hand).norm();
                match best {
                    Some((_, bd)) if bd <= d => best,
                    _ => Some((o, d)),
                }
            });
        if let Some((o, _)) = nearest {
            self.target = Some(o.id);
        }
        Ok(())
    }

    fn build_proposal(&self, scene: &Scene) -> Result<Proposal> {
        let object = scene.object(self.target.ok_or(CoreError::NoContext)?)?;
        let candidates = scene.tasks_for(&object.object_class)?;
        let recognition = recognize(&self.buffer, candidates, &self.config.recognition())?;
        let promp = &candidates[recognition.task_index];
        let layout = &promp.channels;
        let onset = self.buffer.onset_time().ok_or(CoreError::NoContext)?;
        let noise = self.config.observation_noise;

        let mut obs: Vec<ObservationPoint> = self
            .buffer
            .points()
            .iter()
            .map(|p| {
                let phase = ((p.t - onset) / promp.mean_duration).clamp(0.0, 1.0);
                ObservationPoint::isotropic(phase, p.values.clone(), noise)
            })
            .collect();
        let template = scene.registry().affordance_for(&object.object_class);
        let prior_end = promp.mean_at(1.0);
        let terminal = match template {
            Some(at) => {
                let (action, wp) = at.first_waypoint();
                fill_group_pose(layout, &action.end_effector, wp, prior_end.as_slice())?
            }
            None => prior_end.as_slice().to_vec(),
        };
        obs.push(ObservationPoint::isotropic(1.0, terminal, noise));
        let (conditioned, report) = promp.condition_with_report(&obs)?;

        let duration = promp.mean_duration * self.config.duration_scale;
        let n = ((duration * self.config.sample_rate).round() as usize + 1).max(2);
        let local = conditioned.mean_trajectory(n, duration)?;
        let mut samples: Vec<Sample> = Vec::with_capacity(n);
        for s in &local.samples {
            let near = samples.last().map(|p| p.values.clone());
            let values = object.pose.transform_values(layout, &s.values, near.as_deref());
            samples.push(Sample::new(s.t, values));
        }
        let offsets = layout.offsets();
        let spread = (0..n)
            .map(|i| {
                let var = conditioned.variance_at(i as f64 / (n - 1) as f64);
                layout
                    .channels()
                    .iter()
                    .zip(&offsets)
                    .map(|(ch, &off)| (off..off + ch.dim).map(|j| var[j].max(0.0)).sum::<f64>().sqrt())
                    .collect()
            })
            .collect();

        let mut blend_start_index = None;
        let mut gripper = None;
        if let Some(at) = template {
            let plan = register_template(at, &object.pose)?;
            let action = &plan.actions[0];
            let n_b = ((self.config.blend_fraction * n as f64).round() as usize).clamp(1, n - 1);
            let start = n - 1 - n_b;
            let tail = Trajectory::new(layout.clone(), "world", samples[start..].to_vec())?;
            let last = &tail.samples[n_b].values;
            let target = fill_group_pose(layout, &action.end_effector, &action.waypoints[0], last)?;
            let profile = solve_blend_profile(self.config.blend_target, n_b)?;
            let blended = blend(&tail, &target, &profile)?;
            samples.splice(start.., blended.samples);
            blend_start_index = Some(start);
            gripper = Some((action.name.clone(), action.gripper));
        }
        let reference = Trajectory::new(layout.clone(), "world", samples)?;
        Ok(Proposal {
            object_id: object.id,
            object_class: object.object_class.clone(),
            recognition,
            reference,
            spread,
            blend_start_index,
            gripper,
            report,
            conditioned,
        })
    }

    pub fn respond(&mut self, verdict: Verdict) -> Result<Vec<SessionEvent>> {
        self.require("respond")?;
        let mut events = Vec::new();
        match verdict {
            Verdict::Accept => {
                let proposal = self.proposal.as_ref().ok_or(CoreError::NoContext)?;
                let layout = proposal.reference.channels.clone();
                let start = proposal.reference.samples[0].values.clone();
                let actual = self.onset_world.clone().unwrap_or_else(|| start.clone());
                let config = FollowerConfig {
                    tau: self.config.follower_tau,
                    position_bound: self.config.deviation_position,
                    orientation_bound: self.config.deviation_orientation,
                };
                let mut follower = Follower::new(layout, config, actual)?;
                follower.command(start.clone())?;
                self.follower = Some(follower);
                self.cursor = 0.0;
                self.go(SessionState::Executing, &mut events);
                events.push(SessionEvent::Progress {
                    cursor: 0.0,
                    commanded: start,
                });
            }
            Verdict::Reject => {
                self.proposal = None;
                self.buffer.clear();
                self.onset_world = None;
                if let Some(d) = self.onset.as_mut() {
                    d.reset();
                }
                self.go(SessionState::Generation, &mut events);
            }
        }
        Ok(events)
    }

    /// Moves the execution cursor forward by `delta` (a fraction of the
    /// reference). Zero pauses; a positive step resumes a paused session.
    pub fn advance(&mut self, delta: f64) -> Result<Vec<SessionEvent>> {
        self.require("advance")?;
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "advance by {delta}: the cursor only moves forward"
            )));
        }
        let mut events = Vec::new();
        if delta == 0.0 {
            if self.state == SessionState::Executing {
                self.go(SessionState::Paused, &mut events);
            }
            return Ok(events);
        }
        if self.state == SessionState::Paused {
            self.go(SessionState::Executing, &mut events);
        }
        let proposal = self.proposal.as_ref().ok_or(CoreError::NoContext)?;
        self.cursor = (self.cursor + delta).min(1.0);
        let commanded = proposal.reference_at(self.cursor);
        let gripper = proposal.gripper.clone();
        if let Some(f) = self.follower.as_mut() {
            f.command(commanded.clone())?;
        }
        events.push(SessionEvent::Progress {
            cursor: self.cursor,
            commanded,
        });
        if self.cursor >= 1.0 {
            self.go(SessionState::Completed, &mut events);
            if let Some((action, command)) = gripper {
                events.push(SessionEvent::Gripper { action, command });
            }
        }
        Ok(events)
    }

    pub fn step_follower(&mut self, dt: f64) -> Result<Vec<SessionEvent>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "follower step dt = {dt} must be positive"
            )));
        }
        let Some(f) = self.follower.as_mut() else {
            return Ok(Vec::new());
        };
        let deviation = f.step(dt)?;
        let mut events: Vec<SessionEvent> = deviation
            .iter()
            .filter(|d| d.exceeded)
            .map(|d| SessionEvent::DeviationWarning {
                group: d.group.clone(),
                position: d.position,
                orientation: d.orientation,
            })
            .collect();
        events.insert(
            0,
            SessionEvent::FollowerTelemetry {
                commanded: f.commanded().to_vec(),
                actual: f.actual().to_vec(),
                deviation,
            },
        );
        Ok(events)
    }

    pub fn abort(&mut self) -> Result<Vec<SessionEvent>> {
        self.require("abort")?;
        if let Some(f) = self.follower.as_mut() {
            f.freeze();
        }
        self.buffer.clear();
        let mut events = Vec::new();
        self.go(SessionState::Aborted, &mut events);
        Ok(events)
    }

    /// Rejects an override of the target object once a proposal exists.
    pub fn guard_override(&self, id: ObjectId) -> Result<()> {
        if self.target == Some(id) && self.state.has_proposal() {
            return Err(CoreError::ActiveExecution(format!(
                "object #{id} is the target of a session in state {:?}",
                self.state
            )));
        }
        Ok(())
    }

    /// Re-expresses buffered observations after the target moved.
    pub fn retarget(&mut self, id: ObjectId, old: &Pose, new: &Pose) -> Vec<SessionEvent> {
        if self.target != Some(id) || self.state.has_proposal() || self.state.is_terminal() {
            return Vec::new();
        }
        if let Some(layout) = self.layout.clone() {
            let to_new = new.inverse().compose(old);
            self.buffer
                .map_values(|v, prev| to_new.transform_values(&layout, v, prev));
        }
        vec![SessionEvent::Retargeted { object_id: id }]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affordance::door_handle_template;
    use crate::basis::BasisConfig;
    use crate::promp::fit_promp;
    use crate::scene::TaskRegistry;
    use crate::trajectory::Channel;

    fn layout() -> ChannelLayout {
        ChannelLayout::new(vec![
            Channel::position("right_hand"),
            Channel::orientation("right_hand"),
        ])
    }

    /// Straight reach from `start` to the approach point over `duration` s.
    fn reach(start: [f64; 3], duration: f64) -> Trajectory {
        let n = (duration * 50.0).round() as usize + 1;
        let samples = (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                let b = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
                let p: Vec<f64> = (0..3)
                    .map(|k| start[k] + ([0.05, 0.0, 0.0][k] - start[k]) * b)
                    .collect();
                Sample::new(i as f64 * 0.02, vec![p[0], p[1], p[2], 0.0, 0.0, 0.1 * b])
            })
            .collect();
        Trajectory::new(layout(), "door_handle", samples).unwrap()
    }

    fn scene() -> Scene {
        let demos: Vec<Trajectory> = (0..5)
            .map(|i| {
                let j = i as f64 * 0.01;
                reach([0.5 + j, 0.1 - j, 0.05 + j], 1.5 + 0.05 * i as f64)
            })
            .collect();
        let basis = BasisConfig::uniform(10, 6).unwrap();
        let promp = fit_promp(&demos, &basis, 1e-12, "reach_handle", "door_handle").unwrap();
        let mut registry = TaskRegistry::new();
        registry
            .register("door", vec![promp], Some(door_handle_template()))
            .unwrap();
        Scene::new(registry)
    }

    fn run_to_validation(session: &mut AssistSession, scene: &mut Scene, pose: Pose) {
        let obj = scene.inject_detection("door", pose).unwrap().object;
        session.offer(&obj);
        session.activate(scene).unwrap();
        let demo = reach([0.52, 0.08, 0.06], 1.6);
        for s in &demo.samples {
            let world = pose.transform_values(&layout(), &s.values, None);
            session.feed_observation(scene, Sample::new(s.t + 10.0, world)).unwrap();
            if session.state() == SessionState::Validation {
                break;
            }
        }
        assert_eq!(session.state(), SessionState::Validation);
    }

    #[test]
    fn declared_transitions_cover_the_loop() {
        use SessionState::*;
        assert!(is_declared(Validation, Generation));
        assert!(!is_declared(Completed, Idle));
        assert!(!is_declared(Generation, Executing));
        assert!(!command_allowed("abort", Completed));
        assert!(!command_allowed("abort", Aborted));
        assert!(command_allowed("feed_observation", Validation));
    }

    #[test]
    fn full_episode_reaches_grasp_waypoint() {
        let mut scene = scene();
        let pose = Pose::from_yaw(Vector3::new(1.0, -0.5, 0.9), 0.7);
        let mut session = AssistSession::new(1, AssistConfig::default());
        run_to_validation(&mut session, &mut scene, pose);
        let proposal = session.proposal().unwrap().clone();
        assert!(proposal.blend_start_index.is_some());
        let world_wp = pose.compose(&door_handle_template().actions[0].waypoints[0]);
        session.respond(Verdict::Accept).unwrap();
        while session.state() != SessionState::Completed {
            session.advance(0.05).unwrap();
        }
        let end = session.follower().unwrap().commanded().to_vec();
        for (e, w) in end.iter().zip(world_wp.translation().iter()) {
            assert!((e - w).abs() < 1e-6);
        }
        let r = Vector3::new(end[3], end[4], end[5]);
        assert!(crate::pose::rotation_distance(&r, &world_wp.rotation().scaled_axis()) < 1e-6);
    }

    #[test]
    fn illegal_commands_leave_state_untouched() {
        let scene = scene();
        let mut session = AssistSession::new(1, AssistConfig::default());
        assert!(matches!(
            session.activate(&scene),
            Err(CoreError::IllegalTransition {
                state: SessionState::Idle,
                command: "activate"
            })
        ));
        assert!(session.respond(Verdict::Accept).is_err());
        assert!(session.advance(0.1).is_err());
        assert_eq!(session.state(), SessionState::Idle);
        session.abort().unwrap();
        assert!(session.abort().is_err());
    }

    #[test]
    fn reject_returns_to_generation_and_advance_rules() {
        let mut scene = scene();
        let mut session = AssistSession::new(1, AssistConfig::default());
        run_to_validation(&mut session, &mut scene, Pose::identity());
        assert!(session
            .feed_observation(&scene, Sample::new(100.0, vec![0.0; 6]))
            .unwrap()
            .is_empty());
        session.respond(Verdict::Reject).unwrap();
        assert_eq!(session.state(), SessionState::Generation);
        assert!(session.proposal().is_none());
        assert!(session.buffer().is_empty());
    }

    #[test]
    fn pause_and_resume() {
        let mut scene = scene();
        let mut session = AssistSession::new(1, AssistConfig::default());
        run_to_validation(&mut session, &mut scene, Pose::identity());
        session.respond(Verdict::Accept).unwrap();
        session.advance(0.2).unwrap();
        let before = session.follower().unwrap().commanded().to_vec();
        session.advance(0.0).unwrap();
        assert_eq!(session.state(), SessionState::Paused);
        session.advance(0.0).unwrap();
        assert_eq!(session.follower().unwrap().commanded(), before.as_slice());
        assert!((session.cursor() - 0.2).abs() < 1e-15);
        assert!(session.advance(-0.1).is_err());
        session.advance(0.1).unwrap();
        assert_eq!(session.state(), SessionState::Executing);
    }

    #[test]
    fn override_rules() {
        let mut scene = scene();
        let mut session = AssistSession::new(1, AssistConfig::default());
        run_to_validation(&mut session, &mut scene, Pose::identity());
        let id = session.target().unwrap();
        assert!(matches!(session.guard_override(id), Err(CoreError::ActiveExecution(_))));
    }

    #[test]
    fn retarget_reexpresses_buffer() {
        let mut scene = scene();
        let obj = scene.inject_detection("door", Pose::identity()).unwrap().object;
        let mut session = AssistSession::new(1, AssistConfig::default());
        session.offer(&obj);
        session.activate(&scene).unwrap();
        let demo = reach([0.52, 0.08, 0.06], 1.6);
        for s in demo.samples.iter().take(12) {
            session.feed_observation(&scene, s.clone()).unwrap();
        }
        let before = session.buffer().points().to_vec();
        assert!(!before.is_empty());
        let new = Pose::from_translation(0.1, 0.0, 0.0);
        session.guard_override(obj.id).unwrap();
        scene.override_pose(obj.id, new).unwrap();
        session.retarget(obj.id, &Pose::identity(), &new);
        for (a, b) in session.buffer().points().iter().zip(&before) {
            assert!((a.values[0] - (b.values[0] - 0.1)).abs() < 1e-12);
        }
    }
}
