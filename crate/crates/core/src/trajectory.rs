//! Time-stamped multi-channel trajectories and their phase-normalized form.
//!
//! A trajectory stacks several channels (end-effector positions in meters,
//! orientations as axis-angle vectors in radians) into one value vector per
//! sample. Channels belong to a named group, usually a body part, so that a
//! hand can carry both a position and an orientation channel.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    /// Cartesian position in meters.
    #[serde(rename = "position-m")]
    Position,
    /// Rotation vector (axis times angle) in radians.
    #[serde(rename = "orientation-axisangle-rad")]
    Orientation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub group: String,
    pub kind: ChannelKind,
    pub dim: usize,
}

impl Channel {
    pub fn position(group: &str) -> Self {
        Self {
            name: format!("{group}_position"),
            group: group.to_string(),
            kind: ChannelKind::Position,
            dim: 3,
        }
    }

    pub fn orientation(group: &str) -> Self {
        Self {
            name: format!("{group}_orientation"),
            group: group.to_string(),
            kind: ChannelKind::Orientation,
            dim: 3,
        }
    }

    /// Channel with a free dimension, mostly useful for scalar toy problems.
    pub fn custom(name: &str, kind: ChannelKind, dim: usize) -> Self {
        Self {
            name: name.to_string(),
            group: name.to_string(),
            kind,
            dim,
        }
    }
}

/// Ordered channel list; defines how a value vector is sliced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct ChannelLayout(pub Vec<Channel>);

impl ChannelLayout {
    pub fn new(channels: Vec<Channel>) -> Self {
        Self(channels)
    }

    pub fn channels(&self) -> &[Channel] {
        &self.0
    }

    /// Total stacked dimension.
    pub fn dim(&self) -> usize {
        self.0.iter().map(|c| c.dim).sum()
    }

    /// Start offset of every channel in the stacked vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.0
            .iter()
            .map(|c| {
                let o = acc;
                acc += c.dim;
                o
            })
            .collect()
    }

    /// `(offset, channel)` pairs.
    pub fn slices(&self) -> impl Iterator<Item = (usize, &Channel)> {
        self.offsets().into_iter().zip(self.0.iter())
    }

    pub fn find(&self, group: &str, kind: ChannelKind) -> Option<(usize, &Channel)> {
        self.slices().find(|(_, c)| c.group == group && c.kind == kind)
    }

    /// Distinct group names in first-appearance order.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.0 {
            if !out.contains(&c.group) {
                out.push(c.group.clone());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(CoreError::Schema("channel layout is empty".into()));
        }
        for (i, c) in self.0.iter().enumerate() {
            if c.dim == 0 {
                return Err(CoreError::Schema(format!(
                    "channel {i} ({}) has zero dimension",
                    c.name
                )));
            }
            if self.0[..i].iter().any(|o| o.name == c.name) {
                return Err(CoreError::Schema(format!("duplicate channel name {}", c.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub values: Vec<f64>,
}

impl Sample {
    pub fn new(t: f64, values: Vec<f64>) -> Self {
        Self { t, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub channels: ChannelLayout,
    pub frame: String,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    /// Builds a trajectory and checks its invariants.
    pub fn new(channels: ChannelLayout, frame: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let traj = Self {
            channels,
            frame: frame.into(),
            samples,
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<()> {
        self.channels.validate()?;
        if self.samples.len() < 2 {
            return Err(CoreError::InvalidTrajectory(format!(
                "need at least 2 samples, got {}",
                self.samples.len()
            )));
        }
        validate_samples(&self.samples, self.channels.dim())
    }

    pub fn dim(&self) -> usize {
        self.channels.dim()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Copy with every timestamp multiplied by `factor`.
    pub fn time_scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.t *= factor;
        }
        out
    }

    /// Samples whose timestamp is at most `t_end`.
    pub fn prefix_until(&self, t_end: f64) -> Vec<Sample> {
        self.samples.iter().take_while(|s| s.t <= t_end).cloned().collect()
    }
}

pub(crate) fn validate_samples(samples: &[Sample], dim: usize) -> Result<()> {
    for (i, s) in samples.iter().enumerate() {
        if s.values.len() != dim {
            return Err(CoreError::InvalidTrajectory(format!(
                "sample {i} has {} values, layout expects {dim}",
                s.values.len()
            )));
        }
        if !s.t.is_finite() || s.values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidTrajectory(format!("sample {i} is not finite")));
        }
        if i > 0 && s.t <= samples[i - 1].t {
            return Err(CoreError::InvalidTrajectory(format!(
                "timestamps not strictly increasing at sample {i}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub phase: f64,
    pub values: Vec<f64>,
}

/// Duration-independent view of a trajectory: phase runs from 0 to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrajectory {
    pub channels: ChannelLayout,
    pub samples: Vec<PhaseSample>,
    pub source_duration: f64,
}

impl PhaseTrajectory {
    pub fn dim(&self) -> usize {
        self.channels.dim()
    }
}

/// Maps timestamps affinely onto `[0, 1]`; values are untouched.
pub fn normalize_phase(traj: &Trajectory) -> Result<PhaseTrajectory> {
    traj.validate()?;
    let t0 = traj.samples[0].t;
    let duration = traj.duration();
    if duration <= 0.0 || !duration.is_finite() {
        return Err(CoreError::DegenerateInput("trajectory has zero duration".into()));
    }
    let last = traj.samples.len() - 1;
    let samples = traj
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| PhaseSample {
            // endpoints are pinned so rounding never leaves [0, 1]
            phase: match i {
                0 => 0.0,
                i if i == last => 1.0,
                _ => (s.t - t0) / duration,
            },
            values: s.values.clone(),
        })
        .collect();
    Ok(PhaseTrajectory {
        channels: traj.channels.clone(),
        samples,
        source_duration: duration,
    })
}
