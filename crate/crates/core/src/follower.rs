//! Kinematic stand-in for the robot: the actual pose chases the commanded pose.
//!
//! Positions follow a first-order lag. Three-dimensional orientation channels
//! move along the geodesic by the same fraction `1 − exp(−dt/τ)` per step.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::pose::{rotation_distance, unwrap_rotation_vector};
use crate::trajectory::{ChannelKind, ChannelLayout};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowerConfig {
    pub tau: f64,
    pub position_bound: f64,
    pub orientation_bound: f64,
}

impl Default for FollowerConfig {
    fn default() -> Self {
        Self {
            tau: 0.15,
            position_bound: 0.02,
            orientation_bound: 0.1,
        }
    }
}

/// Commanded-versus-actual gap for one end-effector group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDeviation {
    pub group: String,
    pub position: f64,
    pub orientation: f64,
    pub exceeded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Follower {
    layout: ChannelLayout,
    config: FollowerConfig,
    commanded: Vec<f64>,
    actual: Vec<f64>,
}

impl Follower {
    /// Follower at rest at `actual`.
    pub fn new(layout: ChannelLayout, config: FollowerConfig, actual: Vec<f64>) -> Result<Self> {
        if actual.len() != layout.dim() {
            return Err(CoreError::Schema(format!(
                "follower state has {} values, layout has {}",
                actual.len(),
                layout.dim()
            )));
        }
        if !(config.tau > 0.0 && config.tau.is_finite()) {
            return Err(CoreError::InvalidArgument(
                "follower time constant must be positive".into(),
            ));
        }
        Ok(Self {
            layout,
            config,
            commanded: actual.clone(),
            actual,
        })
    }

    pub fn commanded(&self) -> &[f64] {
        &self.commanded
    }

    pub fn actual(&self) -> &[f64] {
        &self.actual
    }

    pub fn command(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.actual.len() {
            return Err(CoreError::Schema("commanded pose has the wrong dimension".into()));
        }
        self.commanded = values;
        Ok(())
    }

    /// Holds the current actual pose.
    pub fn freeze(&mut self) {
        self.commanded = self.actual.clone();
    }

    /// Advances the follower by `dt` seconds and reports per-group deviation.
    pub fn step(&mut self, dt: f64) -> Result<Vec<GroupDeviation>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "follower step dt = {dt} must be positive"
            )));
        }
        let k = 1.0 - (-dt / self.config.tau).exp();
        for (off, ch) in self.layout.slices() {
            let range = off..off + ch.dim;
            if ch.kind == ChannelKind::Orientation && ch.dim == 3 {
                let a = Vector3::from_column_slice(&self.actual[range.clone()]);
                let c = Vector3::from_column_slice(&self.commanded[range.clone()]);
                let qa = UnitQuaternion::from_scaled_axis(a);
                let qc = UnitQuaternion::from_scaled_axis(c);
                let rel = (qa.inverse() * qc).scaled_axis();
                let next = (qa * UnitQuaternion::from_scaled_axis(rel * k)).scaled_axis();
                let next = unwrap_rotation_vector(&next, &a);
                self.actual[range].copy_from_slice(next.as_slice());
            } else {
                for i in range {
                    self.actual[i] += k * (self.commanded[i] - self.actual[i]);
                }
            }
        }
        Ok(self.deviation())
    }

    pub fn deviation(&self) -> Vec<GroupDeviation> {
        self.layout
            .groups()
            .into_iter()
            .map(|group| {
                let mut position: f64 = 0.0;
                let mut orientation: f64 = 0.0;
                for (off, ch) in self.layout.slices().filter(|(_, c)| c.group == group) {
                    let a = &self.actual[off..off + ch.dim];
                    let c = &self.commanded[off..off + ch.dim];
                    match ch.kind {
                        ChannelKind::Orientation if ch.dim == 3 => {
                            let d = rotation_distance(&Vector3::from_column_slice(a), &Vector3::from_column_slice(c));
                            orientation = orientation.max(d);
                        }
                        kind => {
                            let d = a.iter().zip(c).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                            if kind == ChannelKind::Position {
                                position = position.max(d);
                            } else {
                                orientation = orientation.max(d);
                            }
                        }
                    }
                }
                let exceeded = position > self.config.position_bound || orientation > self.config.orientation_bound;
                GroupDeviation {
                    group,
                    position,
                    orientation,
                    exceeded,
                }
            })
            .collect()
    }
}
