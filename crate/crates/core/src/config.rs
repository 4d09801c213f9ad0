//! Tunable parameters of the assistance pipeline, with their defaults.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisConfig, DEFAULT_BASIS_COUNT};
use crate::blend::{DEFAULT_BLEND_FRACTION, DEFAULT_BLEND_TARGET};
use crate::error::{CoreError, Result};
use crate::promp::{DEFAULT_OBSERVATION_NOISE, DEFAULT_RIDGE};
use crate::recognition::{RecognitionConfig, DEFAULT_ONSET_THRESHOLD, DEFAULT_WINDOW_FRACTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssistConfig {
    /// Ridge factor for weight regression.
    pub ridge: f64,
    /// Basis functions per dimension.
    pub basis_count: usize,
    /// Basis bandwidth; `1 / (basis_count - 1)` when unset.
    pub bandwidth: Option<f64>,
    /// Fraction of the shortest candidate duration observed before recognizing.
    pub window_fraction: f64,
    /// Onset speed threshold, m/s.
    pub onset_threshold: f64,
    /// Position channels (or groups) watched for onset; empty means all.
    pub onset_channels: Vec<String>,
    pub position_weight: f64,
    pub orientation_weight: f64,
    /// Channels scored during recognition; all when unset.
    pub recognition_mask: Option<Vec<String>>,
    /// Observation variance used when conditioning.
    pub observation_noise: f64,
    /// Fraction of the proposal replaced by the blend window.
    pub blend_fraction: f64,
    /// Target for the blend coefficient at 70% of the window.
    pub blend_target: f64,
    /// Follower time constant, seconds.
    pub follower_tau: f64,
    /// Position deviation bound, meters.
    pub deviation_position: f64,
    /// Orientation deviation bound, radians.
    pub deviation_orientation: f64,
    /// Reference sample rate, Hz.
    pub sample_rate: f64,
    /// Multiplies the recognized mean duration to set the proposal duration.
    pub duration_scale: f64,
}

impl Default for AssistConfig {
    fn default() -> Self {
        Self {
            ridge: DEFAULT_RIDGE,
            basis_count: DEFAULT_BASIS_COUNT,
            bandwidth: None,
            window_fraction: DEFAULT_WINDOW_FRACTION,
            onset_threshold: DEFAULT_ONSET_THRESHOLD,
            onset_channels: Vec::new(),
            position_weight: 1.0,
            orientation_weight: 1.0,
            recognition_mask: None,
            observation_noise: DEFAULT_OBSERVATION_NOISE,
            blend_fraction: DEFAULT_BLEND_FRACTION,
            blend_target: DEFAULT_BLEND_TARGET,
            follower_tau: 0.15,
            deviation_position: 0.02,
            deviation_orientation: 0.1,
            sample_rate: 50.0,
            duration_scale: 1.0,
        }
    }
}

impl AssistConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("follower_tau", self.follower_tau),
            ("deviation_position", self.deviation_position),
            ("deviation_orientation", self.deviation_orientation),
            ("sample_rate", self.sample_rate),
            ("duration_scale", self.duration_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CoreError::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("ridge", self.ridge),
            ("onset_threshold", self.onset_threshold),
            ("observation_noise", self.observation_noise),
            ("position_weight", self.position_weight),
            ("orientation_weight", self.orientation_weight),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CoreError::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(CoreError::InvalidArgument("window_fraction must be in (0, 1]".into()));
        }
        if !(self.blend_fraction > 0.0 && self.blend_fraction < 1.0) {
            return Err(CoreError::InvalidArgument("blend_fraction must be in (0, 1)".into()));
        }
        self.basis(1)?;
        Ok(())
    }

    pub fn basis(&self, n: usize) -> Result<BasisConfig> {
        match self.bandwidth {
            Some(h) => BasisConfig::with_bandwidth(self.basis_count, n, h),
            None => BasisConfig::uniform(self.basis_count, n),
        }
    }

    pub fn recognition(&self) -> RecognitionConfig {
        RecognitionConfig {
            window_fraction: self.window_fraction,
            position_weight: self.position_weight,
            orientation_weight: self.orientation_weight,
            channel_mask: self.recognition_mask.clone(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CoreError::Parse {
            location: "config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = AssistConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.ridge, 1e-12);
        assert_eq!(cfg.basis(3).unwrap().bandwidth, 1.0 / 19.0);
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let cfg = AssistConfig::from_toml("window_fraction = 0.25\nfollower_tau = 0.2\n").unwrap();
        assert_eq!(cfg.window_fraction, 0.25);
        assert_eq!(cfg.follower_tau, 0.2);
        assert_eq!(cfg.sample_rate, 50.0);
        assert!(AssistConfig::from_toml("window_fraction = 1.5").is_err());
        assert!(AssistConfig::from_toml("no_such_knob = 1").is_err());
    }
}
