//! Offline error evaluation of conditioned primitives against held-out motions.
//!
//! For each test: recognize from the first part of the motion, condition the
//! recognized primitive on that part, resample the conditioned mean at the
//! test's own sample phases, and take the RMS error per channel. Positions
//! are reported in centimeters, orientations in radians (geodesic angle).

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::pose::rotation_distance;
use crate::promp::{ObservationPoint, ProMP, DEFAULT_OBSERVATION_NOISE};
use crate::recognition::{recognize, ObservationBuffer, RecognitionConfig};
use crate::trajectory::{ChannelKind, ChannelLayout, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRms {
    pub channel: String,
    pub unit: String,
    pub mean: f64,
    pub sd: f64,
    pub prior_mean: f64,
    pub prior_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRms {
    pub index: usize,
    pub recognized: String,
    /// Per channel, in report units.
    pub conditioned: Vec<f64>,
    pub prior: Vec<f64>,
    /// RMS over the stacked vector in SI units.
    pub conditioned_overall: f64,
    pub prior_overall: f64,
    /// RMS over the observed part only.
    pub conditioned_prefix: f64,
    pub prior_prefix: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsReport {
    pub window_fraction: f64,
    pub test_count: usize,
    pub excluded: usize,
    pub channels: Vec<ChannelRms>,
    pub tests: Vec<TestRms>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub recognition: RecognitionConfig,
    pub observation_noise: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            recognition: RecognitionConfig::default(),
            observation_noise: DEFAULT_OBSERVATION_NOISE,
        }
    }
}

pub fn eval_rms(promps: &[ProMP], tests: &[Trajectory], window_fraction: f64) -> Result<RmsReport> {
    let options = EvalOptions {
        recognition: RecognitionConfig::with_window(window_fraction),
        ..EvalOptions::default()
    };
    eval_rms_with(promps, tests, &options)
}

pub fn eval_rms_with(promps: &[ProMP], tests: &[Trajectory], options: &EvalOptions) -> Result<RmsReport> {
    let layout = &promps.first().ok_or(CoreError::NoContext)?.channels;
    if tests.is_empty() {
        return Err(CoreError::InvalidArgument("no test trajectories".into()));
    }
    if let Some(i) = tests.iter().position(|t| &t.channels != layout) {
        return Err(CoreError::Schema(format!(
            "test {i} does not match the primitives' channel layout"
        )));
    }
    let mut results = Vec::new();
    let mut excluded = 0;
    for (index, test) in tests.iter().enumerate() {
        match evaluate_one(promps, test, options) {
            Ok(mut r) => {
                r.index = index;
                results.push(r);
            }
            Err(CoreError::InsufficientObservation { .. }) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if results.is_empty() {
        return Err(CoreError::DegenerateInput(format!(
            "all {excluded} tests were too short for window {}",
            options.recognition.window_fraction
        )));
    }
    let channels = layout
        .channels()
        .iter()
        .enumerate()
        .map(|(c, ch)| {
            let cond: Vec<f64> = results.iter().map(|r| r.conditioned[c]).collect();
            let prior: Vec<f64> = results.iter().map(|r| r.prior[c]).collect();
            let (mean, sd) = mean_sd(&cond);
            let (prior_mean, prior_sd) = mean_sd(&prior);
            ChannelRms {
                channel: ch.name.clone(),
                unit: unit(ch.kind).to_string(),
                mean,
                sd,
                prior_mean,
                prior_sd,
            }
        })
        .collect();
    Ok(RmsReport {
        window_fraction: options.recognition.window_fraction,
        test_count: results.len(),
        excluded,
        channels,
        tests: results,
    })
}

fn unit(kind: ChannelKind) -> &'static str {
    match kind {
        ChannelKind::Position => "cm",
        ChannelKind::Orientation => "rad",
    }
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn evaluate_one(promps: &[ProMP], test: &Trajectory, options: &EvalOptions) -> Result<TestRms> {
    let t0 = test.samples[0].t;
    let duration = test.duration();
    let shortest = promps.iter().map(|p| p.mean_duration).fold(f64::INFINITY, f64::min);
    let observed = options.recognition.window_fraction * shortest;
    // up to and including the first sample that covers the window
    let covered = test
        .samples
        .iter()
        .position(|s| s.t - t0 + 1e-9 >= observed)
        .map_or(test.len(), |i| i + 1);
    let prefix = test.samples[..covered].to_vec();
    let buffer = ObservationBuffer::started_at(t0, prefix.clone())?;
    let recognition = recognize(&buffer, promps, &options.recognition)?;
    let promp = &promps[recognition.task_index];

    let phase = |t: f64| ((t - t0) / duration).clamp(0.0, 1.0);
    let obs: Vec<ObservationPoint> = prefix
        .iter()
        .map(|s| ObservationPoint::isotropic(phase(s.t), s.values.clone(), options.observation_noise))
        .collect();
    let conditioned = promp.condition(&obs)?;

    let layout = &test.channels;
    let phases: Vec<f64> = test.samples.iter().map(|s| phase(s.t)).collect();
    let cond_mean = conditioned.mean_at_phases(&phases);
    let prior_mean = promp.mean_at_phases(&phases);
    let truth: Vec<&[f64]> = test.samples.iter().map(|s| s.values.as_slice()).collect();

    let per_channel = |pred: &[nalgebra::DVector<f64>]| -> Vec<f64> { channel_rms(layout, &truth, pred, truth.len()) };
    let overall = |pred: &[nalgebra::DVector<f64>], count: usize| -> f64 {
        let sum: f64 = truth
            .iter()
            .zip(pred)
            .take(count)
            .map(|(y, p)| y.iter().zip(p.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum();
        (sum / count as f64).sqrt()
    };
    Ok(TestRms {
        index: 0,
        recognized: recognition.task_label,
        conditioned: per_channel(&cond_mean),
        prior: per_channel(&prior_mean),
        conditioned_overall: overall(&cond_mean, truth.len()),
        prior_overall: overall(&prior_mean, truth.len()),
        conditioned_prefix: overall(&cond_mean, prefix.len()),
        prior_prefix: overall(&prior_mean, prefix.len()),
    })
}

fn channel_rms(layout: &ChannelLayout, truth: &[&[f64]], pred: &[nalgebra::DVector<f64>], count: usize) -> Vec<f64> {
    layout
        .slices()
        .map(|(off, ch)| {
            let sum: f64 = truth
                .iter()
                .zip(pred)
                .take(count)
                .map(|(y, p)| {
                    let e = match ch.kind {
                        ChannelKind::Orientation if ch.dim == 3 => rotation_distance(
                            &Vector3::new(y[off], y[off + 1], y[off + 2]),
                            &Vector3::new(p[off], p[off + 1], p[off + 2]),
                        ),
                        _ => (off..off + ch.dim).map(|i| (y[i] - p[i]).powi(2)).sum::<f64>().sqrt(),
                    };
                    e * e
                })
                .sum();
            let rms = (sum / count as f64).sqrt();
            match ch.kind {
                ChannelKind::Position => rms * 100.0,
                ChannelKind::Orientation => rms,
            }
        })
        .collect()
}

impl RmsReport {
    /// Plain-text table: one row per channel, `mean (SD)` cells.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "RMS error over {} tests (window {:.3}, {} excluded)",
            self.test_count, self.window_fraction, self.excluded
        );
        let width = self.channels.iter().map(|c| c.channel.len()).max().unwrap_or(7).max(7);
        let _ = writeln!(
            out,
            "{:<width$}  {:<4}  {:<16}  {:<16}",
            "channel", "unit", "conditioned", "prior mean"
        );
        for c in &self.channels {
            let cond = format!("{:.2} ({:.2})", c.mean, c.sd);
            let prior = format!("{:.2} ({:.2})", c.prior_mean, c.prior_sd);
            let _ = writeln!(out, "{:<width$}  {:<4}  {:<16}  {:<16}", c.channel, c.unit, cond, prior);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Writes mean and ±2σ bounds of a primitive as CSV columns for plotting.
pub fn write_envelope_csv<W: Write>(promp: &ProMP, n_samples: usize, out: W) -> Result<()> {
    if n_samples < 2 {
        return Err(CoreError::InvalidArgument("envelope needs at least 2 samples".into()));
    }
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "phase".to_string()];
    for (_, ch) in promp.channels.slices() {
        for k in 0..ch.dim {
            for col in ["mean", "lower", "upper"] {
                header.push(format!("{}_{k}_{col}", ch.name));
            }
        }
    }
    let csv_err = |e: csv::Error| CoreError::Io {
        path: "envelope".into(),
        message: e.to_string(),
    };
    writer.write_record(&header).map_err(csv_err)?;
    for i in 0..n_samples {
        let phase = i as f64 / (n_samples - 1) as f64;
        let mean = promp.mean_at(phase);
        let var = promp.variance_at(phase);
        let mut row = vec![(phase * promp.mean_duration).to_string(), phase.to_string()];
        for d in 0..mean.len() {
            let sd = var[d].max(0.0).sqrt();
            row.push(mean[d].to_string());
            row.push((mean[d] - 2.0 * sd).to_string());
            row.push((mean[d] + 2.0 * sd).to_string());
        }
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| CoreError::Io {
        path: "envelope".into(),
        message: e.to_string(),
    })
}
