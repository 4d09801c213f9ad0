//! Picking the primitive that best explains the start of an operator motion.
//!
//! Observations only start accumulating once the end-effector speed crosses
//! a threshold. Recognition then compares the observed prefix with the mean
//! of every candidate, each candidate stretched to its own mean demonstration
//! duration, and keeps the candidate with the smallest summed distance.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::promp::ProMP;
use crate::trajectory::{ChannelKind, ChannelLayout, Sample, Trajectory};

pub const DEFAULT_WINDOW_FRACTION: f64 = 1.0 / 3.0;
/// Onset speed threshold in m/s.
pub const DEFAULT_ONSET_THRESHOLD: f64 = 0.03;
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecognitionConfig {
    pub window_fraction: f64,
    /// Weight applied to position residuals, per meter.
    pub position_weight: f64,
    /// Weight applied to orientation residuals, per radian.
    pub orientation_weight: f64,
    /// Channel names to score; all channels when absent.
    pub channel_mask: Option<Vec<String>>,
}

impl Default for RecognitionConfig {
    fn default() -> Self {
        Self {
            window_fraction: DEFAULT_WINDOW_FRACTION,
            position_weight: 1.0,
            orientation_weight: 1.0,
            channel_mask: None,
        }
    }
}

impl RecognitionConfig {
    pub fn with_window(window_fraction: f64) -> Self {
        Self {
            window_fraction,
            ..Self::default()
        }
    }

    fn weights(&self, layout: &ChannelLayout) -> Vec<f64> {
        let mut w = Vec::with_capacity(layout.dim());
        for ch in layout.channels() {
            let included = self
                .channel_mask
                .as_ref()
                .is_none_or(|mask| mask.iter().any(|n| n == &ch.name));
            let value = match (included, ch.kind) {
                (false, _) => 0.0,
                (true, ChannelKind::Position) => self.position_weight,
                (true, ChannelKind::Orientation) => self.orientation_weight,
            };
            w.extend(std::iter::repeat_n(value, ch.dim));
        }
        w
    }
}

/// Observed operator samples, expressed in the candidate object frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationBuffer {
    points: Vec<Sample>,
    onset_time: Option<f64>,
}

impl ObservationBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Buffer that starts at `onset_time` with the given samples.
    pub fn started_at(onset_time: f64, points: Vec<Sample>) -> Result<Self> {
        let mut buf = Self::new();
        buf.onset_time = Some(onset_time);
        for p in points {
            buf.push(p)?;
        }
        Ok(buf)
    }

    pub fn started(&self) -> bool {
        self.onset_time.is_some()
    }

    pub fn onset_time(&self) -> Option<f64> {
        self.onset_time
    }

    pub fn points(&self) -> &[Sample] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&mut self, onset_time: f64) {
        self.points.clear();
        self.onset_time = Some(onset_time);
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        let onset = self
            .onset_time
            .ok_or_else(|| CoreError::InvalidArgument("buffer has not been started".into()))?;
        if let Some(last) = self.points.last() {
            if sample.t <= last.t {
                return Err(CoreError::InvalidTrajectory(format!(
                    "observation at t = {} does not follow t = {}",
                    sample.t, last.t
                )));
            }
            if sample.values.len() != last.values.len() {
                return Err(CoreError::Schema("observation dimension changed".into()));
            }
        } else if sample.t < onset {
            return Err(CoreError::InvalidTrajectory("observation precedes onset".into()));
        }
        self.points.push(sample);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.points.clear();
        self.onset_time = None;
    }

    /// Seconds covered since onset.
    pub fn span(&self) -> f64 {
        match (self.onset_time, self.points.last()) {
            (Some(t0), Some(last)) => last.t - t0,
            _ => 0.0,
        }
    }

    /// Applies `f` to every stored value vector in order.
    pub fn map_values(&mut self, mut f: impl FnMut(&[f64], Option<&[f64]>) -> Vec<f64>) {
        let mut prev: Option<Vec<f64>> = None;
        for p in &mut self.points {
            let mapped = f(&p.values, prev.as_deref());
            prev = Some(mapped.clone());
            p.values = mapped;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionResult {
    pub task_index: usize,
    pub task_label: String,
    pub scores: Vec<CandidateScore>,
    pub window_fraction: f64,
    pub observations_used: usize,
}

/// Offsets of the position channels used for onset detection.
fn onset_channels(layout: &ChannelLayout, designated: &[String]) -> Result<Vec<(usize, usize)>> {
    let picked: Vec<(usize, usize)> = layout
        .slices()
        .filter(|(_, c)| c.kind == ChannelKind::Position)
        .filter(|(_, c)| designated.is_empty() || designated.iter().any(|d| d == &c.name || d == &c.group))
        .map(|(o, c)| (o, c.dim))
        .collect();
    if picked.is_empty() {
        return Err(CoreError::Schema(
            "no end-effector position channel for onset detection".into(),
        ));
    }
    Ok(picked)
}

fn step_speed(channels: &[(usize, usize)], a: &Sample, b: &Sample) -> f64 {
    let dt = b.t - a.t;
    channels
        .iter()
        .map(|&(off, dim)| {
            let d2: f64 = (off..off + dim).map(|i| (b.values[i] - a.values[i]).powi(2)).sum();
            d2.sqrt() / dt
        })
        .fold(0.0, f64::max)
}

/// First timestamp whose following step moves faster than `threshold` m/s.
///
/// `designated` names the position channels (or their groups) to watch; an
/// empty list watches every position channel.
pub fn detect_motion_onset(stream: &Trajectory, threshold: f64, designated: &[String]) -> Result<Option<f64>> {
    stream.validate()?;
    let channels = onset_channels(&stream.channels, designated)?;
    Ok(stream
        .samples
        .windows(2)
        .find(|w| step_speed(&channels, &w[0], &w[1]) > threshold)
        .map(|w| w[0].t))
}

/// Incremental onset gate fed one sample at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetDetector {
    channels: Vec<(usize, usize)>,
    threshold: f64,
    previous: Option<Sample>,
}

impl OnsetDetector {
    pub fn new(layout: &ChannelLayout, threshold: f64, designated: &[String]) -> Result<Self> {
        Ok(Self {
            channels: onset_channels(layout, designated)?,
            threshold,
            previous: None,
        })
    }

    /// Returns the sample at which motion started once the gate opens.
    pub fn push(&mut self, sample: &Sample) -> Option<Sample> {
        let fired = match &self.previous {
            Some(prev) if sample.t > prev.t => step_speed(&self.channels, prev, sample) > self.threshold,
            _ => false,
        };
        let prev = self.previous.replace(sample.clone());
        if fired {
            prev
        } else {
            None
        }
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }
}

/// Sum of weighted distances between the buffer and one candidate mean.
pub fn candidate_score(points: &[Sample], onset: f64, candidate: &ProMP, weights: &[f64]) -> f64 {
    points
        .iter()
        .map(|p| {
            let phase = ((p.t - onset) / candidate.mean_duration).clamp(0.0, 1.0);
            let mean = candidate.mean_at(phase);
            p.values
                .iter()
                .zip(mean.iter())
                .zip(weights)
                .map(|((y, mu), w)| (w * (y - mu)).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

pub fn recognize(
    buffer: &ObservationBuffer,
    candidates: &[ProMP],
    config: &RecognitionConfig,
) -> Result<RecognitionResult> {
    let first = candidates.first().ok_or(CoreError::NoContext)?;
    if !(config.window_fraction > 0.0 && config.window_fraction <= 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "window fraction {} outside (0, 1]",
            config.window_fraction
        )));
    }
    let layout = &first.channels;
    if let Some(i) = candidates.iter().position(|c| &c.channels != layout) {
        return Err(CoreError::Schema(format!(
            "candidate {i} has a different channel layout"
        )));
    }
    if let Some(p) = buffer.points().iter().find(|p| p.values.len() != layout.dim()) {
        return Err(CoreError::Schema(format!(
            "observation has {} values, candidates expect {}",
            p.values.len(),
            layout.dim()
        )));
    }
    let shortest = candidates.iter().map(|c| c.mean_duration).fold(f64::INFINITY, f64::min);
    let required = config.window_fraction * shortest;
    let span = buffer.span();
    if buffer.is_empty() || span + TIME_EPS < required {
        return Err(CoreError::InsufficientObservation {
            observed_fraction: span / shortest,
            required_fraction: config.window_fraction,
        });
    }
    let onset = buffer.onset_time().unwrap_or(buffer.points()[0].t);
    let used: Vec<Sample> = buffer
        .points()
        .iter()
        .take_while(|p| p.t - onset <= required + TIME_EPS)
        .cloned()
        .collect();
    let weights = config.weights(layout);
    let scores: Vec<CandidateScore> = candidates
        .iter()
        .map(|c| CandidateScore {
            label: c.task_label.clone(),
            score: candidate_score(&used, onset, c, &weights),
        })
        .collect();
    if scores.iter().any(|s| !s.score.is_finite()) {
        return Err(CoreError::DegenerateInput("recognition score is not finite".into()));
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.score < scores[best].score {
            best = i;
        }
    }
    Ok(RecognitionResult {
        task_index: best,
        task_label: scores[best].label.clone(),
        scores,
        window_fraction: config.window_fraction,
        observations_used: used.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisConfig;
    use crate::trajectory::Channel;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn ramp(speed: f64, dt: f64, count: usize, jitter: impl Fn(usize) -> f64) -> Trajectory {
        let layout = ChannelLayout::new(vec![Channel::position("hand")]);
        let samples = (0..count)
            .map(|i| {
                let t = i as f64 * dt;
                Sample::new(t, vec![speed * t + jitter(i), 0.0, 0.0])
            })
            .collect();
        Trajectory::new(layout, "world", samples).unwrap()
    }

    #[test]
    fn stationary_stream_has_no_onset() {
        assert_eq!(
            detect_motion_onset(&ramp(0.0, 0.02, 50, |_| 0.0), 0.05, &[]).unwrap(),
            None
        );
    }

    #[test]
    fn ramp_triggers_on_first_step() {
        // 0.2 m/s over 0.02 s steps is 4 mm per step, well above 0.05 m/s
        let onset = detect_motion_onset(&ramp(0.2, 0.02, 20, |_| 0.0), 0.05, &[]).unwrap();
        assert_eq!(onset, Some(0.0));
    }

    #[test]
    fn sub_threshold_jitter_is_ignored() {
        let threshold = 0.05;
        let dt = 0.02;
        // alternating ±0.4·threshold·dt gives steps of 0.8·threshold·dt
        let amp = 0.4 * threshold * dt;
        let traj = ramp(0.0, dt, 100, |i| if i % 2 == 0 { amp } else { -amp });
        assert_eq!(detect_motion_onset(&traj, threshold, &[]).unwrap(), None);
    }

    #[test]
    fn missing_position_channel_is_a_schema_error() {
        let layout = ChannelLayout::new(vec![Channel::orientation("hand")]);
        let traj = Trajectory::new(
            layout,
            "w",
            vec![Sample::new(0.0, vec![0.0; 3]), Sample::new(1.0, vec![1.0; 3])],
        )
        .unwrap();
        assert!(matches!(
            detect_motion_onset(&traj, 0.01, &[]),
            Err(CoreError::Schema(_))
        ));
    }

    #[test]
    fn streaming_detector_agrees_with_batch() {
        let traj = ramp(0.2, 0.02, 20, |_| 0.0);
        let mut det = OnsetDetector::new(&traj.channels, 0.05, &[]).unwrap();
        let mut fired = None;
        for s in &traj.samples {
            if let Some(start) = det.push(s) {
                fired = Some(start.t);
                break;
            }
        }
        assert_eq!(fired, detect_motion_onset(&traj, 0.05, &[]).unwrap());
    }

    fn line_promp(label: &str, slope: f64, duration: f64) -> ProMP {
        let basis = BasisConfig::uniform(4, 1).unwrap();
        // weights on a normalized basis approximate the line through the centers
        let mu = DVector::from_fn(4, |j, _| slope * j as f64 / 3.0);
        ProMP {
            basis,
            channels: ChannelLayout::new(vec![Channel::custom("x", ChannelKind::Position, 1)]),
            mu_w: mu,
            sigma_w: DMatrix::identity(4, 4) * 0.01,
            mean_duration: duration,
            demo_count: 3,
            task_label: label.into(),
            frame: "obj".into(),
        }
    }

    fn buffer_from(promp: &ProMP, fraction: f64, count: usize) -> ObservationBuffer {
        let pts = (0..count)
            .map(|i| {
                let t = fraction * promp.mean_duration * i as f64 / (count - 1) as f64;
                Sample::new(t, promp.mean_at(t / promp.mean_duration).as_slice().to_vec())
            })
            .collect();
        ObservationBuffer::started_at(0.0, pts).unwrap()
    }

    #[test]
    fn single_candidate_wins_regardless_of_score() {
        let a = line_promp("a", 1.0, 2.0);
        let far = line_promp("far", 50.0, 2.0);
        let buf = buffer_from(&a, 0.4, 10);
        let r = recognize(&buf, std::slice::from_ref(&far), &RecognitionConfig::default()).unwrap();
        assert_eq!(r.task_index, 0);
        assert_eq!(r.task_label, "far");
    }

    #[test]
    fn own_mean_scores_zero() {
        let a = line_promp("a", 1.0, 2.0);
        let b = line_promp("b", -3.0, 2.5);
        let buf = buffer_from(&a, 0.4, 15);
        let r = recognize(&buf, &[b, a], &RecognitionConfig::default()).unwrap();
        assert_eq!(r.task_label, "a");
        assert_eq!(r.task_index, 1);
        assert!(r.scores[1].score <= 1e-6);
    }

    #[test]
    fn errors_for_empty_context_and_short_buffers() {
        let a = line_promp("a", 1.0, 2.0);
        let buf = buffer_from(&a, 0.2, 5);
        assert_eq!(
            recognize(&buf, &[], &RecognitionConfig::default()),
            Err(CoreError::NoContext)
        );
        match recognize(&buf, &[a], &RecognitionConfig::default()) {
            Err(CoreError::InsufficientObservation { observed_fraction, .. }) => {
                assert!((observed_fraction - 0.2).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let a = line_promp("a", 1.0, 2.0);
        let b = line_promp("b", 1.0, 2.0);
        let buf = buffer_from(&line_promp("c", 2.0, 2.0), 0.5, 8);
        assert_eq!(
            recognize(&buf, &[a, b], &RecognitionConfig::default())
                .unwrap()
                .task_index,
            0
        );
    }

    #[test]
    fn masked_channels_do_not_count() {
        let a = line_promp("a", 1.0, 2.0);
        let buf = buffer_from(&line_promp("c", 5.0, 2.0), 0.5, 8);
        let cfg = RecognitionConfig {
            channel_mask: Some(vec![]),
            ..RecognitionConfig::default()
        };
        let r = recognize(&buf, &[a], &cfg).unwrap();
        assert_eq!(r.scores[0].score, 0.0);
    }

    #[test]
    fn larger_window_uses_at_least_as_many_points() {
        let a = line_promp("a", 1.0, 2.0);
        let buf = buffer_from(&a, 0.6, 40);
        let mut prev = 0;
        for w in [0.1, 0.25, 1.0 / 3.0, 0.5, 0.6] {
            let used = recognize(&buf, std::slice::from_ref(&a), &RecognitionConfig::with_window(w))
                .unwrap()
                .observations_used;
            assert!(used >= prev);
            prev = used;
        }
    }

    proptest! {
        #[test]
        fn permuting_candidates_permutes_scores(
            slopes in proptest::collection::vec(-5.0..5.0f64, 2..6),
            rot in 0usize..6,
            obs_slope in -5.0..5.0f64,
        ) {
            let cands: Vec<ProMP> = slopes.iter().enumerate()
                .map(|(i, &s)| line_promp(&format!("c{i}"), s, 1.0 + i as f64 * 0.1))
                .collect();
            let buf = buffer_from(&line_promp("obs", obs_slope, 1.0), 0.5, 12);
            let cfg = RecognitionConfig::default();
            let base = recognize(&buf, &cands, &cfg).unwrap();
            let k = rot % cands.len();
            let mut rotated = cands.clone();
            rotated.rotate_left(k);
            let r = recognize(&buf, &rotated, &cfg).unwrap();
            for (i, s) in r.scores.iter().enumerate() {
                let orig = (i + k) % cands.len();
                prop_assert_eq!(s, &base.scores[orig]);
                prop_assert!(s.score >= 0.0);
            }
            prop_assert_eq!(r.scores[r.task_index].score, base.scores[base.task_index].score);
        }

        #[test]
        fn onset_is_translation_invariant(shift_t in -100.0..100.0f64, shift_x in -10.0..10.0f64, start in 0usize..30) {
            let layout = ChannelLayout::new(vec![Channel::position("hand")]);
            let make = |dt0: f64, dx: f64| {
                let samples = (0..40).map(|i| {
                    let t = i as f64 * 0.02 + dt0;
                    let x = if i > start { (i - start) as f64 * 0.004 } else { 0.0 };
                    Sample::new(t, vec![x + dx, dx, -dx])
                }).collect();
                Trajectory::new(layout.clone(), "w", samples).unwrap()
            };
            let a = detect_motion_onset(&make(0.0, 0.0), 0.05, &[]).unwrap().unwrap();
            let b = detect_motion_onset(&make(shift_t, shift_x), 0.05, &[]).unwrap().unwrap();
            prop_assert!((b - a - shift_t).abs() < 1e-9);
        }
    }
}
