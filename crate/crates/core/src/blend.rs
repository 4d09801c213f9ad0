//! Sigmoid hand-over from a primitive's tail to the first affordance waypoint.
//!
//! The raw logistic `σ(x) = 1 / (1 + a·exp(−b(x − c)))` never reaches 0 or 1
//! on `[0, 1]`, so the coefficient is the affinely renormalized logistic
//! `α(x) = (σ(x) − σ(0)) / (σ(1) − σ(0))`, which hits both endpoints exactly
//! while keeping the logistic shape.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::trajectory::{Sample, Trajectory};

/// Default target for `α(0.7)`.
pub const DEFAULT_BLEND_TARGET: f64 = 0.85;
/// Fraction of the proposal replaced by the blend window.
pub const DEFAULT_BLEND_FRACTION: f64 = 0.3;
/// Phase at which the shaping constraint is imposed.
pub const SHAPE_POINT: f64 = 0.7;
/// Bounds on `α(SHAPE_POINT)`.
pub const SHAPE_RANGE: (f64, f64) = (0.8, 0.9);
/// Logistic midpoint. Late enough that the raw logistic is within 1e-3 of
/// 0 and 1 at the window ends for every admissible target.
pub const BLEND_CENTER: f64 = 0.63;
/// Largest raw endpoint offset accepted from the solver.
pub const RAW_ENDPOINT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendProfile {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Number of blend intervals; the window holds `n_b + 1` samples.
    pub n_b: usize,
}

impl BlendProfile {
    /// Raw logistic.
    pub fn sigma(&self, x: f64) -> f64 {
        1.0 / (1.0 + self.a * (-self.b * (x - self.c)).exp())
    }

    /// Renormalized coefficient on `[0, 1]`; exactly 0 at 0 and 1 at 1.
    pub fn alpha(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let lo = self.sigma(0.0);
        let hi = self.sigma(1.0);
        (self.sigma(x) - lo) / (hi - lo)
    }

    /// Coefficient for window sample `i` of `n_b + 1`.
    pub fn alpha_at(&self, i: usize) -> f64 {
        if i >= self.n_b {
            return 1.0;
        }
        self.alpha(i as f64 / self.n_b as f64)
    }

    pub fn with_samples(self, n_b: usize) -> Self {
        Self { n_b, ..self }
    }
}

fn shaped_alpha(b: f64) -> f64 {
    BlendProfile {
        a: 1.0,
        b,
        c: BLEND_CENTER,
        n_b: 1,
    }
    .alpha(SHAPE_POINT)
}

/// Finds `a = 1, c`, and `b` such that `α(0.7)` equals `target`.
///
/// The logistic midpoint is fixed; the closed-form slope for the raw
/// logistic seeds a bisection that lands the renormalized coefficient on the
/// target. `α(0.7)` rises monotonically with the slope, from the linear limit
/// 0.7 towards 1.
pub fn solve_blend_profile(target: f64, n_b: usize) -> Result<BlendProfile> {
    let (lo_bound, hi_bound) = SHAPE_RANGE;
    if !(target > lo_bound && target < hi_bound) {
        return Err(CoreError::Constraint(format!(
            "α({SHAPE_POINT}) = {target} must lie strictly inside ({lo_bound}, {hi_bound})"
        )));
    }
    if n_b == 0 {
        return Err(CoreError::Constraint("blend window needs at least one interval".into()));
    }
    let seed = (target / (1.0 - target)).ln() / (SHAPE_POINT - BLEND_CENTER);
    let (mut lo, mut hi) = (seed * 0.5, seed * 2.0);
    while shaped_alpha(lo) > target {
        lo *= 0.5;
    }
    while shaped_alpha(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shaped_alpha(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let profile = BlendProfile {
        a: 1.0,
        b: 0.5 * (lo + hi),
        c: BLEND_CENTER,
        n_b,
    };
    let shaped = profile.alpha(SHAPE_POINT);
    if profile.sigma(0.0) > RAW_ENDPOINT_TOLERANCE
        || profile.sigma(1.0) < 1.0 - RAW_ENDPOINT_TOLERANCE
        || !(shaped > lo_bound && shaped < hi_bound)
    {
        return Err(CoreError::Constraint(format!(
            "no logistic with midpoint {BLEND_CENTER} meets α({SHAPE_POINT}) = {target}"
        )));
    }
    Ok(profile)
}

/// Blends the samples of `tail` towards `target`.
///
/// Sample `i` becomes `(1 − α(i/n_b))·y_i + α(i/n_b)·target`, so the first
/// sample is untouched and the last equals `target`.
pub fn blend(tail: &Trajectory, target: &[f64], profile: &BlendProfile) -> Result<Trajectory> {
    if tail.len() != profile.n_b + 1 {
        return Err(CoreError::Schema(format!(
            "blend window holds {} samples, profile expects {}",
            tail.len(),
            profile.n_b + 1
        )));
    }
    if target.len() != tail.dim() {
        return Err(CoreError::Schema(format!(
            "target has {} values, trajectory has {}",
            target.len(),
            tail.dim()
        )));
    }
    let samples = tail
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let alpha = profile.alpha_at(i);
            let values = s
                .values
                .iter()
                .zip(target)
                .map(|(y, q)| (1.0 - alpha) * y + alpha * q)
                .collect();
            Sample::new(s.t, values)
        })
        .collect();
    Trajectory::new(tail.channels.clone(), tail.frame.clone(), samples)
}
