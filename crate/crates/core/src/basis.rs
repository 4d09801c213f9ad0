//! Normalized Gaussian radial basis functions over the phase variable.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const DEFAULT_BASIS_COUNT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    /// Basis functions per dimension.
    pub m: usize,
    pub centers: Vec<f64>,
    pub bandwidth: f64,
    /// Stacked trajectory dimension.
    pub n: usize,
}

impl BasisConfig {
    /// `m` evenly spaced centers on `[0, 1]` with bandwidth `1 / (m - 1)`.
    pub fn uniform(m: usize, n: usize) -> Result<Self> {
        if m < 2 {
            return Err(CoreError::InvalidArgument(format!(
                "need at least 2 basis functions, got {m}"
            )));
        }
        let bandwidth = 1.0 / (m as f64 - 1.0);
        Self::with_bandwidth(m, n, bandwidth)
    }

    pub fn with_bandwidth(m: usize, n: usize, bandwidth: f64) -> Result<Self> {
        if m < 2 {
            return Err(CoreError::InvalidArgument(format!(
                "need at least 2 basis functions, got {m}"
            )));
        }
        let centers = (0..m).map(|j| j as f64 / (m as f64 - 1.0)).collect();
        let cfg = Self {
            m,
            centers,
            bandwidth,
            n,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.centers.len() != self.m {
            return Err(CoreError::Schema(format!(
                "basis declares m = {} with {} centers",
                self.m,
                self.centers.len()
            )));
        }
        if self.n == 0 {
            return Err(CoreError::Schema("basis dimension n is zero".into()));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(CoreError::Schema(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        let in_range = self.centers.iter().all(|c| (0.0..=1.0).contains(c));
        let sorted = self.centers.windows(2).all(|w| w[0] <= w[1]);
        if !in_range || !sorted {
            return Err(CoreError::Schema("basis centers must be sorted within [0, 1]".into()));
        }
        Ok(())
    }

    /// Length of the stacked weight vector, `n * m`.
    pub fn weight_len(&self) -> usize {
        self.n * self.m
    }

    /// Same centers and bandwidth for a different stacked dimension.
    pub fn for_dim(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    /// The `m` normalized basis values at one phase (shared by every dimension).
    pub fn row(&self, phase: f64) -> DVector<f64> {
        let (phase, _) = clamp_phase(phase);
        let two_h2 = 2.0 * self.bandwidth * self.bandwidth;
        let raw = DVector::from_iterator(
            self.m,
            self.centers.iter().map(|c| (-(phase - c).powi(2) / two_h2).exp()),
        );
        let total = raw.sum();
        raw / total
    }

    /// Design matrix with one row per phase, `phases.len() x m`.
    pub fn design(&self, phases: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(phases.len(), self.m);
        for (i, &p) in phases.iter().enumerate() {
            out.set_row(i, &self.row(p).transpose());
        }
        out
    }
}

/// Clamps to `[0, 1]`; the flag reports whether clamping happened.
pub fn clamp_phase(phase: f64) -> (f64, bool) {
    if phase < 0.0 {
        (0.0, true)
    } else if phase > 1.0 {
        (1.0, true)
    } else {
        (phase, false)
    }
}

/// Block-diagonal `n x (n*m)` basis matrix at one phase.
///
/// Phases outside `[0, 1]` are clamped with a warning.
pub fn eval_basis(basis: &BasisConfig, phase: f64) -> DMatrix<f64> {
    let (p, clamped) = clamp_phase(phase);
    if clamped {
        warn!("phase {phase} outside [0, 1], clamped to {p}");
    }
    let row = basis.row(p);
    let mut phi = DMatrix::zeros(basis.n, basis.weight_len());
    for d in 0..basis.n {
        phi.view_mut((d, d * basis.m), (1, basis.m)).copy_from(&row.transpose());
    }
    phi
}

/// `Φ w` without materializing the block-diagonal matrix.
pub(crate) fn apply_basis(basis: &BasisConfig, phase: f64, w: &DVector<f64>) -> DVector<f64> {
    let row = basis.row(phase);
    DVector::from_iterator(basis.n, (0..basis.n).map(|d| row.dot(&w.rows(d * basis.m, basis.m))))
}
