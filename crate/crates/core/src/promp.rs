//! Probabilistic movement primitives.
//!
//! A primitive is a Gaussian over the weights of a block-diagonal radial basis
//! model: every stacked trajectory dimension shares the same `m` basis
//! functions and owns its own `m` weights. Weight vectors are laid out
//! dimension-major, `[w_dim0 (m), w_dim1 (m), ...]`.
//!
//! Fitting runs one ridge regression per demonstration and takes the maximum
//! likelihood mean and (biased, `1/D`) covariance of the resulting weights.
//! Conditioning applies the Gaussian update one observation at a time in
//! phase order, which for independent observation noise is the same as
//! conditioning on all observations jointly.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{apply_basis, BasisConfig};
use crate::error::{CoreError, Result};
use crate::linalg::{cholesky, floor_psd, min_eigenvalue, symmetrize};
use crate::trajectory::{normalize_phase, ChannelLayout, PhaseTrajectory, Sample, Trajectory};

/// Ridge factor used when fitting demonstrations.
pub const DEFAULT_RIDGE: f64 = 1e-12;
/// Observation variance used when an observation is treated as exact.
pub const DEFAULT_OBSERVATION_NOISE: f64 = 1e-6;
/// Diagonal jitter added to a singular innovation matrix.
pub const INNOVATION_JITTER: f64 = 1e-10;
pub const PROMP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ProMP {
    pub basis: BasisConfig,
    pub channels: ChannelLayout,
    pub mu_w: DVector<f64>,
    pub sigma_w: DMatrix<f64>,
    pub mean_duration: f64,
    pub demo_count: usize,
    pub task_label: String,
    pub frame: String,
}

/// One conditioning target `{y*, Σ*_y}` at a phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationPoint {
    pub phase: f64,
    pub values: Vec<f64>,
    /// Diagonal of the observation noise covariance.
    pub noise: Vec<f64>,
}

impl ObservationPoint {
    pub fn new(phase: f64, values: Vec<f64>, noise: Vec<f64>) -> Self {
        Self { phase, values, noise }
    }

    /// Observation with the same variance on every dimension.
    pub fn isotropic(phase: f64, values: Vec<f64>, variance: f64) -> Self {
        let noise = vec![variance; values.len()];
        Self { phase, values, noise }
    }
}

/// Diagnostics from a conditioning call.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Number of observations whose innovation matrix needed jitter.
    pub jittered: usize,
    /// Negative eigenvalue mass removed from the posterior covariance.
    pub floored_mass: f64,
}

/// Ridge regression of one phase-normalized trajectory onto the basis.
///
/// Solves `(BᵀB + λI) w_d = Bᵀ ξ_d` for every dimension `d`, where `B` holds
/// one basis row per phase sample. This is the block-diagonal form of the
/// stacked system, so one factorization serves every dimension.
pub fn fit_weights(phase_traj: &PhaseTrajectory, basis: &BasisConfig, ridge: f64) -> Result<DVector<f64>> {
    basis.validate()?;
    let n = phase_traj.dim();
    if basis.n != n {
        return Err(CoreError::Schema(format!(
            "basis is for {} dimensions, trajectory has {n}",
            basis.n
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(CoreError::InvalidArgument(format!(
            "ridge factor must be >= 0, got {ridge}"
        )));
    }
    if phase_traj.samples.len() < basis.m {
        return Err(CoreError::DegenerateInput(format!(
            "{} phase samples cannot determine {} basis weights",
            phase_traj.samples.len(),
            basis.m
        )));
    }
    let phases: Vec<f64> = phase_traj.samples.iter().map(|s| s.phase).collect();
    let design = basis.design(&phases);
    let mut gram = design.transpose() * &design;
    for j in 0..basis.m {
        gram[(j, j)] += ridge;
    }
    let chol = cholesky(&gram)
        .ok_or_else(|| CoreError::Singular(format!("normal equations are not positive definite (ridge {ridge})")))?;
    let targets = DMatrix::from_fn(phases.len(), n, |i, d| phase_traj.samples[i].values[d]);
    let rhs = design.transpose() * targets;
    let sol = chol.solve(&rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Singular("ridge solution is not finite".into()));
    }
    let mut w = DVector::zeros(basis.weight_len());
    for d in 0..n {
        w.rows_mut(d * basis.m, basis.m).copy_from(&sol.column(d));
    }
    Ok(w)
}

/// Learns a primitive from a set of demonstrations.
pub fn fit_promp(
    demos: &[Trajectory],
    basis: &BasisConfig,
    ridge: f64,
    task_label: &str,
    frame: &str,
) -> Result<ProMP> {
    if demos.len() < 2 {
        return Err(CoreError::DegenerateInput(format!(
            "need at least 2 demonstrations, got {}",
            demos.len()
        )));
    }
    let layout = &demos[0].channels;
    if let Some(i) = demos.iter().position(|d| &d.channels != layout) {
        return Err(CoreError::Schema(format!(
            "demonstration {i} has a different channel layout"
        )));
    }
    let basis = basis.for_dim(layout.dim());
    let mut weights = Vec::with_capacity(demos.len());
    let mut durations = Vec::with_capacity(demos.len());
    for demo in demos {
        let phase = normalize_phase(demo)?;
        durations.push(phase.source_duration);
        weights.push(fit_weights(&phase, &basis, ridge)?);
    }
    let count = demos.len() as f64;
    let mut mu_w = DVector::zeros(basis.weight_len());
    for w in &weights {
        mu_w += w;
    }
    mu_w /= count;
    let mut sigma_w = DMatrix::zeros(basis.weight_len(), basis.weight_len());
    for w in &weights {
        let dev = w - &mu_w;
        sigma_w.ger(1.0, &dev, &dev, 1.0);
    }
    sigma_w /= count;
    floor_psd(&mut sigma_w);
    Ok(ProMP {
        basis,
        channels: layout.clone(),
        mu_w,
        sigma_w,
        mean_duration: durations.iter().sum::<f64>() / count,
        demo_count: demos.len(),
        task_label: task_label.to_string(),
        frame: frame.to_string(),
    })
}

impl ProMP {
    pub fn dim(&self) -> usize {
        self.basis.n
    }

    pub fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        self.channels.validate()?;
        let len = self.basis.weight_len();
        if self.channels.dim() != self.basis.n {
            return Err(CoreError::Schema(format!(
                "channels stack to {} dimensions, basis expects {}",
                self.channels.dim(),
                self.basis.n
            )));
        }
        if self.mu_w.len() != len || self.sigma_w.shape() != (len, len) {
            return Err(CoreError::Schema(format!("weight statistics do not match n*m = {len}")));
        }
        if !(self.mean_duration > 0.0 && self.mean_duration.is_finite()) {
            return Err(CoreError::Schema("mean duration must be positive".into()));
        }
        if self.demo_count < 1 {
            return Err(CoreError::Schema("demo count must be at least 1".into()));
        }
        if self.mu_w.iter().chain(self.sigma_w.iter()).any(|v| !v.is_finite()) {
            return Err(CoreError::Schema("weight statistics are not finite".into()));
        }
        let asym = (&self.sigma_w - self.sigma_w.transpose()).abs().max();
        let trace = self.sigma_w.trace().abs();
        if asym > 1e-12 * trace.max(1.0) {
            return Err(CoreError::Schema("sigma_w is not symmetric".into()));
        }
        if min_eigenvalue(&self.sigma_w) < -1e-10 * trace {
            return Err(CoreError::Schema("sigma_w is not positive semidefinite".into()));
        }
        Ok(())
    }

    /// Mean value `Φ_υ μ_w` at one phase.
    pub fn mean_at(&self, phase: f64) -> DVector<f64> {
        apply_basis(&self.basis, phase, &self.mu_w)
    }

    /// Per-dimension variance `diag(Φ_υ Σ_w Φ_υᵀ)` at one phase.
    pub fn variance_at(&self, phase: f64) -> DVector<f64> {
        let m = self.basis.m;
        let row = self.basis.row(phase);
        DVector::from_iterator(
            self.basis.n,
            (0..self.basis.n).map(|d| {
                let block = self.sigma_w.view((d * m, d * m), (m, m));
                row.dot(&(block * &row))
            }),
        )
    }

    /// Mean trajectory with `n_samples` evenly spaced phases over `duration` seconds.
    pub fn mean_trajectory(&self, n_samples: usize, duration: f64) -> Result<Trajectory> {
        if n_samples < 2 {
            return Err(CoreError::InvalidArgument(format!(
                "need at least 2 samples, got {n_samples}"
            )));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "duration must be positive, got {duration}"
            )));
        }
        let last = (n_samples - 1) as f64;
        let samples = (0..n_samples)
            .map(|i| {
                let phase = i as f64 / last;
                Sample::new(duration * phase, self.mean_at(phase).as_slice().to_vec())
            })
            .collect();
        Trajectory::new(self.channels.clone(), self.frame.clone(), samples)
    }

    /// Mean at each of the given phases, one row per phase.
    pub fn mean_at_phases(&self, phases: &[f64]) -> Vec<DVector<f64>> {
        phases.iter().map(|&p| self.mean_at(p)).collect()
    }

    /// Posterior primitive given observations. The receiver is not modified.
    pub fn condition(&self, obs: &[ObservationPoint]) -> Result<ProMP> {
        self.condition_with_report(obs).map(|(p, _)| p)
    }

    pub fn condition_with_report(&self, obs: &[ObservationPoint]) -> Result<(ProMP, ConditionReport)> {
        let n = self.basis.n;
        let m = self.basis.m;
        for (i, o) in obs.iter().enumerate() {
            if !(0.0..=1.0).contains(&o.phase) {
                return Err(CoreError::InvalidArgument(format!(
                    "observation {i} has phase {} outside [0, 1]",
                    o.phase
                )));
            }
            if o.values.len() != n || o.noise.len() != n {
                return Err(CoreError::Schema(format!(
                    "observation {i} has {} values and {} noise entries, expected {n}",
                    o.values.len(),
                    o.noise.len()
                )));
            }
            if o.noise.iter().any(|v| v.is_nan() || *v < 0.0) || o.values.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::InvalidArgument(format!(
                    "observation {i} has negative noise or non-finite values"
                )));
            }
        }
        let mut order: Vec<usize> = (0..obs.len()).collect();
        order.sort_by(|&a, &b| obs[a].phase.total_cmp(&obs[b].phase));

        let mut mu = self.mu_w.clone();
        let mut sigma = self.sigma_w.clone();
        let mut report = ConditionReport::default();
        for idx in order {
            let o = &obs[idx];
            let row = self.basis.row(o.phase);
            // K = Σ Φᵀ, (n*m) x n
            let mut k = DMatrix::zeros(n * m, n);
            for d in 0..n {
                let col = sigma.columns(d * m, m) * &row;
                k.set_column(d, &col);
            }
            // S = Φ Σ Φᵀ + Σ*_y
            let mut s = DMatrix::from_fn(n, n, |a, b| row.dot(&k.view((a * m, b), (m, 1))));
            for d in 0..n {
                s[(d, d)] += o.noise[d];
            }
            symmetrize(&mut s);
            let chol = match cholesky(&s) {
                Some(c) => c,
                None => {
                    report.jittered += 1;
                    for d in 0..n {
                        s[(d, d)] += INNOVATION_JITTER;
                    }
                    cholesky(&s).ok_or_else(|| {
                        CoreError::Singular(format!("innovation matrix at phase {} is singular", o.phase))
                    })?
                }
            };
            // L = K S⁻¹, computed as (S⁻¹ Kᵀ)ᵀ
            let gain = chol.solve(&k.transpose()).transpose();
            let predicted = apply_basis(&self.basis, o.phase, &mu);
            let residual = DVector::from_column_slice(&o.values) - predicted;
            mu += &gain * residual;
            sigma -= &gain * k.transpose();
            symmetrize(&mut sigma);
        }
        report.floored_mass = floor_psd(&mut sigma);
        Ok((
            ProMP {
                mu_w: mu,
                sigma_w: sigma,
                ..self.clone()
            },
            report,
        ))
    }

    pub fn to_document(&self) -> ProMPDocument {
        ProMPDocument {
            version: PROMP_FORMAT_VERSION,
            task_label: self.task_label.clone(),
            frame: self.frame.clone(),
            channels: self.channels.clone(),
            basis: BasisDocument {
                m: self.basis.m,
                centers: self.basis.centers.clone(),
                bandwidth: self.basis.bandwidth,
            },
            mu_w: self.mu_w.as_slice().to_vec(),
            // nalgebra is column-major; the file is row-major
            sigma_w: self.sigma_w.transpose().as_slice().to_vec(),
            mean_duration: self.mean_duration,
            demo_count: self.demo_count,
        }
    }

    pub fn from_document(doc: ProMPDocument) -> Result<Self> {
        if doc.version != PROMP_FORMAT_VERSION {
            return Err(CoreError::Version {
                found: doc.version,
                supported: PROMP_FORMAT_VERSION,
            });
        }
        let n = doc.channels.dim();
        let basis = BasisConfig {
            m: doc.basis.m,
            centers: doc.basis.centers,
            bandwidth: doc.basis.bandwidth,
            n,
        };
        basis.validate()?;
        let len = basis.weight_len();
        if doc.mu_w.len() != len {
            return Err(CoreError::field(
                "mu_w",
                format!("expected {len} entries, found {}", doc.mu_w.len()),
            ));
        }
        if doc.sigma_w.len() != len * len {
            return Err(CoreError::field(
                "sigma_w",
                format!("expected {} entries, found {}", len * len, doc.sigma_w.len()),
            ));
        }
        let promp = ProMP {
            basis,
            channels: doc.channels,
            mu_w: DVector::from_vec(doc.mu_w),
            sigma_w: DMatrix::from_row_slice(len, len, &doc.sigma_w),
            mean_duration: doc.mean_duration,
            demo_count: doc.demo_count,
            task_label: doc.task_label,
            frame: doc.frame,
        };
        promp.validate()?;
        Ok(promp)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("ProMP document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProMPDocument = serde_json::from_str(text).map_err(|e| CoreError::json("promp", e))?;
        Self::from_document(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| CoreError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CoreError::Parse { location, message } => CoreError::Parse {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisDocument {
    pub m: usize,
    pub centers: Vec<f64>,
    pub bandwidth: f64,
}

/// On-disk form of a primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProMPDocument {
    pub version: u32,
    pub task_label: String,
    pub frame: String,
    pub channels: ChannelLayout,
    pub basis: BasisDocument,
    pub mu_w: Vec<f64>,
    /// Row-major `(n*m) x (n*m)`.
    pub sigma_w: Vec<f64>,
    pub mean_duration: f64,
    pub demo_count: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::eval_basis;
    use crate::trajectory::{Channel, ChannelKind, PhaseSample};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_layout(n: usize) -> ChannelLayout {
        ChannelLayout::new(
            (0..n)
                .map(|i| Channel::custom(&format!("x{i}"), ChannelKind::Position, 1))
                .collect(),
        )
    }

    fn phase_traj_from(basis: &BasisConfig, w: &DVector<f64>, count: usize) -> PhaseTrajectory {
        let samples = (0..count)
            .map(|i| {
                let p = i as f64 / (count - 1) as f64;
                PhaseSample {
                    phase: p,
                    values: (eval_basis(basis, p) * w).as_slice().to_vec(),
                }
            })
            .collect();
        PhaseTrajectory {
            channels: scalar_layout(basis.n),
            samples,
            source_duration: 1.0,
        }
    }

    fn demo_from(basis: &BasisConfig, w: &DVector<f64>, count: usize, duration: f64) -> Trajectory {
        let p = phase_traj_from(basis, w, count);
        let samples = p
            .samples
            .into_iter()
            .map(|s| Sample::new(s.phase * duration, s.values))
            .collect();
        Trajectory::new(scalar_layout(basis.n), "obj", samples).unwrap()
    }

    #[test]
    fn recovers_generating_weights() {
        let basis = BasisConfig::uniform(20, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w_true = DVector::from_fn(40, |_, _| rng.random_range(-1.0..1.0));
        let traj = phase_traj_from(&basis, &w_true, 400);
        let w = fit_weights(&traj, &basis, DEFAULT_RIDGE).unwrap();
        assert!((&w - &w_true).norm() / w_true.norm() < 1e-6);
    }

    #[test]
    fn constant_is_reproduced() {
        let basis = BasisConfig::uniform(20, 1).unwrap();
        let traj = PhaseTrajectory {
            channels: scalar_layout(1),
            samples: (0..100)
                .map(|i| PhaseSample {
                    phase: i as f64 / 99.0,
                    values: vec![0.73],
                })
                .collect(),
            source_duration: 1.0,
        };
        let w = fit_weights(&traj, &basis, DEFAULT_RIDGE).unwrap();
        for s in &traj.samples {
            let y = apply_basis(&basis, s.phase, &w)[0];
            assert!((y - 0.73).abs() < 1e-9, "{y}");
        }
    }

    #[test]
    fn larger_ridge_shrinks_weights() {
        let basis = BasisConfig::uniform(10, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w_true = DVector::from_fn(10, |_, _| rng.random_range(-2.0..2.0));
        let traj = phase_traj_from(&basis, &w_true, 80);
        let small = fit_weights(&traj, &basis, 1e-12).unwrap().norm();
        let mut prev = small;
        for ridge in [1e-3, 1e-1, 1.0, 1e2, 1e6] {
            let norm = fit_weights(&traj, &basis, ridge).unwrap().norm();
            assert!(norm < prev, "ridge {ridge}: {norm} !< {prev}");
            prev = norm;
        }
    }

    #[test]
    fn zero_ridge_on_underdetermined_system_is_singular() {
        let basis = BasisConfig::uniform(6, 1).unwrap();
        // every sample at the same phase: rank-one design
        let traj = PhaseTrajectory {
            channels: scalar_layout(1),
            samples: (0..8)
                .map(|_| PhaseSample {
                    phase: 0.5,
                    values: vec![1.0],
                })
                .collect(),
            source_duration: 1.0,
        };
        assert!(matches!(fit_weights(&traj, &basis, 0.0), Err(CoreError::Singular(_))));
        assert!(fit_weights(&traj, &basis, 1e-3).is_ok());
    }

    #[test]
    fn identical_demos_have_zero_spread() {
        let basis = BasisConfig::uniform(8, 1).unwrap();
        let w = DVector::from_fn(8, |i, _| (i as f64 * 0.7).cos());
        let demo = demo_from(&basis, &w, 60, 2.0);
        let promp = fit_promp(
            &[demo.clone(), demo.clone(), demo.clone()],
            &basis,
            DEFAULT_RIDGE,
            "t",
            "obj",
        )
        .unwrap();
        assert!(promp.sigma_w.abs().max() < 1e-10);
        let single = fit_weights(&normalize_phase(&demo).unwrap(), &basis, DEFAULT_RIDGE).unwrap();
        assert!((&promp.mu_w - single).norm() < 1e-12);
        assert_eq!(promp.demo_count, 3);
        assert!((promp.mean_duration - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_demo_statistics_match_hand_computation() {
        let basis = BasisConfig::uniform(5, 1).unwrap();
        let w1 = DVector::from_vec(vec![0.1, 0.4, -0.2, 0.3, 0.0]);
        let w2 = DVector::from_vec(vec![0.5, -0.1, 0.2, 0.1, 0.6]);
        let d1 = demo_from(&basis, &w1, 50, 1.0);
        let d2 = demo_from(&basis, &w2, 50, 3.0);
        let promp = fit_promp(&[d1.clone(), d2.clone()], &basis, DEFAULT_RIDGE, "t", "obj").unwrap();
        let f1 = fit_weights(&normalize_phase(&d1).unwrap(), &basis, DEFAULT_RIDGE).unwrap();
        let f2 = fit_weights(&normalize_phase(&d2).unwrap(), &basis, DEFAULT_RIDGE).unwrap();
        let mean = (&f1 + &f2) / 2.0;
        let diff = &f1 - &f2;
        let cov = &diff * diff.transpose() / 4.0;
        assert!((promp.mu_w - mean).norm() < 1e-12);
        assert!((promp.sigma_w - cov).norm() < 1e-10);
        assert!((promp.mean_duration - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_demo_list_is_invariant() {
        let basis = BasisConfig::uniform(6, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let demos: Vec<Trajectory> = (0..4)
            .map(|_| {
                let w = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
                demo_from(&basis, &w, 40, rng.random_range(1.0..2.0))
            })
            .collect();
        let doubled: Vec<Trajectory> = demos.iter().flat_map(|d| [d.clone(), d.clone()]).collect();
        let a = fit_promp(&demos, &basis, DEFAULT_RIDGE, "t", "obj").unwrap();
        let b = fit_promp(&doubled, &basis, DEFAULT_RIDGE, "t", "obj").unwrap();
        assert!((&a.mu_w - &b.mu_w).norm() <= 1e-12 * a.mu_w.norm());
        assert!((&a.sigma_w - &b.sigma_w).norm() <= 1e-12 * a.sigma_w.norm());
    }

    #[test]
    fn mismatched_layouts_are_rejected() {
        let basis = BasisConfig::uniform(4, 1).unwrap();
        let w = DVector::from_element(4, 0.5);
        let a = demo_from(&basis, &w, 20, 1.0);
        let mut b = a.clone();
        b.channels = ChannelLayout::new(vec![Channel::custom("y", ChannelKind::Position, 1)]);
        assert!(matches!(
            fit_promp(&[a, b], &basis, DEFAULT_RIDGE, "t", "obj"),
            Err(CoreError::Schema(_))
        ));
    }

    #[test]
    fn mean_trajectory_time_modulation() {
        let basis = BasisConfig::uniform(8, 1).unwrap();
        let w = DVector::from_fn(8, |i, _| i as f64 * 0.1);
        let demo = demo_from(&basis, &w, 30, 2.0);
        let promp = fit_promp(&[demo.clone(), demo.clone()], &basis, DEFAULT_RIDGE, "t", "obj").unwrap();
        let base = promp.mean_trajectory(30, promp.mean_duration).unwrap();
        for (a, b) in base.samples.iter().zip(&demo.samples) {
            assert!((a.values[0] - b.values[0]).abs() < 1e-6);
        }
        let slow = promp.mean_trajectory(30, 2.0 * promp.mean_duration).unwrap();
        for (a, b) in base.samples.iter().zip(&slow.samples) {
            assert_eq!(a.values, b.values);
            assert!((2.0 * a.t - b.t).abs() < 1e-12);
        }
        assert!(promp.mean_trajectory(1, 1.0).is_err());
        assert!(promp.mean_trajectory(5, 0.0).is_err());
    }

    fn toy_promp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ProMP {
        let basis = BasisConfig::uniform(m, n).unwrap();
        let len = n * m;
        let a = DMatrix::from_fn(len, len, |_, _| rng.random_range(-1.0..1.0));
        ProMP {
            basis,
            channels: scalar_layout(n),
            mu_w: DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0)),
            sigma_w: &a * a.transpose() + DMatrix::identity(len, len) * 0.1,
            mean_duration: 1.0,
            demo_count: 5,
            task_label: "toy".into(),
            frame: "obj".into(),
        }
    }

    #[test]
    fn conditioning_on_prior_mean_keeps_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let promp = toy_promp(&mut rng, 2, 3);
        let y = promp.mean_at(0.4);
        let post = promp
            .condition(&[ObservationPoint::isotropic(0.4, y.as_slice().to_vec(), 1e-6)])
            .unwrap();
        assert_eq!(post.mu_w, promp.mu_w);
        assert!(post.sigma_w.trace() < promp.sigma_w.trace());
    }

    #[test]
    fn conditioning_pins_the_observation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let promp = toy_promp(&mut rng, 2, 3);
        let eps = 1e-8;
        let post = promp
            .condition(&[ObservationPoint::isotropic(0.6, vec![0.3, -0.8], eps)])
            .unwrap();
        let y = post.mean_at(0.6);
        assert!((y[0] - 0.3).abs() < 1e-4 && (y[1] + 0.8).abs() < 1e-4);
        let var = post.variance_at(0.6);
        assert!(var.iter().all(|&v| v <= eps + 1e-6), "{var}");
    }

    #[test]
    fn exact_observation_on_degenerate_prior_is_jittered() {
        let basis = BasisConfig::uniform(3, 1).unwrap();
        let promp = ProMP {
            basis,
            channels: scalar_layout(1),
            mu_w: DVector::zeros(3),
            sigma_w: DMatrix::zeros(3, 3),
            mean_duration: 1.0,
            demo_count: 2,
            task_label: "flat".into(),
            frame: "obj".into(),
        };
        let (post, report) = promp
            .condition_with_report(&[ObservationPoint::isotropic(0.5, vec![1.0], 0.0)])
            .unwrap();
        assert_eq!(report.jittered, 1);
        assert_eq!(post.mu_w, promp.mu_w);
    }

    #[test]
    fn conditioning_validates_observations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let promp = toy_promp(&mut rng, 1, 3);
        assert!(promp
            .condition(&[ObservationPoint::isotropic(1.5, vec![0.0], 1e-6)])
            .is_err());
        assert!(promp
            .condition(&[ObservationPoint::isotropic(0.5, vec![0.0, 1.0], 1e-6)])
            .is_err());
        assert!(promp
            .condition(&[ObservationPoint::new(0.5, vec![0.0], vec![-1.0])])
            .is_err());
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let promp = toy_promp(&mut rng, 2, 4);
        let back = ProMP::from_json(&promp.to_json()).unwrap();
        assert_eq!(back, promp);
    }

    #[test]
    fn document_errors_are_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut doc = toy_promp(&mut rng, 1, 3).to_document();
        doc.version = 9;
        assert!(matches!(
            ProMP::from_document(doc.clone()),
            Err(CoreError::Version { .. })
        ));
        doc.version = 1;
        doc.mu_w.pop();
        assert!(matches!(ProMP::from_document(doc), Err(CoreError::Parse { .. })));
        assert!(matches!(
            ProMP::from_json("{\"version\": 1,"),
            Err(CoreError::Parse { .. })
        ));
    }
}
