//! Rigid transforms and frame changes for stacked pose vectors.

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::trajectory::{ChannelKind, ChannelLayout};

/// Allowed deviation of an incoming quaternion from unit norm.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;
/// Allowed `‖RᵀR − I‖` for a rotation matrix.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

/// Rigid transform mapping object-frame coordinates into the parent frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    /// Translation plus a rotation of `yaw` radians about +z.
    pub fn from_yaw(translation: Vector3<f64>, yaw: f64) -> Self {
        Self::new(translation, UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw))
    }

    /// Position plus `(w, x, y, z)` quaternion, normalized if within tolerance.
    pub fn from_position_quaternion(position: [f64; 3], quaternion: [f64; 4]) -> Result<Self> {
        if position.iter().chain(quaternion.iter()).any(|v| !v.is_finite()) {
            return Err(CoreError::NonRigid("pose has non-finite components".into()));
        }
        let q = nalgebra::Quaternion::new(quaternion[0], quaternion[1], quaternion[2], quaternion[3]);
        let norm = q.norm();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(CoreError::NonRigid(format!("quaternion norm {norm} is not 1")));
        }
        Ok(Self::new(Vector3::from(position), UnitQuaternion::from_quaternion(q)))
    }

    /// Homogeneous matrix; rejected unless the upper-left block is a proper rotation.
    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonRigid("matrix has non-finite entries".into()));
        }
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(CoreError::NonRigid("bottom row must be [0, 0, 0, 1]".into()));
        }
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        let ortho = (r.transpose() * r - Matrix3::identity()).norm();
        if ortho > ORTHONORMAL_TOLERANCE {
            return Err(CoreError::NonRigid(format!("‖RᵀR − I‖ = {ortho:e}")));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            return Err(CoreError::NonRigid(format!("rotation determinant {det}")));
        }
        let rot = Rotation3::from_matrix_unchecked(r);
        Ok(Self::new(
            m.fixed_view::<3, 1>(0, 3).into_owned(),
            UnitQuaternion::from_rotation_matrix(&rot),
        ))
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut out = self.rotation.to_homogeneous();
        out.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        out
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self::new(-(inv * self.translation), inv)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Pose) -> Self {
        Self::new(
            self.translation + self.rotation * other.translation,
            self.rotation * other.rotation,
        )
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotation vector of `R_self · R(v)`, picking the representation closest
    /// to `near` when given.
    pub fn transform_rotation_vector(&self, v: &Vector3<f64>, near: Option<&Vector3<f64>>) -> Vector3<f64> {
        let r = self.rotation * UnitQuaternion::from_scaled_axis(*v);
        let out = r.scaled_axis();
        match near {
            Some(reference) => unwrap_rotation_vector(&out, reference),
            None => out,
        }
    }

    pub fn to_wire(&self) -> WirePose {
        let q = self.rotation.quaternion();
        WirePose {
            position: [self.translation.x, self.translation.y, self.translation.z],
            quaternion: [q.w, q.i, q.j, q.k],
        }
    }

    /// Pose expressed as `[x, y, z, rx, ry, rz]` with a rotation vector.
    pub fn to_pose_vector(&self) -> [f64; 6] {
        let r = self.rotation.scaled_axis();
        [
            self.translation.x,
            self.translation.y,
            self.translation.z,
            r.x,
            r.y,
            r.z,
        ]
    }

    pub fn from_pose_vector(v: &[f64; 6]) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::NonRigid("pose vector has non-finite components".into()));
        }
        Ok(Self::new(
            Vector3::new(v[0], v[1], v[2]),
            UnitQuaternion::from_scaled_axis(Vector3::new(v[3], v[4], v[5])),
        ))
    }

    /// Maps a stacked value vector into the parent frame.
    ///
    /// Three-dimensional position channels are rotated and translated,
    /// three-dimensional orientation channels are rotated, anything else is
    /// copied. `near` keeps rotation vectors continuous along a trajectory.
    pub fn transform_values(&self, layout: &ChannelLayout, values: &[f64], near: Option<&[f64]>) -> Vec<f64> {
        let mut out = values.to_vec();
        for (off, ch) in layout.slices() {
            if ch.dim != 3 {
                continue;
            }
            let v = Vector3::new(values[off], values[off + 1], values[off + 2]);
            let mapped = match ch.kind {
                ChannelKind::Position => self.transform_point(&v),
                ChannelKind::Orientation => {
                    let reference = near.map(|n| Vector3::new(n[off], n[off + 1], n[off + 2]));
                    self.transform_rotation_vector(&v, reference.as_ref())
                }
            };
            out[off..off + 3].copy_from_slice(mapped.as_slice());
        }
        out
    }
}

/// Among the rotation vectors equivalent to `v`, the one closest to `reference`.
pub fn unwrap_rotation_vector(v: &Vector3<f64>, reference: &Vector3<f64>) -> Vector3<f64> {
    let angle = v.norm();
    let axis = if angle > 1e-12 {
        v / angle
    } else if reference.norm() > 1e-12 {
        reference.normalize()
    } else {
        return *v;
    };
    let tau = std::f64::consts::TAU;
    let mut best = *v;
    let mut best_dist = (v - reference).norm();
    for k in [-2.0, -1.0, 1.0, 2.0] {
        let cand = axis * (angle + k * tau);
        let d = (cand - reference).norm();
        if d < best_dist {
            best = cand;
            best_dist = d;
        }
    }
    best
}

/// Geodesic angle between the rotations of two rotation vectors.
pub fn rotation_distance(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ra = UnitQuaternion::from_scaled_axis(*a);
    let rb = UnitQuaternion::from_scaled_axis(*b);
    ra.angle_to(&rb)
}

/// Wire form: position in meters, unit quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WirePose {
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
}

impl TryFrom<WirePose> for Pose {
    type Error = CoreError;

    fn try_from(w: WirePose) -> Result<Self> {
        Pose::from_position_quaternion(w.position, w.quaternion)
    }
}

impl From<Pose> for WirePose {
    fn from(p: Pose) -> Self {
        p.to_wire()
    }
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_wire().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = WirePose::deserialize(d)?;
        Pose::try_from(w).map_err(serde::de::Error::custom)
    }
}
