//! Rotation losses and their gradients.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector4};
use serde::{Deserialize, Serialize};

use super::head::Upstream;
use crate::error::Error;
use crate::so3::{d_chord, d_quat, quat_to_rot, rotation_angle, RotationMatrix, UnitQuaternion};

/// Within this distance of π the angular-loss gradient scale is frozen.
pub const ANG_PI_CLAMP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `d_quat²`
    Quat,
    /// `d_chord²`
    #[default]
    Chord,
    /// `d_ang²`
    Ang,
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "quat" => Ok(Self::Quat),
            "chord" | "chordal" => Ok(Self::Chord),
            "ang" | "angular" => Ok(Self::Ang),
            other => Err(Error::InvalidConfig(format!("unknown loss `{other}`"))),
        }
    }
}

/// Ground-truth rotation in both forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationTarget {
    pub rot: RotationMatrix,
    pub quat: UnitQuaternion,
}

impl RotationTarget {
    pub fn from_quat(quat: UnitQuaternion) -> Self {
        Self { rot: quat_to_rot(&quat), quat }
    }

    pub fn from_rot(rot: RotationMatrix) -> Self {
        Self { rot, quat: crate::so3::rot_to_quat(&rot) }
    }
}

/// Loss value and its gradient with respect to the prediction.
///
/// The quaternion loss differentiates `q`; the chordal and angular losses
/// differentiate `R`.
pub fn loss_eval(kind: LossKind, rot: &RotationMatrix, quat: &UnitQuaternion, target: &RotationTarget) -> (f64, Upstream) {
    match kind {
        LossKind::Quat => {
            let q = quat.as_vector();
            let t = target.quat.as_vector();
            let nearest: Vector4<f64> = if (q - t).norm() <= (q + t).norm() { *t } else { -t };
            let d = d_quat(quat, &target.quat);
            (d * d, Upstream::Quat((q - nearest) * 2.0))
        }
        LossKind::Chord => {
            let d = d_chord(rot, &target.rot);
            (d * d, Upstream::Rot((rot.matrix() - target.rot.matrix()) * 2.0))
        }
        LossKind::Ang => {
            let rel = RotationMatrix::from_matrix_unchecked(rot.matrix() * target.rot.matrix().transpose());
            let theta = rotation_angle(&rel);
            let loss = theta * theta;
            if theta == 0.0 || theta >= PI {
                return (loss, Upstream::Rot(Matrix3::zeros()));
            }
            // ∂θ²/∂R agrees with (θ / 2 sin θ) ∂d_chord²/∂R on the tangent space.
            let sin = if PI - theta < ANG_PI_CLAMP { ANG_PI_CLAMP.sin() } else { theta.sin() };
            let scale = theta / (2.0 * sin);
            (loss, Upstream::Rot((rot.matrix() - target.rot.matrix()) * (2.0 * scale)))
        }
    }
}
