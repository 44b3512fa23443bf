//! Representation heads mapping raw network outputs to rotations, with their
//! vector-Jacobian products.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, SMatrix, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::bingham::{dispersion_trace, DispersionTrace};
use crate::error::{Error, Result};
use crate::so3::{quat_product, quat_to_rot, quat_to_rot_vjp, rot_to_quat, skew, GramSchmidt, RotationMatrix, SixD, UnitQuaternion};
use crate::sym_rep::{qcqp_jacobian_theta, qcqp_solve, theta_to_A, QcqpSolution, ThetaParams, DEFAULT_GAP_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RepresentationHead {
    /// Normalized 4-vector.
    #[serde(rename = "quat")]
    UnitQuat,
    /// Gram–Schmidt on two 3-vectors.
    #[serde(rename = "6d", alias = "6D")]
    SixD,
    /// Ten parameters of a symmetric matrix, solved by the QCQP layer.
    #[serde(rename = "A", alias = "a")]
    SymA,
}

impl RepresentationHead {
    pub const ALL: [RepresentationHead; 3] = [Self::UnitQuat, Self::SixD, Self::SymA];

    pub fn raw_dim(self) -> usize {
        match self {
            Self::UnitQuat => 4,
            Self::SixD => 6,
            Self::SymA => 10,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::UnitQuat => "quat",
            Self::SixD => "6d",
            Self::SymA => "A",
        }
    }
}

impl fmt::Display for RepresentationHead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RepresentationHead {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quat" | "unitquat" | "unit_quat" => Ok(Self::UnitQuat),
            "6d" | "sixd" | "six_d" => Ok(Self::SixD),
            "a" | "syma" | "sym_a" => Ok(Self::SymA),
            other => Err(Error::InvalidConfig(format!("unknown head `{other}`"))),
        }
    }
}

/// Gradient arriving at a head from the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Upstream {
    Quat(Vector4<f64>),
    Rot(Matrix3<f64>),
}

#[derive(Debug, Clone, Copy)]
enum HeadState {
    UnitQuat { norm: f64 },
    SixD(GramSchmidt),
    SymA(QcqpSolution),
}

/// Result of a head's forward map, holding what its backward pass needs.
#[derive(Debug, Clone, Copy)]
pub struct HeadOutput {
    pub head: RepresentationHead,
    pub rot: RotationMatrix,
    pub quat: UnitQuaternion,
    /// Dispersion trace of the predicted matrix (SymA head only).
    pub trace: Option<DispersionTrace>,
    state: HeadState,
    sym_a: Option<crate::sym_rep::SymMat4>,
}

pub fn head_forward(head: RepresentationHead, raw: &[f64]) -> Result<HeadOutput> {
    if raw.len() != head.raw_dim() {
        return Err(Error::DimensionMismatch {
            expected: head.raw_dim(),
            got: raw.len(),
        });
    }
    if !raw.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("head input"));
    }
    match head {
        RepresentationHead::UnitQuat => {
            let y = Vector4::from_column_slice(raw);
            let quat = UnitQuaternion::new_normalize(y)?;
            Ok(HeadOutput {
                head,
                rot: quat_to_rot(&quat),
                quat,
                trace: None,
                state: HeadState::UnitQuat { norm: y.norm() },
                sym_a: None,
            })
        }
        RepresentationHead::SixD => {
            let gs = GramSchmidt::new(&SixD::from_slice(raw)?)?;
            let rot = gs.rotation();
            Ok(HeadOutput {
                head,
                rot,
                quat: rot_to_quat(&rot),
                trace: None,
                state: HeadState::SixD(gs),
                sym_a: None,
            })
        }
        RepresentationHead::SymA => {
            let a = theta_to_A(&ThetaParams::from_slice(raw)?);
            let sol = qcqp_solve(&a, DEFAULT_GAP_TOL)?;
            let l = sol.decomp.lambdas;
            Ok(HeadOutput {
                head,
                rot: quat_to_rot(&sol.quat),
                quat: sol.quat,
                trace: Some(DispersionTrace(3.0 * l[0] - l[1] - l[2] - l[3])),
                state: HeadState::SymA(sol),
                sym_a: Some(a),
            })
        }
    }
}

/// Converts a gradient on the quaternion of a rotation into an equivalent
/// gradient on the rotation matrix (they agree on every tangent direction).
fn quat_grad_to_rot_grad(q: &UnitQuaternion, g_q: &Vector4<f64>, rot: &RotationMatrix) -> Matrix3<f64> {
    let mut tau = Vector3::zeros();
    for k in 0..3 {
        let mut e = Vector4::zeros();
        e[k] = 1.0;
        tau[k] = 0.5 * g_q.dot(&quat_product(&e, q.as_vector()));
    }
    skew(&(tau * 0.5)) * rot.matrix()
}

impl HeadOutput {
    /// Vector-Jacobian product back to the raw head input.
    pub fn backward(&self, upstream: &Upstream) -> Result<Vec<f64>> {
        match &self.state {
            HeadState::UnitQuat { norm } => {
                let q = self.quat.as_vector();
                let g_q = match upstream {
                    Upstream::Quat(g) => *g,
                    Upstream::Rot(g) => quat_to_rot_vjp(q, g),
                };
                let g_y = (g_q - q * q.dot(&g_q)) / *norm;
                Ok(g_y.as_slice().to_vec())
            }
            HeadState::SixD(gs) => {
                let g_r = match upstream {
                    Upstream::Rot(g) => *g,
                    Upstream::Quat(g) => quat_grad_to_rot_grad(&self.quat, g, &self.rot),
                };
                let (ga1, ga2) = gs.backward(&g_r);
                Ok(ga1.iter().chain(ga2.iter()).copied().collect())
            }
            HeadState::SymA(sol) => {
                let q = self.quat.as_vector();
                let g_q = match upstream {
                    Upstream::Quat(g) => *g,
                    Upstream::Rot(g) => quat_to_rot_vjp(q, g),
                };
                let a = self.sym_a.as_ref().expect("SymA head keeps its matrix");
                let j: SMatrix<f64, 4, 10> = qcqp_jacobian_theta(a, &sol.decomp)?;
                Ok((j.transpose() * g_q).as_slice().to_vec())
            }
        }
    }

    pub fn eigengap(&self) -> Option<f64> {
        match &self.state {
            HeadState::SymA(sol) => Some(sol.eigengap),
            _ => None,
        }
    }
}

pub fn head_backward(head: RepresentationHead, raw: &[f64], upstream: &Upstream) -> Result<Vec<f64>> {
    head_forward(head, raw)?.backward(upstream)
}

/// Dispersion trace of the matrix encoded by a raw 10-vector.
pub fn raw_dispersion_trace(raw: &[f64]) -> Result<DispersionTrace> {
    dispersion_trace(&theta_to_A(&ThetaParams::from_slice(raw)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_rotation_quat, seeded};
    use crate::so3::d_quat;
    use crate::sym_rep::{smooth_section, A_to_theta};
    use rand::Rng;

    /// Scalar probe `⟨G, R⟩ + ⟨g, q⟩` with sign-aligned q for finite differences.
    fn probe(head: RepresentationHead, raw: &[f64], up: &Upstream, q_ref: &Vector4<f64>) -> f64 {
        let out = head_forward(head, raw).unwrap();
        match up {
            Upstream::Rot(g) => out.rot.matrix().component_mul(g).sum(),
            Upstream::Quat(g) => {
                let mut q = *out.quat.as_vector();
                if q.dot(q_ref) < 0.0 {
                    q = -q;
                }
                q.dot(g)
            }
        }
    }

    fn fd_check(head: RepresentationHead, raw: &[f64], up: &Upstream) -> f64 {
        let out = head_forward(head, raw).unwrap();
        let analytic = out.backward(up).unwrap();
        let q_ref = *out.quat.as_vector();
        let h = 1e-5;
        let fd: Vec<f64> = (0..raw.len())
            .map(|k| {
                let mut p = raw.to_vec();
                let mut m = raw.to_vec();
                p[k] += h;
                m[k] -= h;
                (probe(head, &p, up, &q_ref) - probe(head, &m, up, &q_ref)) / (2.0 * h)
            })
            .collect();
        let num: f64 = analytic.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
        num / den
    }

    #[test]
    fn forward_fixed_cases() {
        let out = head_forward(RepresentationHead::UnitQuat, &[0.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(*out.rot.matrix(), Matrix3::identity());
        let out = head_forward(RepresentationHead::SixD, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(*out.rot.matrix(), Matrix3::identity());

        let mut rng = seeded(91, 0);
        for _ in 0..100 {
            let q = random_rotation_quat(&mut rng);
            let raw = A_to_theta(&smooth_section(&q));
            let out = head_forward(RepresentationHead::SymA, raw.as_slice()).unwrap();
            assert!(d_quat(&out.quat, &q) < 1e-10);
            assert!((out.trace.unwrap().0 + 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_errors() {
        assert!(matches!(
            head_forward(RepresentationHead::UnitQuat, &[0.0; 4]),
            Err(Error::NearZeroNorm(_))
        ));
        assert!(matches!(
            head_forward(RepresentationHead::SixD, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]),
            Err(Error::DegenerateSixD(_))
        ));
        assert!(matches!(
            head_forward(RepresentationHead::SymA, &[0.0; 10]),
            Err(Error::DegenerateEigenspace { .. })
        ));
        assert!(matches!(
            head_forward(RepresentationHead::SymA, &[0.0; 4]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = seeded(92, 0);
        for head in RepresentationHead::ALL {
            let mut done = 0;
            while done < 100 {
                let raw: Vec<f64> = (0..head.raw_dim()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                if head == RepresentationHead::SymA {
                    let a = theta_to_A(&ThetaParams::from_slice(&raw).unwrap());
                    let gap = crate::sym_rep::symeig4(&a).unwrap().eigengap;
                    if gap < 1e-2 * a.frobenius_norm() {
                        continue;
                    }
                }
                let up_r = Upstream::Rot(Matrix3::from_fn(|_, _| rng.random::<f64>() - 0.5));
                let up_q = Upstream::Quat(Vector4::from_fn(|_, _| rng.random::<f64>() - 0.5));
                for up in [up_r, up_q] {
                    let err = fd_check(head, &raw, &up);
                    assert!(err <= 1e-4, "{head} {up:?}: {err}");
                }
                done += 1;
            }
        }
    }

    #[test]
    fn unit_quat_gradient_is_tangent() {
        let mut rng = seeded(93, 0);
        for _ in 0..100 {
            let raw: Vec<f64> = (0..4).map(|_| rng.random::<f64>() - 0.5).collect();
            let g = Upstream::Quat(Vector4::from_fn(|_, _| rng.random::<f64>() - 0.5));
            let grad = head_backward(RepresentationHead::UnitQuat, &raw, &g).unwrap();
            let y = Vector4::from_column_slice(&raw);
            assert!(Vector4::from_column_slice(&grad).dot(&y).abs() < 1e-12);
        }
    }

    #[test]
    fn sixd_gradient_ignores_a1_scale() {
        let mut rng = seeded(94, 0);
        for _ in 0..100 {
            let raw: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
            // upstream only on b1 (first column)
            let mut g = Matrix3::zeros();
            for i in 0..3 {
                g[(i, 0)] = rng.random::<f64>() - 0.5;
            }
            let grad = head_backward(RepresentationHead::SixD, &raw, &Upstream::Rot(g)).unwrap();
            let a1 = Vector3::new(raw[0], raw[1], raw[2]);
            let ga1 = Vector3::new(grad[0], grad[1], grad[2]);
            assert!(ga1.dot(&a1).abs() < 1e-12);
            assert!(grad[3..].iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn sym_a_ignores_identity_shift() {
        let mut rng = seeded(95, 0);
        let identity_dir = A_to_theta(&crate::sym_rep::SymMat4::identity());
        for _ in 0..200 {
            let raw: Vec<f64> = (0..10).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let Ok(base) = head_forward(RepresentationHead::SymA, &raw) else { continue };
            let c = rng.random::<f64>() * 6.0 - 3.0;
            let shifted: Vec<f64> = raw.iter().zip(identity_dir.as_slice()).map(|(r, d)| r + c * d).collect();
            let out = head_forward(RepresentationHead::SymA, &shifted).unwrap();
            assert!((out.rot.matrix() - base.rot.matrix()).norm() < 1e-9 / base.eigengap().unwrap().min(1.0));
            // the gradient has no component along the identity direction
            let g = head_backward(RepresentationHead::SymA, &raw, &Upstream::Rot(Matrix3::from_fn(|_, _| rng.random::<f64>()))).unwrap();
            let along: f64 = g.iter().zip(identity_dir.as_slice()).map(|(a, b)| a * b).sum();
            assert!(along.abs() < 1e-10);
        }
    }

    #[test]
    fn head_names_roundtrip() {
        for h in RepresentationHead::ALL {
            assert_eq!(h.name().parse::<RepresentationHead>().unwrap(), h);
        }
        assert!("euler".parse::<RepresentationHead>().is_err());
    }
}
