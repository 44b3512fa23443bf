//! Rotation value types, conversions, bi-invariant distances and quaternion
//! product matrices.
//!
//! Quaternions are stored scalar-last, `(x, y, z, w)`, so that the
//! homogenization of a 3-vector `p` is `[p, 0]`. The Hamilton product is used
//! throughout and `q` and `-q` describe the same rotation.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this rotation angle the exponential and logarithm use Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-7;

/// Minimum norm accepted when normalizing a 4-vector into a unit quaternion.
pub const MIN_QUAT_NORM: f64 = 1e-9;

/// Degeneracy tolerance for the 6D Gram–Schmidt map.
pub const SIXD_EPS: f64 = 1e-9;

/// A unit quaternion, scalar-last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion(Vector4<f64>);

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self(Vector4::new(0.0, 0.0, 0.0, 1.0))
    }

    /// Normalizes `v`; fails when its norm is below [`MIN_QUAT_NORM`].
    pub fn new_normalize(v: Vector4<f64>) -> Result<Self> {
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("quaternion"));
        }
        let n = v.norm();
        if n < MIN_QUAT_NORM {
            return Err(Error::NearZeroNorm(n));
        }
        Ok(Self(v / n))
    }

    pub fn from_xyzw(x: f64, y: f64, z: f64, w: f64) -> Result<Self> {
        Self::new_normalize(Vector4::new(x, y, z, w))
    }

    /// Wraps a vector that the caller guarantees has unit norm.
    pub(crate) fn from_unit_unchecked(v: Vector4<f64>) -> Self {
        Self(v)
    }

    pub fn as_vector(&self) -> &Vector4<f64> {
        &self.0
    }

    pub fn into_vector(self) -> Vector4<f64> {
        self.0
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }
    pub fn y(&self) -> f64 {
        self.0[1]
    }
    pub fn z(&self) -> f64 {
        self.0[2]
    }
    pub fn w(&self) -> f64 {
        self.0[3]
    }

    /// Returns whichever of `±self` satisfies the canonical sign rule:
    /// `w > 0`, or `w == 0` and the first nonzero vector component positive.
    pub fn canonical(self) -> Self {
        if is_canonical_sign(&self.0) {
            self
        } else {
            -self
        }
    }

    pub fn is_canonical(&self) -> bool {
        is_canonical_sign(&self.0)
    }

    pub fn conjugate(&self) -> Self {
        Self(Vector4::new(-self.0[0], -self.0[1], -self.0[2], self.0[3]))
    }

    /// Hamilton product `self ∘ rhs`.
    pub fn compose(&self, rhs: &Self) -> Self {
        Self(quat_product(&self.0, &rhs.0))
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.dot(&other.0)
    }

    /// Rotates `p` as `q ∘ p̂ ∘ q⁻¹`.
    pub fn rotate(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let r = quat_product(
            &quat_product(&self.0, &homogenize(p)),
            &self.conjugate().0,
        );
        Vector3::new(r[0], r[1], r[2])
    }
}

impl std::ops::Neg for UnitQuaternion {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

fn is_canonical_sign(v: &Vector4<f64>) -> bool {
    if v[3] != 0.0 {
        return v[3] > 0.0;
    }
    for i in 0..3 {
        if v[i] != 0.0 {
            return v[i] > 0.0;
        }
    }
    true
}

/// A 3×3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Accepts `m` if it is orthogonal with unit determinant to within `tol`.
    pub fn from_matrix(m: Matrix3<f64>, tol: f64) -> Result<Self> {
        let candidate = Self(m);
        if candidate.orthogonality_error() <= tol && (m.determinant() - 1.0).abs() <= tol {
            Ok(candidate)
        } else {
            Err(Error::InvalidConfig(format!(
                "matrix is not a rotation (orthogonality error {:e}, det {})",
                candidate.orthogonality_error(),
                m.determinant()
            )))
        }
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, rhs: &Self) -> Self {
        Self(self.0 * rhs.0)
    }

    pub fn rotate(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.0 * p
    }

    /// `‖RᵀR − I‖_F`
    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }
}

/// Rotation vector: direction is the axis, norm is the angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle(pub Vector3<f64>);

impl AxisAngle {
    pub fn angle(&self) -> f64 {
        self.0.norm()
    }
}

/// The continuous six-dimensional representation: two 3-vectors mapped to a
/// rotation by Gram–Schmidt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixD {
    pub a1: Vector3<f64>,
    pub a2: Vector3<f64>,
}

impl SixD {
    pub fn new(a1: Vector3<f64>, a2: Vector3<f64>) -> Self {
        Self { a1, a2 }
    }

    pub fn from_slice(raw: &[f64]) -> Result<Self> {
        if raw.len() != 6 {
            return Err(Error::DimensionMismatch {
                expected: 6,
                got: raw.len(),
            });
        }
        Ok(Self::new(
            Vector3::new(raw[0], raw[1], raw[2]),
            Vector3::new(raw[3], raw[4], raw[5]),
        ))
    }
}

/// `p̂ = [p, 0]`
pub fn homogenize(p: &Vector3<f64>) -> Vector4<f64> {
    Vector4::new(p[0], p[1], p[2], 0.0)
}

/// Hamilton product of two scalar-last quaternions (not necessarily unit).
pub fn quat_product(p: &Vector4<f64>, q: &Vector4<f64>) -> Vector4<f64> {
    let (pv, pw) = (Vector3::new(p[0], p[1], p[2]), p[3]);
    let (qv, qw) = (Vector3::new(q[0], q[1], q[2]), q[3]);
    let v = qv * pw + pv * qw + pv.cross(&qv);
    Vector4::new(v[0], v[1], v[2], pw * qw - pv.dot(&qv))
}

/// `M_ℓ(p)` with `M_ℓ(p) q = p ∘ q`.
pub fn quat_left_matrix(p: &Vector4<f64>) -> Matrix4<f64> {
    let (x, y, z, w) = (p[0], p[1], p[2], p[3]);
    Matrix4::new(
        w, -z, y, x, //
        z, w, -x, y, //
        -y, x, w, z, //
        -x, -y, -z, w,
    )
}

/// `M_r(q)` with `M_r(q) p = p ∘ q`.
pub fn quat_right_matrix(q: &Vector4<f64>) -> Matrix4<f64> {
    let (x, y, z, w) = (q[0], q[1], q[2], q[3]);
    Matrix4::new(
        w, z, -y, x, //
        -z, w, x, y, //
        y, -x, w, z, //
        -x, -y, -z, w,
    )
}

pub fn quat_to_rot(q: &UnitQuaternion) -> RotationMatrix {
    let (x, y, z, w) = (q.x(), q.y(), q.z(), q.w());
    RotationMatrix(Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    ))
}

/// Pulls a gradient with respect to the entries of `quat_to_rot(q)` back to
/// the four quaternion components (treating the formula as a polynomial in q).
pub fn quat_to_rot_vjp(q: &Vector4<f64>, grad_r: &Matrix3<f64>) -> Vector4<f64> {
    let (x, y, z, w) = (q[0], q[1], q[2], q[3]);
    let g = grad_r;
    let partials: [[f64; 4]; 9] = [
        [0.0, -4.0 * y, -4.0 * z, 0.0],
        [2.0 * y, 2.0 * x, -2.0 * w, -2.0 * z],
        [2.0 * z, 2.0 * w, 2.0 * x, 2.0 * y],
        [2.0 * y, 2.0 * x, 2.0 * w, 2.0 * z],
        [-4.0 * x, 0.0, -4.0 * z, 0.0],
        [-2.0 * w, 2.0 * z, 2.0 * y, -2.0 * x],
        [2.0 * z, -2.0 * w, 2.0 * x, -2.0 * y],
        [2.0 * w, 2.0 * z, 2.0 * y, 2.0 * x],
        [-4.0 * x, -4.0 * y, 0.0, 0.0],
    ];
    let mut out = Vector4::zeros();
    for (k, d) in partials.iter().enumerate() {
        let gij = g[(k / 3, k % 3)];
        for c in 0..4 {
            out[c] += gij * d[c];
        }
    }
    out
}

/// Shepperd's method, returned in canonical sign.
pub fn rot_to_quat(r: &RotationMatrix) -> UnitQuaternion {
    let m = &r.0;
    let tr = m.trace();
    let diag = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
    let v = if tr >= diag[0] && tr >= diag[1] && tr >= diag[2] {
        let s = (1.0 + tr).sqrt() * 2.0;
        Vector4::new(
            (m[(2, 1)] - m[(1, 2)]) / s,
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(1, 0)] - m[(0, 1)]) / s,
            0.25 * s,
        )
    } else if diag[0] >= diag[1] && diag[0] >= diag[2] {
        let s = (1.0 + diag[0] - diag[1] - diag[2]).sqrt() * 2.0;
        Vector4::new(
            0.25 * s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
            (m[(2, 1)] - m[(1, 2)]) / s,
        )
    } else if diag[1] >= diag[2] {
        let s = (1.0 + diag[1] - diag[0] - diag[2]).sqrt() * 2.0;
        Vector4::new(
            (m[(0, 1)] + m[(1, 0)]) / s,
            0.25 * s,
            (m[(1, 2)] + m[(2, 1)]) / s,
            (m[(0, 2)] - m[(2, 0)]) / s,
        )
    } else {
        let s = (1.0 + diag[2] - diag[0] - diag[1]).sqrt() * 2.0;
        Vector4::new(
            (m[(0, 2)] + m[(2, 0)]) / s,
            (m[(1, 2)] + m[(2, 1)]) / s,
            0.25 * s,
            (m[(1, 0)] - m[(0, 1)]) / s,
        )
    };
    UnitQuaternion(v.normalize()).canonical()
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

/// `vee(M − Mᵀ) / 2`
fn vee_antisym(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rodrigues' formula.
pub fn exp_map(phi: &AxisAngle) -> RotationMatrix {
    let theta = phi.angle();
    let k = skew(&phi.0);
    let k2 = k * k;
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta * theta / 6.0, 0.5 - theta * theta / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    RotationMatrix(Matrix3::identity() + k * a + k2 * b)
}

/// Rotation angle in `[0, π]`.
pub fn rotation_angle(r: &RotationMatrix) -> f64 {
    let c = ((r.0.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let s = vee_antisym(&r.0).norm();
    s.atan2(c)
}

/// Inverse of [`exp_map`] with angle in `[0, π]`.
pub fn log_map(r: &RotationMatrix) -> AxisAngle {
    let m = &r.0;
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let w = vee_antisym(m);
    let s = w.norm();
    let theta = s.atan2(c);

    if theta < SMALL_ANGLE {
        return AxisAngle(w * (1.0 + theta * theta / 6.0));
    }
    if c > -0.9 {
        return AxisAngle(w * (theta / s));
    }

    // Near the cut at π: sym(R) = cos θ I + (1 − cos θ) a aᵀ.
    let sym = (m + m.transpose()) * 0.5;
    let outer = (sym - Matrix3::identity() * c) / (1.0 - c);
    let k = (0..3)
        .max_by(|&i, &j| outer[(i, i)].total_cmp(&outer[(j, j)]))
        .unwrap_or(0);
    let mut axis: Vector3<f64> = outer.column(k).into_owned() / outer[(k, k)].max(0.0).sqrt();
    axis.normalize_mut();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    AxisAngle(axis * theta)
}

/// `min(‖q_gt − q‖, ‖q_gt + q‖)`
pub fn d_quat(q: &UnitQuaternion, q_gt: &UnitQuaternion) -> f64 {
    let a = (q_gt.0 - q.0).norm();
    let b = (q_gt.0 + q.0).norm();
    a.min(b)
}

/// `‖R_gt − R‖_F`
pub fn d_chord(r: &RotationMatrix, r_gt: &RotationMatrix) -> f64 {
    (r_gt.0 - r.0).norm()
}

/// `‖Log(R R_gtᵀ)‖` in radians.
pub fn d_ang(r: &RotationMatrix, r_gt: &RotationMatrix) -> f64 {
    rotation_angle(&RotationMatrix(r.0 * r_gt.0.transpose()))
}

pub fn d_ang_deg(r: &RotationMatrix, r_gt: &RotationMatrix) -> f64 {
    d_ang(r, r_gt).to_degrees()
}

/// Gram–Schmidt: the columns of the result are `b1 = â1`,
/// `b2 = normalize(a2 − (b1·a2) b1)` and `b3 = b1 × b2`.
pub fn sixd_to_rot(s: &SixD) -> Result<RotationMatrix> {
    let frame = GramSchmidt::new(s)?;
    Ok(frame.rotation())
}

/// Intermediate quantities of the 6D map, kept for differentiation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GramSchmidt {
    pub a2: Vector3<f64>,
    pub n1: f64,
    pub n2: f64,
    pub b1: Vector3<f64>,
    pub b2: Vector3<f64>,
    pub b3: Vector3<f64>,
}

impl GramSchmidt {
    pub fn new(s: &SixD) -> Result<Self> {
        if !s.a1.iter().chain(s.a2.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("6D input"));
        }
        let n1 = s.a1.norm();
        if n1 < SIXD_EPS {
            return Err(Error::DegenerateSixD("first vector is zero"));
        }
        let b1 = s.a1 / n1;
        let u2 = s.a2 - b1 * b1.dot(&s.a2);
        let n2 = u2.norm();
        if n2 < SIXD_EPS {
            return Err(Error::DegenerateSixD("second vector lies in the span of the first"));
        }
        let b2 = u2 / n2;
        Ok(Self {
            a2: s.a2,
            n1,
            n2,
            b1,
            b2,
            b3: b1.cross(&b2),
        })
    }

    pub fn rotation(&self) -> RotationMatrix {
        RotationMatrix(Matrix3::from_columns(&[self.b1, self.b2, self.b3]))
    }

    /// Vector-Jacobian product: gradient on the output columns to `(∂a1, ∂a2)`.
    pub fn backward(&self, grad_r: &Matrix3<f64>) -> (Vector3<f64>, Vector3<f64>) {
        let gb3: Vector3<f64> = grad_r.column(2).into_owned();
        let mut gb1: Vector3<f64> = grad_r.column(0).into_owned() + self.b2.cross(&gb3);
        let gb2: Vector3<f64> = grad_r.column(1).into_owned() + gb3.cross(&self.b1);

        let gu2 = (gb2 - self.b2 * self.b2.dot(&gb2)) / self.n2;
        let b1_a2 = self.b1.dot(&self.a2);
        let b1_gu2 = self.b1.dot(&gu2);
        let ga2 = gu2 - self.b1 * b1_gu2;
        gb1 -= gu2 * b1_a2 + self.a2 * b1_gu2;

        let ga1 = (gb1 - self.b1 * self.b1.dot(&gb1)) / self.n1;
        (ga1, ga2)
    }
}
