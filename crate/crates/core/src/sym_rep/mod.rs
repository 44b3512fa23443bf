//! The symmetric-matrix rotation representation.
//!
//! A rotation is encoded by a 4×4 symmetric matrix `A` whose minimum
//! eigenvalue is simple; the rotation is the one described by the antipodal
//! pair of unit eigenvectors spanning the minimum eigenspace. Ten unrestricted
//! parameters fill the upper triangle row by row.

mod eig;
mod qcqp;

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix4, SMatrix, SVector, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eig::{pinv4_sym, symeig4, EigenDecomp4, JACOBI_MAX_SWEEPS, JACOBI_REL_TOL};
pub use qcqp::{
    qcqp_jacobian, qcqp_jacobian_theta, qcqp_solve, smooth_section, QcqpSolution, DEFAULT_GAP_TOL,
};

/// The ten free parameters of a [`SymMat4`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams(pub SVector<f64, 10>);

impl ThetaParams {
    pub fn from_slice(raw: &[f64]) -> Result<Self> {
        if raw.len() != 10 {
            return Err(Error::DimensionMismatch {
                expected: 10,
                got: raw.len(),
            });
        }
        if !raw.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("theta"));
        }
        Ok(Self(SVector::<f64, 10>::from_column_slice(raw)))
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Position in `θ` (0-based) of entry `(i, j)` of `A(θ)`.
pub fn theta_index(i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    // rows start at 0, 4, 7, 9
    const ROW_START: [usize; 4] = [0, 4, 7, 9];
    ROW_START[r] + (c - r)
}

/// Real symmetric 4×4 matrix. Symmetry is exact: constructors copy one
/// triangle onto the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymMat4(Matrix4<f64>);

impl SymMat4 {
    pub fn zeros() -> Self {
        Self(Matrix4::zeros())
    }

    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    /// Builds the matrix from the upper triangle of `m`.
    pub fn from_upper(m: &Matrix4<f64>) -> Self {
        let mut out = *m;
        for i in 0..4 {
            for j in 0..i {
                out[(i, j)] = m[(j, i)];
            }
        }
        Self(out)
    }

    /// `(m + mᵀ) / 2`
    pub fn symmetrize(m: &Matrix4<f64>) -> Self {
        Self::from_upper(&((m + m.transpose()) * 0.5))
    }

    /// `Σ wᵢ xᵢxᵢᵀ` style rank-one update target.
    pub fn outer(v: &Vector4<f64>) -> Self {
        Self::from_upper(&(v * v.transpose()))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self(self.0 + Matrix4::identity() * c)
    }

    pub fn quadratic_form(&self, x: &Vector4<f64>) -> f64 {
        x.dot(&(self.0 * x))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Add for SymMat4 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for SymMat4 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Mul<f64> for SymMat4 {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self(self.0 * rhs)
    }
}

impl Neg for SymMat4 {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl std::iter::Sum for SymMat4 {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zeros(), |a, b| a + b)
    }
}

#[allow(non_snake_case)]
pub fn theta_to_A(theta: &ThetaParams) -> SymMat4 {
    let mut m = Matrix4::zeros();
    for i in 0..4 {
        for j in i..4 {
            let v = theta.0[theta_index(i, j)];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymMat4(m)
}

#[allow(non_snake_case)]
pub fn A_to_theta(a: &SymMat4) -> ThetaParams {
    let mut t = SVector::<f64, 10>::zeros();
    for i in 0..4 {
        for j in i..4 {
            t[theta_index(i, j)] = a.0[(i, j)];
        }
    }
    ThetaParams(t)
}

/// The 16×10 matrix `D` with `vec(A(θ)) = D θ` (column-major `vec`).
pub fn duplication_matrix() -> SMatrix<f64, 16, 10> {
    let mut d = SMatrix::<f64, 16, 10>::zeros();
    for j in 0..4 {
        for i in 0..4 {
            d[(4 * j + i, theta_index(i, j))] = 1.0;
        }
    }
    d
}
