use nalgebra::{SMatrix, Vector4};

use super::eig::{pinv_from_decomp, symeig4, EigenDecomp4};
use super::{duplication_matrix, SymMat4};
use crate::error::{Error, Result};
use crate::so3::UnitQuaternion;

/// Minimum eigengap relative to `max(1, ‖A‖_F)` for a unique solution.
pub const DEFAULT_GAP_TOL: f64 = 1e-8;

/// Solution of `min qᵀAq s.t. qᵀq = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QcqpSolution {
    /// Minimizer in canonical sign; `-quat` is the other minimizer.
    pub quat: UnitQuaternion,
    pub eigengap: f64,
    pub decomp: EigenDecomp4,
}

fn gap_threshold(a: &SymMat4, gap_tol: f64) -> f64 {
    gap_tol * a.frobenius_norm().max(1.0)
}

fn check_gap(a: &SymMat4, decomp: &EigenDecomp4, gap_tol: f64) -> Result<()> {
    let threshold = gap_threshold(a, gap_tol);
    if decomp.eigengap < threshold {
        return Err(Error::DegenerateEigenspace {
            gap: decomp.eigengap,
            threshold,
        });
    }
    Ok(())
}

/// Minimum-eigenvector solution of the quaternion QCQP.
pub fn qcqp_solve(a: &SymMat4, gap_tol: f64) -> Result<QcqpSolution> {
    let decomp = symeig4(a)?;
    check_gap(a, &decomp, gap_tol)?;
    let quat = UnitQuaternion::new_normalize(decomp.vector(0))?.canonical();
    Ok(QcqpSolution {
        quat,
        eigengap: decomp.eigengap,
        decomp,
    })
}

/// `∂q*/∂vec(A)` for the canonical-sign minimizer, with column-major `vec`:
/// `J = q*ᵀ ⊗ (λ₁I − A)†`, so that `J vec(dA) = (λ₁I − A)† dA q*`.
pub fn qcqp_jacobian(a: &SymMat4, decomp: &EigenDecomp4) -> Result<SMatrix<f64, 4, 16>> {
    check_gap(a, decomp, DEFAULT_GAP_TOL)?;
    let q = UnitQuaternion::new_normalize(decomp.vector(0))?.canonical();
    // (λ₁I − A) shares A's eigenvectors with eigenvalues λ₁ − λᵢ; the first is exactly 0.
    let shifted = Vector4::from_fn(|i, _| if i == 0 { 0.0 } else { decomp.lambdas[0] - decomp.lambdas[i] });
    let pinv = pinv_from_decomp(&shifted, &decomp.vectors, 0.0);
    let mut j = SMatrix::<f64, 4, 16>::zeros();
    for col in 0..4 {
        let block = pinv.matrix() * q.as_vector()[col];
        j.fixed_view_mut::<4, 4>(0, 4 * col).copy_from(&block);
    }
    Ok(j)
}

/// `∂q*/∂θ`: [`qcqp_jacobian`] composed with the duplication matrix of the
/// `θ ↦ A` layout.
pub fn qcqp_jacobian_theta(a: &SymMat4, decomp: &EigenDecomp4) -> Result<SMatrix<f64, 4, 10>> {
    Ok(qcqp_jacobian(a, decomp)? * duplication_matrix())
}

/// `g(q) = I − qqᵀ`, a smooth right-inverse of the solution map.
pub fn smooth_section(q: &UnitQuaternion) -> SymMat4 {
    SymMat4::identity() - SymMat4::outer(q.as_vector())
}
