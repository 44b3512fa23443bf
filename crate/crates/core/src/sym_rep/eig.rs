use nalgebra::{Matrix4, Vector4};

use super::SymMat4;
use crate::error::{Error, Result};

/// Sweep cap for the cyclic Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 64;

/// Convergence threshold on the off-diagonal norm, relative to `‖A‖_F`.
pub const JACOBI_REL_TOL: f64 = 1e-14;

/// Eigendecomposition of a [`SymMat4`] with ascending eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenDecomp4 {
    pub lambdas: Vector4<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `lambdas`.
    pub vectors: Matrix4<f64>,
    /// `λ₂ − λ₁`
    pub eigengap: f64,
}

impl EigenDecomp4 {
    pub fn vector(&self, i: usize) -> Vector4<f64> {
        self.vectors.column(i).into_owned()
    }

    /// `‖A V − V Λ‖_F`
    pub fn residual(&self, a: &SymMat4) -> f64 {
        (a.matrix() * self.vectors - self.vectors * Matrix4::from_diagonal(&self.lambdas)).norm()
    }
}

/// Cyclic Jacobi eigensolver for a 4×4 symmetric matrix.
///
/// Each eigenvector is sign-normalized so that its largest-magnitude
/// component (first one on ties) is positive.
pub fn symeig4(a: &SymMat4) -> Result<EigenDecomp4> {
    if !a.is_finite() {
        return Err(Error::NonFinite("symmetric matrix"));
    }
    let mut m = *a.matrix();
    let mut v = Matrix4::<f64>::identity();
    let norm = m.norm();
    let tol = JACOBI_REL_TOL * norm;

    let off = |m: &Matrix4<f64>| {
        let mut s = 0.0;
        for p in 0..4 {
            for q in (p + 1)..4 {
                s += 2.0 * m[(p, q)] * m[(p, q)];
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    let mut off_norm = off(&m);
    while off_norm > tol {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_norm });
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                rotate(&mut m, &mut v, p, q);
            }
        }
        sweeps += 1;
        off_norm = off(&m);
    }

    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));

    let mut lambdas = Vector4::zeros();
    let mut vectors = Matrix4::zeros();
    for (k, &i) in order.iter().enumerate() {
        lambdas[k] = m[(i, i)];
        let mut col: Vector4<f64> = v.column(i).into_owned();
        let lead = (0..4)
            .fold(0, |best, c| if col[c].abs() > col[best].abs() { c } else { best });
        if col[lead] < 0.0 {
            col = -col;
        }
        vectors.set_column(k, &col);
    }

    Ok(EigenDecomp4 {
        lambdas,
        vectors,
        eigengap: lambdas[1] - lambdas[0],
    })
}

/// One Jacobi rotation annihilating `m[(p, q)]`, accumulated into `v`.
fn rotate(m: &mut Matrix4<f64>, v: &mut Matrix4<f64>, p: usize, q: usize) {
    let apq = m[(p, q)];
    if apq == 0.0 {
        return;
    }
    let tau = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
    let t = if tau.abs() > 1e150 {
        0.5 / tau
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    for k in 0..4 {
        let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..4 {
        let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;

    for k in 0..4 {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Spectral pseudo-inverse from a decomposition: eigenvalues with
/// `|λ| ≤ rank_tol · max|λ|` are treated as zero.
pub(crate) fn pinv_from_decomp(lambdas: &Vector4<f64>, vectors: &Matrix4<f64>, rank_tol: f64) -> SymMat4 {
    let max_abs = lambdas.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let cutoff = rank_tol * max_abs;
    let mut out = Matrix4::zeros();
    for i in 0..4 {
        let l = lambdas[i];
        if l.abs() > cutoff && l != 0.0 {
            let col = vectors.column(i);
            out += col * col.transpose() / l;
        }
    }
    SymMat4::symmetrize(&out)
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix.
pub fn pinv4_sym(m: &SymMat4, rank_tol: f64) -> Result<SymMat4> {
    let d = symeig4(m)?;
    Ok(pinv_from_decomp(&d.lambdas, &d.vectors, rank_tol))
}
