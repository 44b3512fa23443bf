//! Reading a symmetric matrix as a Bingham belief over unit quaternions, and
//! the dispersion-thresholding (DT) out-of-distribution filter.
//!
//! With `A = V diag(λ) Vᵀ` (ascending), the belief sets `DΛDᵀ = −A + λ₁I`:
//! the mode is the minimum eigenvector and the dispersions are the negated
//! eigengaps `λ₁ − λ₄ ≤ λ₁ − λ₃ ≤ λ₁ − λ₂ ≤ 0`.

use nalgebra::{Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::UnitQuaternion;
use crate::sym_rep::{qcqp_solve, symeig4, SymMat4, DEFAULT_GAP_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinghamBelief {
    /// Columns `d₁, d₂, d₃` are the dispersion axes, `d₄` is the mode.
    pub axes: Matrix4<f64>,
    /// `d₁ ≤ d₂ ≤ d₃ ≤ 0`
    pub dispersions: Vector3<f64>,
}

impl BinghamBelief {
    pub fn mode(&self) -> UnitQuaternion {
        UnitQuaternion::from_unit_unchecked(self.axes.column(3).into_owned())
    }

    pub fn dispersion_sum(&self) -> f64 {
        self.dispersions.sum()
    }
}

/// Uncertainty score `tr(Λ) = 3λ₁ − λ₂ − λ₃ − λ₄`; more negative means more
/// concentrated.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DispersionTrace(pub f64);

pub fn belief_from_a(a: &SymMat4) -> Result<BinghamBelief> {
    let sol = qcqp_solve(a, DEFAULT_GAP_TOL)?;
    let l = sol.decomp.lambdas;
    let v = sol.decomp.vectors;
    let axes = Matrix4::from_columns(&[
        v.column(3).into_owned(),
        v.column(2).into_owned(),
        v.column(1).into_owned(),
        *sol.quat.as_vector(),
    ]);
    Ok(BinghamBelief {
        axes,
        dispersions: Vector3::new(l[0] - l[3], l[0] - l[2], l[0] - l[1]),
    })
}

/// `Σᵢ dᵢ (dᵢᵀx)²`, the log of the unnormalized density.
pub fn log_density_unnorm(belief: &BinghamBelief, x: &UnitQuaternion) -> f64 {
    (0..3)
        .map(|i| {
            let p = belief.axes.column(i).dot(x.as_vector());
            belief.dispersions[i] * p * p
        })
        .sum()
}

pub fn dispersion_trace(a: &SymMat4) -> Result<DispersionTrace> {
    let l = symeig4(a)?.lambdas;
    Ok(DispersionTrace(3.0 * l[0] - l[1] - l[2] - l[3]))
}

/// Linear-interpolation quantile (order statistics at positions `q (n − 1)`).
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("quantile of an empty list"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidConfig(format!("quantile level {q} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Threshold retaining the lowest `q`-quantile of the training traces.
pub fn dt_fit(train_traces: &[DispersionTrace], q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidConfig(format!("DT quantile {q} outside (0, 1]")));
    }
    let values: Vec<f64> = train_traces.iter().map(|t| t.0).collect();
    quantile(&values, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DtDecision {
    Keep,
    Reject,
}

pub fn dt_classify(trace: DispersionTrace, threshold: f64) -> DtDecision {
    if trace.0 <= threshold {
        DtDecision::Keep
    } else {
        DtDecision::Reject
    }
}
