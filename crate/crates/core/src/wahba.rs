//! Closed-form Wahba solver through the quaternion data matrix, and the
//! synthetic correspondence generator used by the learning experiments.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{gaussian3, random_unit_vector3};
use crate::so3::{exp_map, homogenize, quat_left_matrix, quat_right_matrix, AxisAngle, RotationMatrix, UnitQuaternion};
use crate::sym_rep::{qcqp_solve, QcqpSolution, SymMat4, DEFAULT_GAP_TOL};

/// One weighted vector observation: `v ≈ R u` with standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub u: Vector3<f64>,
    pub v: Vector3<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Correspondences {
    pairs: Vec<Pair>,
}

impl Correspondences {
    pub fn new(pairs: Vec<Pair>) -> Result<Self> {
        for p in &pairs {
            if !(p.sigma > 0.0 && p.sigma.is_finite()) {
                return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", p.sigma)));
            }
            if !p.u.iter().chain(p.v.iter()).all(|x| x.is_finite()) {
                return Err(Error::NonFinite("correspondence"));
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn into_pairs(self) -> Vec<Pair> {
        self.pairs
    }
}

/// Parameters of the generative model `vᵢ = R̂uᵢ + εᵢ`, `εᵢ ~ N(0, σ²I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_matches: usize,
    pub sigma: f64,
    /// Rotation angles are drawn from `U[0, phi_max)`, radians.
    pub phi_max: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi_max > 0.0 && self.phi_max <= std::f64::consts::PI) {
            return Err(Error::InvalidConfig(format!("phi_max {} outside (0, π]", self.phi_max)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma {} must be non-negative", self.sigma)));
        }
        Ok(())
    }
}

/// `A = Σᵢ σᵢ⁻² [(‖uᵢ‖² + ‖vᵢ‖²) I + 2 M_ℓ(v̂ᵢ) M_r(ûᵢ)]`
pub fn build_data_matrix(c: &Correspondences) -> SymMat4 {
    let mut acc = nalgebra::Matrix4::zeros();
    for p in &c.pairs {
        let w = 1.0 / (p.sigma * p.sigma);
        let scalar = p.u.norm_squared() + p.v.norm_squared();
        let cross = quat_left_matrix(&homogenize(&p.v)) * quat_right_matrix(&homogenize(&p.u));
        acc += (nalgebra::Matrix4::identity() * scalar + cross * 2.0) * w;
    }
    SymMat4::symmetrize(&acc)
}

/// `Σᵢ σᵢ⁻² ‖v̂ᵢ − q ∘ ûᵢ ∘ q⁻¹‖²`
pub fn wahba_cost(c: &Correspondences, q: &UnitQuaternion) -> f64 {
    c.pairs
        .iter()
        .map(|p| (p.v - q.rotate(&p.u)).norm_squared() / (p.sigma * p.sigma))
        .sum()
}

pub fn solve_wahba(c: &Correspondences) -> Result<UnitQuaternion> {
    Ok(solve_wahba_full(c)?.quat)
}

/// Like [`solve_wahba`] but also returns the eigen-information.
pub fn solve_wahba_full(c: &Correspondences) -> Result<QcqpSolution> {
    qcqp_solve(&build_data_matrix(c), DEFAULT_GAP_TOL)
}

/// Weighted orthogonal Procrustes (Kabsch) through an SVD of the
/// cross-covariance; an estimator independent of the eigen route.
pub fn procrustes_svd(c: &Correspondences) -> Result<RotationMatrix> {
    if c.is_empty() {
        return Err(Error::EmptyInput("no correspondences"));
    }
    let mut h = Matrix3::zeros();
    for p in &c.pairs {
        h += p.v * p.u.transpose() / (p.sigma * p.sigma);
    }
    let svd = h.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::NoConvergence { sweeps: 0, off_norm: f64::NAN }),
    };
    let d = (u * vt).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    Ok(RotationMatrix::from_matrix_unchecked(u * fix * vt))
}

/// Random rotation with angle in `[0, phi_max)` about an isotropic axis.
pub fn sample_rotation<R: Rng + ?Sized>(phi_max: f64, rng: &mut R) -> RotationMatrix {
    let axis = random_unit_vector3(rng);
    let phi = rng.random::<f64>() * phi_max;
    exp_map(&AxisAngle(axis * phi))
}

/// Draws `(R̂, {uᵢ, vᵢ, σ})` from the generative model; `uᵢ` are uniform on S².
///
/// Pairs carry `sigma` as their weight, or `1` when `sigma == 0`.
pub fn sample_synthetic<R: Rng + ?Sized>(cfg: &SyntheticConfig, rng: &mut R) -> Result<(RotationMatrix, Correspondences)> {
    cfg.validate()?;
    let rot = sample_rotation(cfg.phi_max, rng);
    let weight_sigma = if cfg.sigma > 0.0 { cfg.sigma } else { 1.0 };
    let pairs = (0..cfg.num_matches)
        .map(|_| {
            let u = random_unit_vector3(rng);
            let v = rot.rotate(&u) + gaussian3(rng) * cfg.sigma;
            Pair { u, v, sigma: weight_sigma }
        })
        .collect();
    Ok((rot, Correspondences { pairs }))
}
