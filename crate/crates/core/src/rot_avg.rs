//! Chordal and quaternion-norm rotation averaging.

use crate::error::{Error, Result};
use crate::so3::{d_quat, UnitQuaternion};
use crate::sym_rep::{qcqp_solve, SymMat4, DEFAULT_GAP_TOL};

/// Minimum norm of the aligned quaternion sum for [`quat_mean`].
pub const MIN_MEAN_NORM: f64 = 1e-9;

/// `Σᵢ wᵢ qᵢqᵢᵀ`
pub fn inertia_matrix(quats: &[UnitQuaternion], weights: &[f64]) -> Result<SymMat4> {
    if quats.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: quats.len(),
            got: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidConfig(format!("weights must be non-negative, got {w}")));
    }
    Ok(quats
        .iter()
        .zip(weights)
        .map(|(q, w)| SymMat4::outer(q.as_vector()) * *w)
        .sum())
}

/// Minimizer of `Σᵢ wᵢ d_chord²(R(q), R(qᵢ))`: the dominant eigenvector of
/// the inertia matrix, found as the minimum eigenvector of its negation.
pub fn chordal_mean(quats: &[UnitQuaternion], weights: &[f64]) -> Result<UnitQuaternion> {
    if quats.is_empty() {
        return Err(Error::EmptyInput("no rotations to average"));
    }
    let m = inertia_matrix(quats, weights)?;
    Ok(qcqp_solve(&-m, DEFAULT_GAP_TOL)?.quat)
}

/// `Σᵢ wᵢ d_chord²(R(q), R(qᵢ)) = 8 Σᵢ wᵢ (1 − (qᵀqᵢ)²)`
pub fn chordal_cost(q: &UnitQuaternion, quats: &[UnitQuaternion], weights: &[f64]) -> f64 {
    quats
        .iter()
        .zip(weights)
        .map(|(qi, w)| {
            let c = q.dot(qi);
            8.0 * w * (1.0 - c * c)
        })
        .sum()
}

/// Normalized sum after flipping each input into the hemisphere of the first.
pub fn quat_mean(quats: &[UnitQuaternion]) -> Result<UnitQuaternion> {
    let first = quats.first().ok_or(Error::EmptyInput("no rotations to average"))?;
    let sum = quats.iter().fold(nalgebra::Vector4::zeros(), |acc, q| {
        if q.dot(first) < 0.0 {
            acc - q.as_vector()
        } else {
            acc + q.as_vector()
        }
    });
    let n = sum.norm();
    if n <= MIN_MEAN_NORM {
        return Err(Error::MeanUndefined(n));
    }
    Ok(UnitQuaternion::new_normalize(sum)?.canonical())
}

/// `Σᵢ d_quat²(q, qᵢ)`
pub fn quat_cost(q: &UnitQuaternion, quats: &[UnitQuaternion]) -> f64 {
    quats.iter().map(|qi| d_quat(q, qi).powi(2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_rotation_quat, seeded};
    use crate::so3::{d_ang, exp_map, quat_to_rot, rot_to_quat, AxisAngle};
    use crate::sym_rep::symeig4;
    use rand::Rng;

    #[test]
    fn inertia_basics() {
        let q = UnitQuaternion::from_xyzw(0.1, -0.7, 0.2, 0.4).unwrap();
        let m = inertia_matrix(&[q], &[1.0]).unwrap();
        assert_eq!(m, SymMat4::outer(q.as_vector()));
        assert!(matches!(inertia_matrix(&[q], &[]), Err(Error::LengthMismatch { .. })));

        let mut rng = seeded(71, 0);
        for _ in 0..500 {
            let n = rng.random_range(1..10);
            let qs: Vec<_> = (0..n).map(|_| random_rotation_quat(&mut rng)).collect();
            let ws: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
            let m = inertia_matrix(&qs, &ws).unwrap();
            assert!(symeig4(&m).unwrap().lambdas[0] >= -1e-12);
            assert!((m.trace() - ws.iter().sum::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn chordal_simple_cases() {
        let q = UnitQuaternion::from_xyzw(0.3, 0.1, -0.5, 0.8).unwrap().canonical();
        let m = chordal_mean(&[q, q, q], &[1.0, 2.0, 0.5]).unwrap();
        assert!(d_quat(&m, &q) < 1e-12);
        let m = chordal_mean(&[q, -q], &[1.0, 1.0]).unwrap();
        assert!(d_quat(&m, &q) < 1e-12);

        let a = UnitQuaternion::identity();
        let b = UnitQuaternion::from_xyzw(1.0, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            chordal_mean(&[a, b], &[1.0, 1.0]),
            Err(Error::DegenerateEigenspace { .. })
        ));
        assert!(matches!(chordal_mean(&[], &[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn chordal_invariances() {
        let mut rng = seeded(72, 0);
        for _ in 0..300 {
            let qs: Vec<_> = (0..6).map(|_| random_rotation_quat(&mut rng)).collect();
            let ws: Vec<f64> = (0..6).map(|_| 0.1 + rng.random::<f64>()).collect();
            let m0 = chordal_mean(&qs, &ws).unwrap();
            let flipped: Vec<_> = qs.iter().map(|q| if rng.random::<bool>() { -*q } else { *q }).collect();
            let m1 = chordal_mean(&flipped, &ws).unwrap();
            let scaled: Vec<f64> = ws.iter().map(|w| w * 7.5).collect();
            let m2 = chordal_mean(&qs, &scaled).unwrap();
            assert!(d_quat(&m0, &m1) < 1e-9);
            assert!(d_quat(&m0, &m2) < 1e-9);
            let c0 = chordal_cost(&m0, &qs, &ws);
            for _ in 0..200 {
                let x = random_rotation_quat(&mut rng);
                assert!(c0 <= chordal_cost(&x, &qs, &ws) + 1e-12);
            }
        }
    }

    #[test]
    fn quat_mean_cases() {
        let q = UnitQuaternion::from_xyzw(0.3, 0.1, -0.5, 0.8).unwrap().canonical();
        assert!(d_quat(&quat_mean(&[q, q]).unwrap(), &q) < 1e-15);
        assert!(d_quat(&quat_mean(&[q, -q]).unwrap(), &q) < 1e-15);
        assert!(matches!(quat_mean(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn clustered_means_agree() {
        let mut rng = seeded(73, 0);
        for _ in 0..300 {
            let center = quat_to_rot(&random_rotation_quat(&mut rng));
            let qs: Vec<_> = (0..8)
                .map(|_| {
                    let axis = crate::rng::random_unit_vector3(&mut rng);
                    let angle = rng.random::<f64>() * 2.5f64.to_radians();
                    rot_to_quat(&center.compose(&exp_map(&AxisAngle(axis * angle))))
                })
                .collect();
            let ws = vec![1.0; qs.len()];
            let a = chordal_mean(&qs, &ws).unwrap();
            let b = quat_mean(&qs).unwrap();
            assert!(d_ang(&quat_to_rot(&a), &quat_to_rot(&b)).to_degrees() < 0.1);
            let cb = quat_cost(&b, &qs);
            for _ in 0..200 {
                let x = random_rotation_quat(&mut rng);
                assert!(cb <= quat_cost(&x, &qs) + 1e-12);
            }
        }
    }
}
