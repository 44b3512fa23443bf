//! Independent oracles shared by the integration tests. Nothing here calls
//! into the crate's numerical kernels.
#![allow(dead_code)]

use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, UnitQuaternion as NaQuat, Vector3, Vector4};

/// Scalar-last `(x, y, z, w)` to an nalgebra rotation.
pub fn na_rotation(q: &Vector4<f64>) -> Rotation3<f64> {
    NaQuat::from_quaternion(Quaternion::new(q[3], q[0], q[1], q[2])).to_rotation_matrix()
}

/// Rotation angle between two scalar-last quaternions, computed with
/// `atan2` so that small angles keep full precision.
pub fn quat_angle(a: &Vector4<f64>, b: &Vector4<f64>) -> f64 {
    let qa = Quaternion::new(a[3], a[0], a[1], a[2]);
    let qb = Quaternion::new(b[3], b[0], b[1], b[2]);
    let rel = qa.conjugate() * qb;
    2.0 * rel.imag().norm().atan2(rel.w.abs())
}

/// Symmetric matrix from the row-major upper triangle.
pub fn upper_to_sym(theta: &[f64]) -> Matrix4<f64> {
    assert_eq!(theta.len(), 10);
    let mut m = Matrix4::zeros();
    let mut k = 0;
    for i in 0..4 {
        for j in i..4 {
            m[(i, j)] = theta[k];
            m[(j, i)] = theta[k];
            k += 1;
        }
    }
    m
}

/// Minimum eigenpair from nalgebra's symmetric solver.
pub fn na_min_eigvec(m: &Matrix4<f64>) -> (f64, Vector4<f64>) {
    let e = m.symmetric_eigen();
    let i = e.eigenvalues.imin();
    (e.eigenvalues[i], e.eigenvectors.column(i).into_owned())
}

pub fn na_sorted_eigenvalues(m: &Matrix4<f64>) -> [f64; 4] {
    let mut l: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    l.sort_by(f64::total_cmp);
    [l[0], l[1], l[2], l[3]]
}

/// Number of eigenvalues of symmetric `m` below `x`: the sign changes in the
/// sequence of leading principal minors of the characteristic matrix
/// `m − xI`, counted as negative elimination pivots.
pub fn count_below(m: &Matrix4<f64>, x: f64) -> usize {
    let mut a = m - Matrix4::identity() * x;
    let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + m.norm());
    let mut negatives = 0;
    for k in 0..4 {
        let mut p = a[(k, k)];
        if p == 0.0 {
            p = -tiny;
        }
        if p < 0.0 {
            negatives += 1;
        }
        for i in k + 1..4 {
            let f = a[(i, k)] / p;
            for j in k + 1..4 {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    negatives
}

/// Eigenvalues (ascending) by bisection on the characteristic-polynomial
/// sign-change count, run to the last representable bit.
pub fn bisection_eigenvalues(m: &Matrix4<f64>) -> [f64; 4] {
    // Gershgorin bound
    let r = (0..4)
        .map(|i| (0..4).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let mut out = [0.0; 4];
    for (k, slot) in out.iter_mut().enumerate() {
        let (mut lo, mut hi) = (-r, r);
        // smallest x with count_below(x) > k
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if count_below(m, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        *slot = 0.5 * (lo + hi);
    }
    out
}

/// Weighted orthogonal Procrustes (Kabsch): `argmin_R Σ wᵢ ‖vᵢ − R uᵢ‖²`.
pub fn kabsch(us: &[Vector3<f64>], vs: &[Vector3<f64>], ws: &[f64]) -> Matrix3<f64> {
    let mut h = Matrix3::zeros();
    for ((u, v), w) in us.iter().zip(vs).zip(ws) {
        h += v * u.transpose() * *w;
    }
    let svd = h.svd(true, true);
    let (uu, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (uu * vt).determinant().signum();
    uu * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * vt
}

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Low-discrepancy samples on S³: a Halton sequence in `[0,1)³` pushed
/// through the uniform unit-quaternion parametrization.
pub fn halton_s3(n: usize) -> Vec<Vector4<f64>> {
    use std::f64::consts::TAU;
    (1..=n as u64)
        .map(|i| {
            let (u1, u2, u3) = (radical_inverse(i, 2), radical_inverse(i, 3), radical_inverse(i, 5));
            let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
            Vector4::new(a * (TAU * u2).sin(), a * (TAU * u2).cos(), b * (TAU * u3).sin(), b * (TAU * u3).cos())
        })
        .collect()
}

/// `Σᵢ wᵢ ‖R(q) − R(qᵢ)‖²_F` with rotations built by nalgebra.
pub fn chordal_cost_oracle(q: &Vector4<f64>, quats: &[Vector4<f64>], ws: &[f64]) -> f64 {
    let r = na_rotation(q);
    quats
        .iter()
        .zip(ws)
        .map(|(qi, w)| w * (r.matrix() - na_rotation(qi).matrix()).norm_squared())
        .sum()
}
