use anyhow::{bail, Result};
use nalgebra::{Matrix4, SMatrix, Vector4};
use so3sym::rng::{gaussian, log_uniform, role, seeded, stream_id};
use so3sym::sym_rep::{qcqp_jacobian_theta, qcqp_solve, SymMat4, DEFAULT_GAP_TOL};

use crate::{Globals, Status};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Number of random symmetric matrices.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Maximum accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    /// Minimum relative eigengap `(λ₂ − λ₁) / ‖A‖₂` of the test matrices.
    #[arg(long, default_value_t = 1e-2)]
    min_gap: f64,
    /// Self-test: flip the sign of the analytic Jacobian, which must fail.
    #[arg(long)]
    inject_bug: bool,
}

pub struct Report {
    pub count: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
}

fn min_eigvec(m: &Matrix4<f64>) -> Vector4<f64> {
    let e = m.symmetric_eigen();
    e.eigenvectors.column(e.eigenvalues.imin()).into_owned()
}

fn from_upper(t: &[f64; 10]) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    let mut k = 0;
    for i in 0..4 {
        for j in i..4 {
            m[(i, j)] = t[k];
            m[(j, i)] = t[k];
            k += 1;
        }
    }
    m
}

/// Central differences of nalgebra's minimum eigenvector against the
/// analytic `∂q*/∂θ`, on random symmetric matrices with a clear eigengap.
pub fn grad_check(count: usize, seed: u64, min_gap: f64, inject_bug: bool) -> Result<Report> {
    let mut rng = seeded(seed, stream_id(0, role::GENERIC, 0));
    let mut report = Report { count: 0, max_rel_error: 0.0, worst_index: 0 };
    while report.count < count {
        let scale = log_uniform(&mut rng, 1e-2, 1e2);
        let mut theta = [0.0; 10];
        theta.iter_mut().for_each(|t| *t = gaussian(&mut rng) * scale);
        let m = from_upper(&theta);
        let mut l: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        l.sort_by(f64::total_cmp);
        let spectral = l[0].abs().max(l[3].abs());
        if (l[1] - l[0]) / spectral < min_gap {
            continue;
        }
        let a = SymMat4::symmetrize(&m);
        let sol = qcqp_solve(&a, DEFAULT_GAP_TOL)?;
        let mut j = qcqp_jacobian_theta(&a, &sol.decomp)?;
        if inject_bug {
            j = -j;
        }
        let q = *sol.quat.as_vector();
        let h = 1e-5 * spectral;
        let mut fd = SMatrix::<f64, 4, 10>::zeros();
        for k in 0..10 {
            let (mut tp, mut tm) = (theta, theta);
            tp[k] += h;
            tm[k] -= h;
            let align = |v: Vector4<f64>| if v.dot(&q) < 0.0 { -v } else { v };
            let d = (align(min_eigvec(&from_upper(&tp))) - align(min_eigvec(&from_upper(&tm)))) / (2.0 * h);
            fd.set_column(k, &d);
        }
        let err = (j - fd).norm() / fd.norm();
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = report.count;
        }
        report.count += 1;
    }
    Ok(report)
}

pub fn run(globals: &Globals, args: Args) -> Result<Status> {
    if args.count == 0 {
        bail!("--count must be positive");
    }
    if args.tolerance.is_nan() || args.tolerance <= 0.0 {
        bail!("--tolerance must be positive");
    }
    if !(args.min_gap > 0.0 && args.min_gap < 2.0) {
        bail!("--min-gap must lie in (0, 2)");
    }
    let seed = globals.seed.unwrap_or(0);
    let r = grad_check(args.count, seed, args.min_gap, args.inject_bug)?;
    let pass = r.max_rel_error <= args.tolerance;
    println!("grad-check seed={seed} count={} min_gap={:e}{}", r.count, args.min_gap, if args.inject_bug { " (injected bug)" } else { "" });
    println!("max relative error: {:.6e} (matrix #{})", r.max_rel_error, r.worst_index);
    println!("tolerance: {:e}", args.tolerance);
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { Status::Ok } else { Status::CheckFailed })
}
