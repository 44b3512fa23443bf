use std::path::PathBuf;

use anyhow::{bail, Result};
use so3sym::bingham::dispersion_trace;
use so3sym::rng::{role, seeded, stream_id};
use so3sym::so3::{d_ang_deg, quat_to_rot, RotationMatrix};
use so3sym::wahba::{build_data_matrix, procrustes_svd, sample_synthetic, solve_wahba_full, wahba_cost, Correspondences, SyntheticConfig};

use super::fmt_quat;
use crate::{io, Globals, Status};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Correspondence CSV (`ux,uy,uz,vx,vy,vz,sigma`).
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    input: Option<PathBuf>,
    /// Draw a random instance instead of reading a file.
    #[arg(long)]
    synthetic: bool,
    /// Number of synthetic correspondences.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Synthetic noise standard deviation.
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// Maximum synthetic rotation angle, degrees.
    #[arg(long, default_value_t = 180.0)]
    phi_max_deg: f64,
}

pub fn run(globals: &Globals, args: Args) -> Result<Status> {
    let (truth, c): (Option<RotationMatrix>, Correspondences) = if args.synthetic {
        if args.n == 0 {
            bail!("--n must be positive");
        }
        if !(args.phi_max_deg > 0.0 && args.phi_max_deg <= 180.0) {
            bail!("--phi-max-deg must lie in (0, 180]");
        }
        let seed = globals.seed.unwrap_or(0);
        let cfg = SyntheticConfig {
            num_matches: args.n,
            sigma: args.sigma,
            phi_max: args.phi_max_deg.to_radians(),
            seed,
        };
        let mut rng = seeded(seed, stream_id(0, role::GENERIC, 0));
        let (r, c) = sample_synthetic(&cfg, &mut rng)?;
        (Some(r), c)
    } else {
        (None, io::read_correspondences(args.input.as_ref().expect("clap enforces input"))?)
    };

    let a = build_data_matrix(&c);
    let sol = solve_wahba_full(&c)?;
    let q = sol.quat;
    let trace = dispersion_trace(&a)?.0;
    let oracle = procrustes_svd(&c)?;
    let rot = quat_to_rot(&q);
    let mut report = vec![
        ("pairs", c.len().to_string()),
        ("q_xyzw", fmt_quat(&q)),
        ("cost", format!("{:.12e}", wahba_cost(&c, &q))),
        ("eigengap", format!("{:.12e}", sol.eigengap)),
        ("dispersion_trace", format!("{:.12e}", trace)),
        ("procrustes_diff_deg", format!("{:.6e}", d_ang_deg(&rot, &oracle))),
    ];
    if let Some(t) = truth {
        report.push(("error_deg", format!("{:.6e}", d_ang_deg(&rot, &t))));
    }
    let text: String = report.iter().map(|(k, v)| format!("{k}: {v}\n")).collect();
    print!("{text}");
    if let Some(dir) = &globals.out {
        std::fs::create_dir_all(dir)?;
        super::write_text(&dir.join("wahba.txt"), &text)?;
    }
    Ok(Status::Ok)
}
