use std::path::PathBuf;

use anyhow::{bail, Result};
use so3sym::rot_avg::{chordal_cost, chordal_mean, quat_cost, quat_mean};

use super::fmt_quat;
use crate::{io, Globals, Status};

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Chordal,
    Quat,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Quaternion CSV (`x,y,z,w` with optional `weight` column).
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Chordal)]
    method: Method,
}

pub fn run(globals: &Globals, args: Args) -> Result<Status> {
    let (quats, weights, weighted) = io::read_quaternions(&args.input)?;
    let (mean, cost) = match args.method {
        Method::Chordal => {
            let m = chordal_mean(&quats, &weights)?;
            (m, chordal_cost(&m, &quats, &weights))
        }
        Method::Quat => {
            if weighted {
                bail!("the quat method does not take weights");
            }
            let m = quat_mean(&quats)?;
            (m, quat_cost(&m, &quats))
        }
    };
    let text = format!(
        "method: {}\ncount: {}\nmean_xyzw: {}\ncost: {:.12e}\n",
        match args.method {
            Method::Chordal => "chordal",
            Method::Quat => "quat",
        },
        quats.len(),
        fmt_quat(&mean),
        cost
    );
    print!("{text}");
    if let Some(dir) = &globals.out {
        std::fs::create_dir_all(dir)?;
        super::write_text(&dir.join("avg.txt"), &text)?;
    }
    Ok(Status::Ok)
}
