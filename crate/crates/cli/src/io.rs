//! File formats: correspondence and quaternion CSV input, versioned result
//! CSV output.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::{Vector3, Vector4};
use so3sym::nn::{CurveRow, DtSample};
use so3sym::so3::UnitQuaternion;
use so3sym::wahba::{Correspondences, Pair};

pub const RESULTS_VERSION: &str = "# so3sym results v1";
pub const DT_VERSION: &str = "# so3sym dt-samples v1";

const CORRESPONDENCE_COLUMNS: [&str; 7] = ["ux", "uy", "uz", "vx", "vy", "vz", "sigma"];

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_field(record: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<f64> {
    let raw = record.get(i).with_context(|| format!("line {line}: missing column `{name}`"))?;
    let v: f64 = raw
        .parse()
        .with_context(|| format!("line {line}: `{raw}` in column `{name}` is not a number"))?;
    if !v.is_finite() {
        bail!("line {line}: non-finite value in column `{name}`");
    }
    Ok(v)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Reads `ux,uy,uz,vx,vy,vz,sigma` rows.
pub fn read_correspondences(path: &Path) -> Result<Correspondences> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().with_context(|| format!("{}: cannot read header", path.display()))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != CORRESPONDENCE_COLUMNS {
        bail!(
            "{}: header must be `{}`, found `{}`",
            path.display(),
            CORRESPONDENCE_COLUMNS.join(","),
            names.join(",")
        );
    }
    let mut pairs = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| match e.position() {
            Some(p) => anyhow::anyhow!("line {}: {e}", p.line()),
            None => anyhow::anyhow!("{e}"),
        })?;
        let line = line_of(&record);
        let f: Vec<f64> = CORRESPONDENCE_COLUMNS
            .iter()
            .enumerate()
            .map(|(i, n)| parse_field(&record, i, n, line))
            .collect::<Result<_>>()?;
        if f[6] <= 0.0 {
            bail!("line {line}: sigma must be positive, got {}", f[6]);
        }
        pairs.push(Pair {
            u: Vector3::new(f[0], f[1], f[2]),
            v: Vector3::new(f[3], f[4], f[5]),
            sigma: f[6],
        });
    }
    if pairs.is_empty() {
        bail!("{}: no correspondences", path.display());
    }
    Ok(Correspondences::new(pairs)?)
}

/// Reads `x,y,z,w[,weight]` rows; weights default to 1.
pub fn read_quaternions(path: &Path) -> Result<(Vec<UnitQuaternion>, Vec<f64>, bool)> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().with_context(|| format!("{}: cannot read header", path.display()))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let weighted = match names.as_slice() {
        ["x", "y", "z", "w"] => false,
        ["x", "y", "z", "w", "weight"] => true,
        _ => bail!("{}: header must be `x,y,z,w` or `x,y,z,w,weight`, found `{}`", path.display(), names.join(",")),
    };
    let (mut quats, mut weights) = (Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record.map_err(|e| match e.position() {
            Some(p) => anyhow::anyhow!("line {}: {e}", p.line()),
            None => anyhow::anyhow!("{e}"),
        })?;
        let line = line_of(&record);
        let f: Vec<f64> = names.iter().enumerate().map(|(i, n)| parse_field(&record, i, n, line)).collect::<Result<_>>()?;
        let q = UnitQuaternion::new_normalize(Vector4::new(f[0], f[1], f[2], f[3]))
            .with_context(|| format!("line {line}: quaternion has near-zero norm"))?;
        let w = if weighted { f[4] } else { 1.0 };
        if w < 0.0 {
            bail!("line {line}: weight must be non-negative, got {w}");
        }
        quats.push(q);
        weights.push(w);
    }
    if quats.is_empty() {
        bail!("{}: no quaternions", path.display());
    }
    Ok((quats, weights, weighted))
}

pub fn write_results(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut out = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    writeln!(out, "{RESULTS_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "seed", "lr", "epoch", "split", "head", "mean", "median", "p10", "p90", "degenerate"])?;
    for r in rows {
        let s = r.summary;
        w.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            format!("{:e}", r.lr),
            r.epoch.to_string(),
            r.split.name().to_string(),
            r.head.name().to_string(),
            s.mean.to_string(),
            s.median.to_string(),
            s.p10.to_string(),
            s.p90.to_string(),
            r.degenerate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub struct DtRowContext<'a> {
    pub trial: u32,
    pub seed: u64,
    pub lr: f64,
    pub head: &'a str,
    pub corruption: &'a str,
    pub quantile: f64,
}

pub fn write_dt_samples(path: &Path, ctx: &DtRowContext, samples: &[DtSample]) -> Result<()> {
    let mut out = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    writeln!(out, "{DT_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "seed", "lr", "head", "corruption", "q", "index", "error_deg", "trace", "kept", "corrupted"])?;
    for (i, s) in samples.iter().enumerate() {
        w.write_record([
            ctx.trial.to_string(),
            ctx.seed.to_string(),
            format!("{:e}", ctx.lr),
            ctx.head.to_string(),
            ctx.corruption.to_string(),
            ctx.quantile.to_string(),
            i.to_string(),
            s.error_deg.map_or_else(String::new, |e| e.to_string()),
            s.trace.to_string(),
            (s.kept as u8).to_string(),
            (s.corrupted as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
