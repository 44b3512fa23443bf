pub mod avg;
pub mod dt_eval;
pub mod grad_check;
pub mod train;
pub mod wahba;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Creates (if needed) and returns the output directory.
pub fn out_dir(out: &Option<PathBuf>, default: &str) -> Result<PathBuf> {
    let dir = out.clone().unwrap_or_else(|| PathBuf::from(default));
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn fmt_quat(q: &so3sym::so3::UnitQuaternion) -> String {
    format!("{:.12},{:.12},{:.12},{:.12}", q.x(), q.y(), q.z(), q.w())
}
