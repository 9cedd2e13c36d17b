//! File outputs: gnuplot-ready CSV densities, JSON reports, manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use kfp_core::mesh::ScalarField;

use crate::report::Manifest;
use crate::Result;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// `density_eps<eps>_t<t>.csv` with columns r, theta, x, y, value.
pub fn density_file_name(eps: f64, t: f64) -> String {
    format!("density_eps{eps}_t{t}.csv")
}

pub fn write_density_csv(path: &Path, field: &ScalarField<f64>) -> Result<()> {
    let mut out = String::from("r,theta,x,y,value\n");
    let mesh = field.mesh();
    for c in 0..mesh.cells() {
        let (r, theta) = mesh.cell_center(c);
        let (x, y) = (r * theta.cos(), r * theta.sin());
        out.push_str(&format!("{r},{theta},{x},{y},{}\n", field.values()[c]));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Best-effort repository revision for the manifest.
pub fn git_revision() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()?;
    if !out.status.success() {
        return None;
    }
    let rev = String::from_utf8(out.stdout).ok()?;
    let rev = rev.trim();
    if rev.is_empty() {
        None
    } else {
        Some(rev.to_string())
    }
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    config_hash: String,
    seed: u64,
    started: Instant,
) -> Result<PathBuf> {
    let manifest = Manifest {
        command: command.to_string(),
        config_hash,
        seed,
        git_revision: git_revision(),
        wall_time_secs: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}
