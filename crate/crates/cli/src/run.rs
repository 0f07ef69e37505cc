//! Run directories and manifests.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use hapnav_core::config::Config;

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.cfg";

/// Identifies the binary that produced a run.
pub fn build_id() -> String {
    let backend = if cfg!(feature = "parallel") { "parallel" } else { "sequential" };
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    format!("hapnav-{} {backend} {profile}", env!("CARGO_PKG_VERSION"))
}

/// Creates `<out>/<timestamp>-<command>-seed<seed>`, adding a numeric suffix on collision.
pub fn create_run_dir(out: &Path, command: &str, seed: u64) -> Result<PathBuf, CliError> {
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    let base = format!("{stamp}-{command}-seed{seed}");
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for k in 1.. {
        let name = if k == 1 { base.clone() } else { format!("{base}-{k}") };
        let dir = out.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::io(&dir, e)),
        }
    }
    unreachable!("run directory suffixes exhausted")
}

/// Uses `dir` as given, creating it if needed.
pub fn use_run_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir.to_path_buf())
}

/// Effective configuration plus command and build, written into the run directory.
/// Passing the file back as `--config` to the same command reproduces the run.
pub fn write_manifest(dir: &Path, command: &str, effective: &Config) -> Result<(), CliError> {
    let mut m = effective.clone();
    m.set("manifest.command", command);
    m.set("manifest.build", build_id());
    write_text(&dir.join(MANIFEST_FILE), &m.to_text())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
