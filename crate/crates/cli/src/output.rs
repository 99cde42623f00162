//! CSV tables and run manifests.

use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use zforce::experiments::{SimConfig, SweepResult};

use crate::config::{ExperimentConfig, ManifestInfo};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the config, serialized without its manifest table.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.without_manifest().to_toml().as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn integrator_summary(sim: &SimConfig) -> String {
    match &sim.integrator {
        Some(i) => format!(
            "{:?}, dt_max {:e} s, tolerance {:e}, truncation limit {:e}",
            i.method, i.dt_max, i.tolerance, i.truncation_limit
        ),
        None => "Rk4, dt_max chosen per pulse (50 points per fastest period), truncation limit 1e-6".to_string(),
    }
}

pub fn manifest(cfg: &ExperimentConfig, sim: &SimConfig, derived: &[String]) -> ExperimentConfig {
    let mut out = cfg.without_manifest();
    out.manifest = Some(ManifestInfo {
        version: VERSION.to_string(),
        config_sha256: config_hash(cfg),
        integrator: integrator_summary(sim),
        derived: derived.to_vec(),
    });
    out
}

/// Results table with a commented header block.
pub fn csv(cfg: &ExperimentConfig, result: &SweepResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# zforce {VERSION}");
    let _ = writeln!(s, "# experiment: {}", cfg.experiment.name());
    let _ = writeln!(s, "# manifest_sha256: {}", config_hash(cfg));
    for (k, v) in &result.metadata {
        let _ = writeln!(s, "# {k}: {v}");
    }
    s.push_str(&result.columns.join(","));
    s.push('\n');
    for row in &result.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub struct Artifacts {
    pub table: PathBuf,
    pub manifest: PathBuf,
}

pub fn artifact_paths(dir: &Path, cfg: &ExperimentConfig) -> Artifacts {
    let name = cfg.name();
    Artifacts { table: dir.join(format!("{name}.csv")), manifest: dir.join(format!("{name}.manifest.toml")) }
}

/// Write both files; the table goes last so a complete table always has a manifest.
pub fn write(paths: &Artifacts, table: &str, manifest: &str) -> Result<(), CliError> {
    if let Some(dir) = paths.table.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(&paths.manifest, manifest).map_err(|e| CliError::io(&paths.manifest, e))?;
    std::fs::write(&paths.table, table).map_err(|e| CliError::io(&paths.table, e))
}
