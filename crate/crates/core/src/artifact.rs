//! Run artifacts: manifest, energy ledger, trajectory snapshots and reports.
//!
//! Layout of an artifact directory:
//!
//! ```text
//! manifest.json    schema version, code version, config echo, status, SHA-256 of every file
//! ledger.csv       energy ledger rows
//! trajectory.json  density grids and velocity coefficients with shape metadata
//! reports.json     diagnostics report (null when diagnostics are disabled)
//! ```
//!
//! Every file is written to a temporary name and renamed into place; the
//! manifest is written last, so a directory without a manifest is incomplete.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{parse_config, serialize_config, RunConfig};
use crate::density::DensityField;
use crate::diagnostics::{ledger_csv, run_diagnostics, DiagnosticsReport, RunView};
use crate::error::{Error, Result};
use crate::momentum::VelocityCoefficients;
use crate::simulation::{simulate, Problem, Trajectory};

pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_MINOR: u32 = 0;
pub const MANIFEST: &str = "manifest.json";
pub const LEDGER: &str = "ledger.csv";
pub const TRAJECTORY: &str = "trajectory.json";
pub const REPORTS: &str = "reports.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    SolverFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub code_version: String,
    /// Configuration in TOML, exactly as parsed back by `verify`.
    pub config: String,
    pub status: RunStatus,
    pub failure: Option<String>,
    pub start_time: f64,
    pub end_time: f64,
    pub steps: usize,
    /// SHA-256 of every other file, hex encoded.
    pub files: BTreeMap<String, String>,
}

/// Trajectory with explicit shape metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTrajectory {
    pub nx: usize,
    pub ny: usize,
    pub modes: usize,
    pub dt: f64,
    /// Level stride between stored snapshots.
    pub stride: usize,
    pub times: Vec<f64>,
    /// Row-major density grids, `y` outer.
    pub rho: Vec<Vec<f64>>,
    pub coeffs: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
    pub contraction: Vec<Option<f64>>,
}

impl StoredTrajectory {
    pub fn from_trajectory(problem: &Problem, traj: &Trajectory, stride: usize) -> Self {
        let d = &problem.space.domain;
        let keep: Vec<usize> = (0..traj.rho.len()).step_by(stride.max(1)).collect();
        Self {
            nx: d.nx,
            ny: d.ny,
            modes: problem.space.dim(),
            dt: traj.dt,
            stride: stride.max(1),
            times: keep.iter().map(|&k| traj.rho[k].time).collect(),
            rho: keep.iter().map(|&k| traj.rho[k].values.clone()).collect(),
            coeffs: keep.iter().map(|&k| traj.coeffs[k].values.clone()).collect(),
            iterations: traj.iterations.clone(),
            contraction: traj.contraction.clone(),
        }
    }

    /// Rebuilds the full trajectory; needs every level.
    pub fn to_trajectory(&self, problem: &Problem) -> Result<Trajectory> {
        let d = &problem.space.domain;
        if self.stride != 1 {
            return Err(Error::Integrity(format!(
                "snapshots stored every {} levels; recomputing diagnostics needs every level",
                self.stride
            )));
        }
        if (self.nx, self.ny, self.modes) != (d.nx, d.ny, problem.space.dim()) {
            return Err(Error::Integrity("trajectory shape does not match the configuration".into()));
        }
        let levels = self.times.len();
        if levels == 0
            || self.rho.len() != levels
            || self.coeffs.len() != levels
            || self.iterations.len() + 1 != levels
            || self.contraction.len() + 1 != levels
            || self.rho.iter().any(|r| r.len() != d.nx * d.ny)
            || self.coeffs.iter().any(|c| c.len() != self.modes)
        {
            return Err(Error::Integrity("trajectory arrays have inconsistent lengths".into()));
        }
        Ok(Trajectory {
            dt: self.dt,
            rho: self
                .times
                .iter()
                .zip(&self.rho)
                .map(|(&time, v)| DensityField { time, values: v.clone() })
                .collect(),
            coeffs: self
                .times
                .iter()
                .zip(&self.coeffs)
                .map(|(&t, v)| VelocityCoefficients::new(t, v.clone()))
                .collect(),
            iterations: self.iterations.clone(),
            contraction: self.contraction.clone(),
        })
    }
}

/// What `run` produced.
#[derive(Debug)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub report: Option<DiagnosticsReport>,
    pub failure: Option<Error>,
}

/// What `verify` recomputed.
#[derive(Debug)]
pub struct VerifySummary {
    pub manifest: Manifest,
    pub report: Option<DiagnosticsReport>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    let dst = dir.join(name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &dst).map_err(|e| Error::io(&dst, e))
}

fn read(dir: &Path, name: &str) -> Result<Vec<u8>> {
    let p: PathBuf = dir.join(name);
    fs::read(&p).map_err(|e| Error::io(&p, e))
}

/// Serialised artifact contents, file name to bytes, manifest last.
pub fn render_artifact(
    config: &RunConfig,
    problem: &Problem,
    traj: &Trajectory,
    failure: Option<&Error>,
) -> Result<(Vec<(String, Vec<u8>)>, Option<DiagnosticsReport>)> {
    let view = RunView::new(problem, traj)?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let report = if config.diagnostics.enabled {
        let (rows, report) = run_diagnostics(&view, &config.diagnostic_options())?;
        files.push((LEDGER.into(), ledger_csv(&rows).into_bytes()));
        Some(report)
    } else {
        let rows = crate::diagnostics::energy_ledger(&view)?;
        files.push((LEDGER.into(), ledger_csv(&rows).into_bytes()));
        None
    };
    let stored = StoredTrajectory::from_trajectory(problem, traj, config.diagnostics.snapshot_every);
    files.push((TRAJECTORY.into(), to_json(&stored)?.into_bytes()));
    files.push((REPORTS.into(), to_json(&report)?.into_bytes()));

    let manifest = Manifest {
        schema: format!("{SCHEMA_MAJOR}.{SCHEMA_MINOR}"),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: serialize_config(config),
        status: if failure.is_some() {
            RunStatus::SolverFailure
        } else {
            RunStatus::Completed
        },
        failure: failure.map(|e| e.to_string()),
        start_time: traj.rho.first().map(|r| r.time).unwrap_or(0.0),
        end_time: traj.rho.last().map(|r| r.time).unwrap_or(0.0),
        steps: traj.steps(),
        files: files.iter().map(|(n, b)| (n.clone(), sha256_hex(b))).collect(),
    };
    files.push((MANIFEST.into(), to_json(&manifest)?.into_bytes()));
    Ok((files, report))
}

/// Simulates the configured run and writes its artifact into `out`.
pub fn run_to_dir(config: &RunConfig, out: &Path) -> Result<RunSummary> {
    let problem = config.build_problem()?;
    let outcome = simulate(&problem)?;
    let (files, report) = render_artifact(config, &problem, &outcome.trajectory, outcome.failure.as_ref())?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for (name, bytes) in &files {
        write_atomic(out, name, bytes)?;
    }
    let manifest = serde_json::from_slice(&files.last().expect("manifest").1).map_err(|e| Error::Serde(e.to_string()))?;
    Ok(RunSummary {
        manifest,
        report,
        failure: outcome.failure,
    })
}

/// Checks the schema and per-file hashes of an artifact directory.
pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let bytes = read(dir, MANIFEST)?;
    let manifest: Manifest =
        serde_json::from_slice(&bytes).map_err(|e| Error::Integrity(format!("unreadable manifest: {e}")))?;
    let major: u32 = manifest
        .schema
        .split('.')
        .next()
        .and_then(|m| m.parse().ok())
        .ok_or_else(|| Error::Integrity(format!("malformed schema version `{}`", manifest.schema)))?;
    if major > SCHEMA_MAJOR {
        return Err(Error::Integrity(format!(
            "artifact schema {} is newer than supported major version {SCHEMA_MAJOR}",
            manifest.schema
        )));
    }
    for name in [LEDGER, TRAJECTORY, REPORTS] {
        let expected = manifest
            .files
            .get(name)
            .ok_or_else(|| Error::Integrity(format!("manifest does not list {name}")))?;
        let actual = sha256_hex(&read(dir, name)?);
        if &actual != expected {
            return Err(Error::Integrity(format!("{name} does not match its recorded hash")));
        }
    }
    Ok(manifest)
}

/// Recomputes diagnostics from a stored artifact without re-simulating and
/// checks that the ledger is reproduced byte for byte.
pub fn verify_dir(dir: &Path) -> Result<VerifySummary> {
    let manifest = load_manifest(dir)?;
    let config = parse_config(&manifest.config)?;
    let problem = config.build_problem()?;
    let stored: StoredTrajectory = serde_json::from_slice(&read(dir, TRAJECTORY)?)
        .map_err(|e| Error::Integrity(format!("unreadable trajectory: {e}")))?;
    let traj = stored.to_trajectory(&problem)?;
    let failure = manifest.failure.as_ref().map(|m| Error::Integrity(m.clone()));
    let (files, report) = render_artifact(&config, &problem, &traj, failure.as_ref())?;
    let ledger = &files.iter().find(|(n, _)| n == LEDGER).expect("ledger").1;
    if *ledger != read(dir, LEDGER)? {
        return Err(Error::Integrity("recomputed ledger differs from the stored ledger".into()));
    }
    Ok(VerifySummary { manifest, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut c = RunConfig::default();
        c.domain.nx = 8;
        c.domain.ny = 8;
        c.domain.nb = 8;
        c.space.n = 4;
        c.time.final_time = 0.05;
        c.time.dt = 0.0125;
        c.diagnostics.battery_random = 2;
        c
    }

    #[test]
    fn run_then_verify() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_to_dir(&small(), dir.path()).unwrap();
        assert_eq!(s.manifest.status, RunStatus::Completed);
        let v = verify_dir(dir.path()).unwrap();
        assert_eq!(v.report, s.report);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        run_to_dir(&small(), dir.path()).unwrap();
        let p = dir.path().join(TRAJECTORY);
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(verify_dir(dir.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn newer_major_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        run_to_dir(&small(), dir.path()).unwrap();
        let p = dir.path().join(MANIFEST);
        let mut m: Manifest = serde_json::from_slice(&fs::read(&p).unwrap()).unwrap();
        m.schema = format!("{}.0", SCHEMA_MAJOR + 1);
        fs::write(&p, serde_json::to_vec(&m).unwrap()).unwrap();
        assert!(matches!(load_manifest(dir.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn sparse_snapshots_cannot_be_verified() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small();
        c.diagnostics.snapshot_every = 2;
        run_to_dir(&c, dir.path()).unwrap();
        assert!(matches!(verify_dir(dir.path()), Err(Error::Integrity(_))));
    }
}
