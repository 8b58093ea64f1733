//! CSV tables and the run manifest.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so the
//! same inputs always give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{unguarded_precession_frequency, BathParams, DotParams, ScanAxis, SimulationConfig};
use crate::error::{Error, Result};
use crate::kinetics::{FlipRates, NuclearDistribution, PolarizationGrid};
use crate::pipeline::ObservableRow;
use crate::spin::SpinPoint;
use crate::units;

pub const SPIN_HEADER: [&str; 5] = ["omega_over_2pi_GHz", "Sx", "Sy", "Sz", "rho_TT"];
pub const RATES_HEADER: [&str; 8] = [
    "n",
    "w_plus",
    "w_minus",
    "alpha_plus",
    "alpha_minus",
    "Sx",
    "rho_TT",
    "drift",
];
pub const DISTRIBUTION_HEADER: [&str; 3] = ["n", "P", "omega_over_2pi_GHz"];
pub const TRAJECTORY_HEADER: [&str; 3] = ["t_s", "mean_n", "variance_n"];

/// Version string stamped into manifests. A build may inject a
/// `git describe` result through `NUFOCUS_GIT_DESCRIBE`.
pub fn version_string() -> &'static str {
    option_env!("NUFOCUS_GIT_DESCRIBE").unwrap_or(concat!("v", env!("CARGO_PKG_VERSION")))
}

/// SHA-256 of the canonical serialization of `config`, hex encoded.
pub fn config_hash(config: &SimulationConfig) -> String {
    let digest = Sha256::digest(config.to_toml_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn output_error(path: &Path, message: impl ToString) -> Error {
    Error::Output {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Creates `dir` (and parents) and checks that it accepts files.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
    let meta = fs::metadata(dir).map_err(|e| output_error(dir, e))?;
    if meta.permissions().readonly() {
        return Err(output_error(dir, "directory is read-only"));
    }
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn write_table<I>(path: &Path, header: &[&str], rows: I) -> Result<usize>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| output_error(path, e))?;
    w.write_record(header).map_err(|e| output_error(path, e))?;
    let mut count = 0;
    for row in rows {
        w.write_record(&row).map_err(|e| output_error(path, e))?;
        count += 1;
    }
    w.flush().map_err(|e| output_error(path, e))?;
    Ok(count)
}

/// Spin table; `S = s/2` components after the pulse.
pub fn write_spin_csv(path: &Path, spin: &[SpinPoint]) -> Result<usize> {
    write_table(
        path,
        &SPIN_HEADER,
        spin.iter().map(|p| {
            let s = p.state.spin();
            vec![
                num(units::rad_per_s_to_ghz(p.omega)),
                num(s.x),
                num(s.y),
                num(s.z),
                num(p.state.trion_yield),
            ]
        }),
    )
}

pub fn write_rates_csv(path: &Path, rates: &FlipRates) -> Result<usize> {
    write_table(
        path,
        &RATES_HEADER,
        (0..rates.len()).map(|k| {
            vec![
                num(rates.n[k]),
                num(rates.w_plus[k]),
                num(rates.w_minus[k]),
                num(rates.alpha_plus[k]),
                num(rates.alpha_minus[k]),
                num(rates.sx[k]),
                num(rates.rho_tt[k]),
                num(rates.drift(k)),
            ]
        }),
    )
}

pub fn write_distribution_csv(
    path: &Path,
    grid: &PolarizationGrid,
    p: &NuclearDistribution,
    dot: &DotParams,
    bath: &BathParams,
) -> Result<usize> {
    write_table(
        path,
        &DISTRIBUTION_HEADER,
        p.p.iter().enumerate().map(|(k, &pk)| {
            let n = grid.value(k);
            vec![
                num(n),
                num(pk),
                num(units::rad_per_s_to_ghz(unguarded_precession_frequency(n, dot, bath))),
            ]
        }),
    )
}

/// Moments of an evolving distribution; `times` aligned with `trajectory`.
pub fn write_trajectory_csv(
    path: &Path,
    grid: &PolarizationGrid,
    times: &[f64],
    trajectory: &[NuclearDistribution],
) -> Result<usize> {
    write_table(
        path,
        &TRAJECTORY_HEADER,
        times.iter().zip(trajectory).map(|(&t, p)| {
            let (mean, var) = p.moments(grid);
            vec![num(t), num(mean), num(var)]
        }),
    )
}

/// Header of the observables table; the first column carries the axis unit.
pub fn observables_header(axis: ScanAxis) -> Vec<String> {
    vec![
        axis.header(),
        "mean_n".into(),
        "variance_n".into(),
        "freq_shift_GHz".into(),
        "amplitude".into(),
        "distribution_ref".into(),
        "error".into(),
    ]
}

pub fn write_observables_csv(path: &Path, axis: ScanAxis, rows: &[ObservableRow]) -> Result<usize> {
    let header = observables_header(axis);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(
        path,
        &header,
        rows.iter().map(|r| {
            vec![
                num(r.scan_value),
                num(r.mean_n),
                num(r.variance_n),
                num(r.freq_shift),
                num(r.amplitude),
                r.distribution_ref
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub kind: String,
    pub rows: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub config: String,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(command: &str, config: &SimulationConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: version_string(),
            command: command.to_string(),
            config_hash: config_hash(config),
            config: config.to_toml_string(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, kind: &str, rows: Option<usize>) {
        self.files.push(ManifestEntry {
            path: path.into(),
            kind: kind.to_string(),
            rows,
        });
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| output_error(path, e))?;
        fs::write(path, text + "\n").map_err(|e| output_error(path, e))
    }
}
