//! Physical parameters, derived quantities and the configuration file.
//!
//! The file format is TOML with one table per section (`[dot]`, `[pulse]`,
//! `[bath]`, `[numerics]`, `[scan]`, `[output]`). Dimensioned values are
//! either bare numbers in the canonical unit (see [`crate::units`]) or strings
//! carrying a unit suffix such as `"0.4 meV"` or `"12.3 ns"`. Every key has a
//! default, so an empty file is a valid single-point configuration.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::units::{self, format_quantity, parse_quantity, parse_values, Dimension};

/// Default electron g-factor; gives a 12 GHz precession at 2 T.
pub const DEFAULT_G_FACTOR: f64 = 0.43;

/// Quantum-dot electron parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DotParams {
    pub g_factor: f64,
    /// Tesla.
    pub b_field: f64,
    /// Seconds; may be infinite.
    pub t2_electron: f64,
    /// Pulse repetition period, seconds.
    pub rep_period: f64,
}

impl Default for DotParams {
    fn default() -> Self {
        Self {
            g_factor: DEFAULT_G_FACTOR,
            b_field: 2.0,
            t2_electron: 100e-9,
            rep_period: 12.3e-9,
        }
    }
}

impl DotParams {
    /// Bare electron Zeeman precession frequency `g μ_B B / ħ` in rad/s.
    pub fn zeeman_frequency(&self) -> f64 {
        zeeman_frequency(self)
    }

    /// Spacing of the phase-synchronization comb `2π / T_R` in rad/s.
    pub fn psc_spacing(&self) -> f64 {
        2.0 * PI / self.rep_period
    }

    /// Returns a copy whose g-factor is nudged so that the bare precession
    /// frequency sits exactly on the nearest phase-synchronization condition.
    pub fn snapped_to_psc(&self) -> Self {
        let spacing = self.psc_spacing();
        let k = (self.zeeman_frequency() / spacing).round().max(1.0);
        let g = k * spacing * units::HBAR_MEV_S / (units::MU_B_MEV_PER_T * self.b_field);
        Self {
            g_factor: g,
            ..*self
        }
    }
}

/// One pulse of the train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseParams {
    /// Pulse area in radians, defined on a single optical-basis transition.
    pub area: f64,
    /// Spectral intensity FWHM, meV.
    pub bandwidth_fwhm: f64,
    /// Laser energy minus the mean transition energy, meV.
    pub detuning: f64,
    /// Compensator retardance in radians; π/2 is circular.
    pub retardance: f64,
    /// +1 or −1.
    pub helicity_sign: f64,
}

impl Default for PulseParams {
    fn default() -> Self {
        Self {
            area: PI,
            bandwidth_fwhm: 0.7,
            detuning: 0.0,
            retardance: PI / 2.0,
            helicity_sign: 1.0,
        }
    }
}

impl PulseParams {
    /// Envelope time constant τ of `sech(t/τ)`, seconds.
    pub fn duration(&self) -> f64 {
        pulse_duration_from_bandwidth(self.bandwidth_fwhm)
    }
}

/// Nuclear spin bath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathParams {
    /// Hyperfine constant, meV. Full polarization shifts the electron by A.
    pub a_hyperfine: f64,
    pub n_nuclei: u32,
    /// Per-nucleus depolarization rate, 1/s.
    pub gamma_depol: f64,
    /// Half-width of the polarization grid.
    pub n_window: f64,
}

impl Default for BathParams {
    fn default() -> Self {
        Self {
            a_hyperfine: 0.1,
            n_nuclei: 20_000,
            gamma_depol: 2e-2,
            n_window: 0.3,
        }
    }
}

/// Integration and discretization controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    /// Max-norm agreement required between successive step refinements.
    pub propagator_tol: f64,
    pub initial_steps: u32,
    pub max_refinements: u32,
    /// Integration half-window in units of τ.
    pub pulse_window: f64,
    pub use_cache: bool,
    /// Propagator cache spacing in ordinary frequency, Hz.
    pub cache_step: f64,
    /// Lower guard on the precession frequency, Hz.
    pub freq_min: f64,
    /// Half-span around the bare frequency for spin-vs-frequency tables, Hz.
    pub spin_span: f64,
    pub spin_points: u32,
    pub evolve_dt: f64,
    pub evolve_steps: u32,
    pub evolve_record_every: u32,
    pub evolve_initial_n: f64,
    pub dump_distributions: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            propagator_tol: 1e-9,
            initial_steps: 256,
            max_refinements: 10,
            pulse_window: 20.0,
            use_cache: true,
            cache_step: 250e6,
            freq_min: 0.1e9,
            spin_span: 0.25e9,
            spin_points: 401,
            evolve_dt: 1e-3,
            evolve_steps: 1000,
            evolve_record_every: 100,
            evolve_initial_n: 0.0,
            dump_distributions: false,
        }
    }
}

impl Numerics {
    /// Precession-frequency guard in rad/s.
    pub fn omega_min(&self) -> f64 {
        units::hz_to_rad_per_s(self.freq_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanAxis {
    #[default]
    None,
    Detuning,
    Area,
    BField,
    Retardance,
}

impl ScanAxis {
    pub fn name(self) -> &'static str {
        match self {
            ScanAxis::None => "none",
            ScanAxis::Detuning => "detuning",
            ScanAxis::Area => "area",
            ScanAxis::BField => "B_field",
            ScanAxis::Retardance => "retardance",
        }
    }

    pub fn dimension(self) -> Dimension {
        match self {
            ScanAxis::None => Dimension::Dimensionless,
            ScanAxis::Detuning => Dimension::Energy,
            ScanAxis::Area | ScanAxis::Retardance => Dimension::Angle,
            ScanAxis::BField => Dimension::Field,
        }
    }

    /// Column header for scan output, including the unit.
    pub fn header(self) -> String {
        match self {
            ScanAxis::None => "point".to_string(),
            _ => format!("{}_{}", self.name(), self.dimension().canonical_suffix()),
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Some(match text.trim() {
            "none" | "" => ScanAxis::None,
            "detuning" => ScanAxis::Detuning,
            "area" => ScanAxis::Area,
            "B_field" | "b_field" | "field" => ScanAxis::BField,
            "retardance" => ScanAxis::Retardance,
            _ => return None,
        })
    }

    /// Writes `value` (canonical units) into the axis field of `config`.
    pub fn apply(self, config: &mut SimulationConfig, value: f64) {
        match self {
            ScanAxis::None => {}
            ScanAxis::Detuning => config.pulse.detuning = value,
            ScanAxis::Area => config.pulse.area = value,
            ScanAxis::BField => config.dot.b_field = value,
            ScanAxis::Retardance => config.pulse.retardance = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScanSpec {
    pub axis: ScanAxis,
    /// Axis values in canonical units.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    /// Output directory.
    pub path: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            path: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationConfig {
    pub dot: DotParams,
    pub pulse: PulseParams,
    pub bath: BathParams,
    pub numerics: Numerics,
    pub scan: ScanSpec,
    pub output: OutputSpec,
}

/// Envelope constant τ (seconds) of a `sech(t/τ)` field whose spectral
/// intensity has the given FWHM (meV).
///
/// The field spectrum is `∝ sech(πτω/2)`, so the intensity falls to one half
/// where `sech(πτω/2) = 2^{-1/2}`.
pub fn pulse_duration_from_bandwidth(bandwidth_fwhm: f64) -> f64 {
    let half = (1.0 / 2f64.sqrt()).recip().acosh(); // arcsech(2^{-1/2})
    4.0 * half * units::HBAR_MEV_S / (PI * bandwidth_fwhm)
}

pub fn zeeman_frequency(dot: &DotParams) -> f64 {
    dot.g_factor * units::MU_B_MEV_PER_T * dot.b_field / units::HBAR_MEV_S
}

/// Electron precession frequency (rad/s) at nuclear polarization `n`.
pub fn precession_frequency(
    n: f64,
    dot: &DotParams,
    bath: &BathParams,
    omega_min: f64,
) -> Result<f64> {
    let omega = unguarded_precession_frequency(n, dot, bath);
    if omega <= omega_min {
        return Err(Error::NonpositiveFrequency { n, omega });
    }
    Ok(omega)
}

/// `ω_e0 + n A / ħ` without the positivity guard.
#[inline]
pub fn unguarded_precession_frequency(n: f64, dot: &DotParams, bath: &BathParams) -> f64 {
    zeeman_frequency(dot) + n * units::mev_to_rad_per_s(bath.a_hyperfine)
}

impl SimulationConfig {
    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            Error::Syntax(e.message().to_string())
        })?;
        let mut config = SimulationConfig::default();
        for (section, body) in &table {
            let toml::Value::Table(body) = body else {
                return Err(Error::Syntax(format!("[{section}] must be a table")));
            };
            for (key, value) in body {
                config.set(section, key, value)?;
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies a `section.key=value` override. The value is parsed as text
    /// with optional unit suffix.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Syntax(format!("override {assignment:?} lacks '='")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Syntax(format!("override {path:?} is not section.key")))?;
        self.set(section, key, &toml::Value::String(value.trim().to_string()))
    }

    fn set(&mut self, section: &str, key: &str, value: &toml::Value) -> Result<()> {
        let full = format!("{section}.{key}");
        let num = |dim: Dimension| -> Result<f64> { quantity(&full, value, dim) };
        match (section, key) {
            ("dot", "g_factor") => self.dot.g_factor = num(Dimension::Dimensionless)?,
            ("dot", "B_field") => self.dot.b_field = num(Dimension::Field)?,
            ("dot", "T2_electron") => self.dot.t2_electron = num(Dimension::Time)?,
            ("dot", "T_R") => self.dot.rep_period = num(Dimension::Time)?,
            ("pulse", "area") => self.pulse.area = num(Dimension::Angle)?,
            ("pulse", "bandwidth_fwhm") => self.pulse.bandwidth_fwhm = num(Dimension::Energy)?,
            ("pulse", "detuning") => self.pulse.detuning = num(Dimension::Energy)?,
            ("pulse", "retardance") => self.pulse.retardance = num(Dimension::Angle)?,
            ("pulse", "helicity_sign") => self.pulse.helicity_sign = num(Dimension::Dimensionless)?,
            ("bath", "A_hyperfine") => self.bath.a_hyperfine = num(Dimension::Energy)?,
            ("bath", "N_nuclei") => self.bath.n_nuclei = count(&full, num(Dimension::Dimensionless)?)?,
            ("bath", "gamma_depol") => self.bath.gamma_depol = num(Dimension::Frequency)?,
            ("bath", "n_window") => self.bath.n_window = num(Dimension::Dimensionless)?,
            ("numerics", "propagator_tol") => self.numerics.propagator_tol = num(Dimension::Dimensionless)?,
            ("numerics", "initial_steps") => self.numerics.initial_steps = count(&full, num(Dimension::Dimensionless)?)?,
            ("numerics", "max_refinements") => self.numerics.max_refinements = count(&full, num(Dimension::Dimensionless)?)?,
            ("numerics", "pulse_window") => self.numerics.pulse_window = num(Dimension::Dimensionless)?,
            ("numerics", "use_cache") => self.numerics.use_cache = boolean(&full, value)?,
            ("numerics", "cache_step") => self.numerics.cache_step = num(Dimension::Frequency)?,
            ("numerics", "freq_min") => self.numerics.freq_min = num(Dimension::Frequency)?,
            ("numerics", "spin_span") => self.numerics.spin_span = num(Dimension::Frequency)?,
            ("numerics", "spin_points") => self.numerics.spin_points = count(&full, num(Dimension::Dimensionless)?)?,
            ("numerics", "evolve_dt") => self.numerics.evolve_dt = num(Dimension::Time)?,
            ("numerics", "evolve_steps") => self.numerics.evolve_steps = count(&full, num(Dimension::Dimensionless)?)?,
            ("numerics", "evolve_record_every") => self.numerics.evolve_record_every = count(&full, num(Dimension::Dimensionless)?)?,
            ("numerics", "evolve_initial_n") => self.numerics.evolve_initial_n = num(Dimension::Dimensionless)?,
            ("numerics", "dump_distributions") => self.numerics.dump_distributions = boolean(&full, value)?,
            ("scan", "axis") => {
                let text = string(&full, value)?;
                self.scan.axis = ScanAxis::parse(&text)
                    .ok_or_else(|| Error::invalid(&full, format!("unknown axis {text:?}")))?;
            }
            ("scan", "values") => {
                // Tables iterate in key order, so `axis` is already set here.
                let dim = self.scan.axis.dimension();
                self.scan.values = match value {
                    toml::Value::Array(items) => items
                        .iter()
                        .map(|v| quantity(&full, v, dim))
                        .collect::<Result<_>>()?,
                    toml::Value::String(text) => parse_values(text, dim)
                        .map_err(|source| Error::Unit { key: full.clone(), source })?,
                    other => vec![quantity(&full, other, dim)?],
                };
            }
            ("output", "path") => self.output.path = PathBuf::from(string(&full, value)?),
            ("output", "format") => {
                let text = string(&full, value)?;
                self.output.format = match text.as_str() {
                    "csv" => OutputFormat::Csv,
                    _ => return Err(Error::invalid(&full, format!("unknown format {text:?}"))),
                };
            }
            _ => return Err(Error::UnknownKey(full)),
        }
        Ok(())
    }
}

impl SimulationConfig {
    /// Checks every invariant, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, key: &str, reason: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(key, reason))
            }
        }
        let d = &self.dot;
        check(d.g_factor > 0.0 && d.g_factor.is_finite(), "dot.g_factor", "must be positive")?;
        check(d.b_field >= 0.0 && d.b_field.is_finite(), "dot.B_field", "must be non-negative")?;
        check(d.t2_electron > 0.0, "dot.T2_electron", "must be positive")?;
        check(d.rep_period > 0.0 && d.rep_period.is_finite(), "dot.T_R", "must be positive")?;

        let p = &self.pulse;
        check(p.area >= 0.0 && p.area.is_finite(), "pulse.area", "must be non-negative")?;
        check(
            p.bandwidth_fwhm > 0.0 && p.bandwidth_fwhm.is_finite(),
            "pulse.bandwidth_fwhm",
            "must be positive",
        )?;
        check(p.detuning.is_finite(), "pulse.detuning", "must be finite")?;
        check(
            (0.0..=PI).contains(&p.retardance),
            "pulse.retardance",
            "must lie in [0, pi]",
        )?;
        check(
            p.helicity_sign == 1.0 || p.helicity_sign == -1.0,
            "pulse.helicity_sign",
            "must be +1 or -1",
        )?;

        let b = &self.bath;
        check(b.a_hyperfine > 0.0 && b.a_hyperfine.is_finite(), "bath.A_hyperfine", "must be positive")?;
        check(
            b.n_nuclei >= 2 && b.n_nuclei % 2 == 0,
            "bath.N_nuclei",
            "must be an even count of at least 2",
        )?;
        check(b.gamma_depol >= 0.0 && b.gamma_depol.is_finite(), "bath.gamma_depol", "must be non-negative")?;
        check(b.n_window > 0.0 && b.n_window <= 1.0, "bath.n_window", "must lie in (0, 1]")?;

        let n = &self.numerics;
        check(n.propagator_tol > 0.0, "numerics.propagator_tol", "must be positive")?;
        check(n.initial_steps >= 1, "numerics.initial_steps", "must be positive")?;
        check(n.pulse_window > 0.0 && n.pulse_window.is_finite(), "numerics.pulse_window", "must be positive")?;
        check(n.cache_step > 0.0 && n.cache_step.is_finite(), "numerics.cache_step", "must be positive")?;
        check(n.freq_min > 0.0 && n.freq_min.is_finite(), "numerics.freq_min", "must be positive")?;
        check(n.spin_span > 0.0, "numerics.spin_span", "must be positive")?;
        check(n.spin_points >= 2, "numerics.spin_points", "must be at least 2")?;
        check(n.evolve_dt > 0.0, "numerics.evolve_dt", "must be positive")?;
        check(n.evolve_record_every >= 1, "numerics.evolve_record_every", "must be positive")?;
        check(n.evolve_initial_n.abs() <= b.n_window, "numerics.evolve_initial_n", "must lie inside the window")?;

        let s = &self.scan;
        check(
            s.axis != ScanAxis::None || s.values.is_empty(),
            "scan.values",
            "requires scan.axis",
        )?;
        for &v in &s.values {
            let mut probe = self.clone();
            probe.scan = ScanSpec::default();
            s.axis.apply(&mut probe, v);
            probe.validate().map_err(|e| match e {
                Error::Invalid { key, reason } => {
                    Error::invalid("scan.values", format!("value {v} violates {key}: {reason}"))
                }
                other => other,
            })?;
        }
        Ok(())
    }

    /// Serializes every key; [`SimulationConfig::from_toml_str`] restores it exactly.
    pub fn to_toml_string(&self) -> String {
        let q = format_quantity;
        let mut out = String::new();
        let d = &self.dot;
        let _ = writeln!(out, "[dot]");
        let _ = writeln!(out, "g_factor = {:?}", d.g_factor);
        let _ = writeln!(out, "B_field = {:?}", q(d.b_field, Dimension::Field));
        let _ = writeln!(out, "T2_electron = {:?}", q(d.t2_electron, Dimension::Time));
        let _ = writeln!(out, "T_R = {:?}", q(d.rep_period, Dimension::Time));
        let p = &self.pulse;
        let _ = writeln!(out, "\n[pulse]");
        let _ = writeln!(out, "area = {:?}", q(p.area, Dimension::Angle));
        let _ = writeln!(out, "bandwidth_fwhm = {:?}", q(p.bandwidth_fwhm, Dimension::Energy));
        let _ = writeln!(out, "detuning = {:?}", q(p.detuning, Dimension::Energy));
        let _ = writeln!(out, "retardance = {:?}", q(p.retardance, Dimension::Angle));
        let _ = writeln!(out, "helicity_sign = {:?}", p.helicity_sign);
        let b = &self.bath;
        let _ = writeln!(out, "\n[bath]");
        let _ = writeln!(out, "A_hyperfine = {:?}", q(b.a_hyperfine, Dimension::Energy));
        let _ = writeln!(out, "N_nuclei = {}", b.n_nuclei);
        let _ = writeln!(out, "gamma_depol = {:?}", q(b.gamma_depol, Dimension::Frequency));
        let _ = writeln!(out, "n_window = {:?}", b.n_window);
        let n = &self.numerics;
        let _ = writeln!(out, "\n[numerics]");
        let _ = writeln!(out, "propagator_tol = {:?}", n.propagator_tol);
        let _ = writeln!(out, "initial_steps = {}", n.initial_steps);
        let _ = writeln!(out, "max_refinements = {}", n.max_refinements);
        let _ = writeln!(out, "pulse_window = {:?}", n.pulse_window);
        let _ = writeln!(out, "use_cache = {}", n.use_cache);
        let _ = writeln!(out, "cache_step = {:?}", q(n.cache_step, Dimension::Frequency));
        let _ = writeln!(out, "freq_min = {:?}", q(n.freq_min, Dimension::Frequency));
        let _ = writeln!(out, "spin_span = {:?}", q(n.spin_span, Dimension::Frequency));
        let _ = writeln!(out, "spin_points = {}", n.spin_points);
        let _ = writeln!(out, "evolve_dt = {:?}", q(n.evolve_dt, Dimension::Time));
        let _ = writeln!(out, "evolve_steps = {}", n.evolve_steps);
        let _ = writeln!(out, "evolve_record_every = {}", n.evolve_record_every);
        let _ = writeln!(out, "evolve_initial_n = {:?}", n.evolve_initial_n);
        let _ = writeln!(out, "dump_distributions = {}", n.dump_distributions);
        let _ = writeln!(out, "\n[scan]");
        let _ = writeln!(out, "axis = {:?}", self.scan.axis.name());
        let dim = self.scan.axis.dimension();
        let values: Vec<String> = self
            .scan
            .values
            .iter()
            .map(|&v| format!("{:?}", q(v, dim)))
            .collect();
        let _ = writeln!(out, "values = [{}]", values.join(", "));
        let _ = writeln!(out, "\n[output]");
        let _ = writeln!(out, "path = {:?}", self.output.path.display().to_string());
        let _ = writeln!(out, "format = \"csv\"");
        out
    }
}

/// Reads the documented configuration file format.
pub fn load_config(path: &Path) -> Result<SimulationConfig> {
    SimulationConfig::load(path)
}

fn quantity(key: &str, value: &toml::Value, dim: Dimension) -> Result<f64> {
    match value {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        toml::Value::String(s) => parse_quantity(s, dim).map_err(|source| Error::Unit {
            key: key.to_string(),
            source,
        }),
        other => Err(Error::invalid(key, format!("expected a {dim} value, found {other}"))),
    }
}

fn count(key: &str, value: f64) -> Result<u32> {
    if value.fract() != 0.0 || value < 0.0 || value > u32::MAX as f64 {
        return Err(Error::invalid(key, "must be a non-negative integer"));
    }
    Ok(value as u32)
}

fn boolean(key: &str, value: &toml::Value) -> Result<bool> {
    match value {
        toml::Value::Boolean(b) => Ok(*b),
        toml::Value::String(s) => match s.as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(Error::invalid(key, "expected true or false")),
        },
        _ => Err(Error::invalid(key, "expected true or false")),
    }
}

fn string(key: &str, value: &toml::Value) -> Result<String> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        _ => Err(Error::invalid(key, "expected a string")),
    }
}
