//! Physical constants and unit-suffixed quantity parsing.
//!
//! Internally every quantity is held in one canonical unit per dimension:
//!
//! | dimension  | canonical unit |
//! |------------|----------------|
//! | energy     | meV            |
//! | time       | s              |
//! | field      | T              |
//! | frequency  | Hz (ordinary)  |
//! | angle      | rad            |
//!
//! Angular frequencies are always rad/s and are computed, never parsed.

use std::f64::consts::PI;
use std::fmt;

/// Reduced Planck constant in meV·s.
pub const HBAR_MEV_S: f64 = 6.582_119_569_509_067e-13;

/// Bohr magneton in meV/T.
pub const MU_B_MEV_PER_T: f64 = 5.788_381_806_0e-2;

/// Converts an energy in meV to an angular frequency in rad/s.
#[inline]
pub fn mev_to_rad_per_s(energy_mev: f64) -> f64 {
    energy_mev / HBAR_MEV_S
}

/// Converts an angular frequency in rad/s to an energy in meV.
#[inline]
pub fn rad_per_s_to_mev(omega: f64) -> f64 {
    omega * HBAR_MEV_S
}

#[inline]
pub fn hz_to_rad_per_s(f: f64) -> f64 {
    2.0 * PI * f
}

#[inline]
pub fn rad_per_s_to_ghz(omega: f64) -> f64 {
    omega / (2.0 * PI) / 1e9
}

/// Physical dimension of a configuration value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Dimensionless,
    Energy,
    Time,
    Field,
    Frequency,
    Angle,
}

impl Dimension {
    /// Canonical unit suffix used when serializing.
    pub fn canonical_suffix(self) -> &'static str {
        match self {
            Dimension::Dimensionless => "",
            Dimension::Energy => "meV",
            Dimension::Time => "s",
            Dimension::Field => "T",
            Dimension::Frequency => "Hz",
            Dimension::Angle => "rad",
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        let s = match (self, unit) {
            (_, "") => 1.0,
            (Dimension::Energy, "eV") => 1e3,
            (Dimension::Energy, "meV") => 1.0,
            (Dimension::Energy, "ueV" | "µeV" | "μeV") => 1e-3,
            (Dimension::Time, "s") => 1.0,
            (Dimension::Time, "ms") => 1e-3,
            (Dimension::Time, "us" | "µs" | "μs") => 1e-6,
            (Dimension::Time, "ns") => 1e-9,
            (Dimension::Time, "ps") => 1e-12,
            (Dimension::Time, "fs") => 1e-15,
            (Dimension::Field, "T") => 1.0,
            (Dimension::Field, "mT") => 1e-3,
            (Dimension::Frequency, "Hz") => 1.0,
            (Dimension::Frequency, "kHz") => 1e3,
            (Dimension::Frequency, "MHz") => 1e6,
            (Dimension::Frequency, "GHz") => 1e9,
            (Dimension::Frequency, "THz") => 1e12,
            (Dimension::Angle, "rad") => 1.0,
            (Dimension::Angle, "pi" | "π") => PI,
            (Dimension::Angle, "deg") => PI / 180.0,
            _ => return None,
        };
        Some(s)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Dimension::Dimensionless => "dimensionless",
            Dimension::Energy => "energy",
            Dimension::Time => "time",
            Dimension::Field => "magnetic field",
            Dimension::Frequency => "frequency",
            Dimension::Angle => "angle",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot parse {text:?} as {dimension}")]
pub struct UnitError {
    pub text: String,
    pub dimension: Dimension,
}

/// Parses `"<number>[ ]<unit>"` into the canonical unit of `dimension`.
///
/// A bare unit such as `"pi"` means a coefficient of one. Exponent markers
/// are disambiguated from unit prefixes by trying the longest numeric prefix
/// first, so `"1e-3meV"` and `"1eV"` both parse.
pub fn parse_quantity(text: &str, dimension: Dimension) -> Result<f64, UnitError> {
    let err = || UnitError {
        text: text.to_string(),
        dimension,
    };
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(err());
    }
    for split in (0..=trimmed.len()).rev() {
        if !trimmed.is_char_boundary(split) {
            continue;
        }
        let (num, unit) = trimmed.split_at(split);
        let unit = unit.trim();
        let Some(scale) = dimension.scale(unit) else {
            continue;
        };
        let num = num.trim();
        let value = match num {
            "" if !unit.is_empty() => 1.0,
            "-" if !unit.is_empty() => -1.0,
            "+" if !unit.is_empty() => 1.0,
            _ => match num.parse::<f64>() {
                Ok(v) => v,
                Err(_) => continue,
            },
        };
        if value.is_nan() {
            return Err(err());
        }
        return Ok(value * scale);
    }
    Err(err())
}

/// Formats a canonical value so that [`parse_quantity`] returns it bit-exactly.
pub fn format_quantity(value: f64, dimension: Dimension) -> String {
    let suffix = dimension.canonical_suffix();
    let num = if value.is_infinite() {
        if value > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{value:?}")
    };
    if suffix.is_empty() {
        num
    } else {
        format!("{num} {suffix}")
    }
}

/// Parses an inclusive range `start:stop:step` (each with optional units) or
/// a comma-separated list of values.
pub fn parse_values(text: &str, dimension: Dimension) -> Result<Vec<f64>, UnitError> {
    let err = || UnitError {
        text: text.to_string(),
        dimension,
    };
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    if trimmed.contains(':') {
        let parts: Vec<&str> = trimmed.split(':').collect();
        if parts.len() != 3 {
            return Err(err());
        }
        let start = parse_quantity(parts[0], dimension)?;
        let stop = parse_quantity(parts[1], dimension)?;
        let step = parse_quantity(parts[2], dimension)?;
        if step == 0.0 || !step.is_finite() || (stop - start) * step < 0.0 {
            return Err(err());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    trimmed
        .split(',')
        .map(|v| parse_quantity(v, dimension))
        .collect()
}
