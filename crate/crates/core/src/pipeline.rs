//! The self-consistent electron–nuclear calculation for one parameter point
//! and sweeps over one axis.
//!
//! Nuclear polarization changes slowly compared with the electron, so each
//! polarization `n` is treated as static: the electron steady state is
//! solved at `ω_e(n)`, flip rates follow from it, the master equation gives
//! the stationary `P(n)`, and observables are averaged over `P(n)`.

use std::path::PathBuf;

use crate::config::{unguarded_precession_frequency, BathParams, DotParams, ScanAxis, SimulationConfig};
use crate::error::{Error, Result};
use crate::kinetics::{
    flip_rates_at, moments, steady_distribution, FlipRates, NuclearDistribution, PolarizationGrid,
};
use crate::propagator::{IntegratorSettings, PropagatorCache, PropagatorSource, PulseSolver};
use crate::spin::{spin_table, SpinPoint};
use crate::units;

/// Below this total weight `Σ P |s⊥|` the precessing amplitude is treated
/// as absent: a weighted mean over round-off sized weights is noise.
pub const AMPLITUDE_FLOOR: f64 = 1e-9;

/// Observables of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRow {
    pub scan_value: f64,
    pub mean_n: f64,
    pub variance_n: f64,
    /// Precession frequency shift, GHz (ordinary frequency).
    pub freq_shift: f64,
    /// Average precessing spin amplitude `Σ P |s⊥|/2`.
    pub amplitude: f64,
    pub distribution_ref: Option<PathBuf>,
    /// Set when the point failed; numeric fields are then NaN.
    pub error: Option<String>,
}

impl ObservableRow {
    fn failed(scan_value: f64, err: &Error) -> Self {
        Self {
            scan_value,
            mean_n: f64::NAN,
            variance_n: f64::NAN,
            freq_shift: f64::NAN,
            amplitude: f64::NAN,
            distribution_ref: None,
            error: Some(format!("{}: {err}", err.tag())),
        }
    }
}

/// Everything produced by [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub grid: PolarizationGrid,
    pub spin: Vec<SpinPoint>,
    pub rates: FlipRates,
    pub distribution: NuclearDistribution,
    pub observables: ObservableRow,
}

/// Builds the propagator source for a frequency interval: a cache when the
/// configuration asks for one, direct integration otherwise.
pub fn propagator_source(
    config: &SimulationConfig,
    omega_lo: f64,
    omega_hi: f64,
) -> Result<Box<dyn PropagatorSource>> {
    let solver = PulseSolver::new(config.pulse, IntegratorSettings::from(&config.numerics));
    if config.numerics.use_cache {
        let step = units::hz_to_rad_per_s(config.numerics.cache_step);
        Ok(Box::new(PropagatorCache::build(solver, omega_lo, omega_hi, step)?))
    } else {
        Ok(Box::new(solver))
    }
}

/// Electron steady states at the precession frequencies of polarizations `n`.
pub fn spin_over_polarization(
    config: &SimulationConfig,
    source: &dyn PropagatorSource,
    n: &[f64],
) -> Result<Vec<SpinPoint>> {
    let omega_min = config.numerics.omega_min();
    let omegas = n
        .iter()
        .map(|&x| crate::config::precession_frequency(x, &config.dot, &config.bath, omega_min))
        .collect::<Result<Vec<_>>>()?;
    spin_table(source, &config.dot, &omegas)
}

/// Flip rates at arbitrary polarization samples, e.g. a grid finer than one
/// flip for drawing the mean-field drift curve.
pub fn rates_at(config: &SimulationConfig, source: &dyn PropagatorSource, n: &[f64]) -> Result<FlipRates> {
    let spin = spin_over_polarization(config, source, n)?;
    let states: Vec<_> = spin.iter().map(|p| p.state).collect();
    let alphas: Vec<_> = spin.iter().map(|p| p.alpha).collect();
    flip_rates_at(n, config.bath.n_nuclei, &states, &alphas, &config.bath, &config.dot)
}

/// Frequency interval covered by the polarization window, checked against
/// the guard.
pub fn frequency_span(config: &SimulationConfig, grid: &PolarizationGrid) -> Result<(f64, f64)> {
    let omega_min = config.numerics.omega_min();
    let lo = crate::config::precession_frequency(grid.value(0), &config.dot, &config.bath, omega_min)?;
    let hi = crate::config::precession_frequency(
        grid.value(grid.len() - 1),
        &config.dot,
        &config.bath,
        omega_min,
    )?;
    Ok((lo, hi))
}

/// Runs the four steps for one configuration.
pub fn run_pipeline(config: &SimulationConfig) -> Result<PipelineOutput> {
    let grid = PolarizationGrid::new(config.bath.n_nuclei, config.bath.n_window);
    let (lo, hi) = frequency_span(config, &grid)?;
    let source = propagator_source(config, lo, hi)?;
    run_pipeline_with(config, source.as_ref())
}

/// Like [`run_pipeline`] with a caller-supplied propagator source.
pub fn run_pipeline_with(config: &SimulationConfig, source: &dyn PropagatorSource) -> Result<PipelineOutput> {
    let grid = PolarizationGrid::new(config.bath.n_nuclei, config.bath.n_window);
    let n = grid.values();
    let spin = spin_over_polarization(config, source, &n)?;
    let states: Vec<_> = spin.iter().map(|p| p.state).collect();
    let alphas: Vec<_> = spin.iter().map(|p| p.alpha).collect();
    let rates = flip_rates_at(&n, grid.n_nuclei(), &states, &alphas, &config.bath, &config.dot)?;
    let distribution = steady_distribution(&grid, &rates)?;
    let observables = observables_from_distribution(&distribution, &spin, &grid, &config.dot, &config.bath)?;
    Ok(PipelineOutput {
        grid,
        spin,
        rates,
        distribution,
        observables,
    })
}

/// Average precessing amplitude and frequency shift over `P(n)`.
///
/// The frequency is the mean of `ω_e(n)` weighted by `P(n)|s⊥(n)|`, the
/// transverse after-pulse Bloch magnitude. When those weights vanish the
/// amplitude is zero and the shift falls back to `⟨n⟩A/h`.
/// See [`AMPLITUDE_FLOOR`].
pub fn observables_from_distribution(
    p: &NuclearDistribution,
    spin: &[SpinPoint],
    grid: &PolarizationGrid,
    dot: &DotParams,
    bath: &BathParams,
) -> Result<ObservableRow> {
    if p.p.len() != grid.len() || spin.len() != grid.len() {
        return Err(Error::MisalignedTables(format!(
            "grid {}, distribution {}, spin table {}",
            grid.len(),
            p.p.len(),
            spin.len()
        )));
    }
    let (mean_n, variance_n) = moments(p, grid);
    let omega0 = dot.zeeman_frequency();
    let (weight, weighted_omega) = p
        .p
        .iter()
        .zip(spin)
        .enumerate()
        .fold((0.0, 0.0), |(w, wo), (k, (&pk, point))| {
            let a = pk * point.state.transverse();
            let omega = unguarded_precession_frequency(grid.value(k), dot, bath);
            (w + a, wo + a * (omega - omega0))
        });
    let (amplitude, freq_shift) = if weight > AMPLITUDE_FLOOR {
        (0.5 * weight, units::rad_per_s_to_ghz(weighted_omega / weight))
    } else {
        (0.0, units::rad_per_s_to_ghz(mean_n * units::mev_to_rad_per_s(bath.a_hyperfine)))
    };
    Ok(ObservableRow {
        scan_value: 0.0,
        mean_n,
        variance_n,
        freq_shift,
        amplitude,
        distribution_ref: None,
        error: None,
    })
}

/// One pipeline run per axis value, in input order. Failures are recorded
/// in the row and the sweep continues.
pub fn scan(config: &SimulationConfig, axis: ScanAxis, values: &[f64]) -> Vec<ScanPoint> {
    values
        .iter()
        .map(|&v| {
            let mut point = config.clone();
            axis.apply(&mut point, v);
            let result = point.validate().and_then(|_| run_pipeline(&point));
            match result {
                Ok(out) => {
                    let mut row = out.observables.clone();
                    row.scan_value = v;
                    ScanPoint {
                        row,
                        output: Some(out),
                    }
                }
                Err(e) => ScanPoint {
                    row: ObservableRow::failed(v, &e),
                    output: None,
                },
            }
        })
        .collect()
}

/// Result of one sweep point.
#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub row: ObservableRow,
    pub output: Option<PipelineOutput>,
}
