//! Command-line front end. The binary only forwards `argv` to [`run`].

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ScanAxis, SimulationConfig};
use crate::error::{Error, Result};
use crate::kinetics::{evolve_distribution, steady_distribution, NuclearDistribution, PolarizationGrid};
use crate::output::{self, Manifest};
use crate::pipeline::{self, frequency_span, propagator_source, run_pipeline_with};
use crate::propagator::{IntegratorSettings, PulseSolver};
use crate::spin::spin_table;
use crate::units::{self, parse_quantity, parse_values, Dimension};

/// Exit status for success, input problems and numerical failures.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "nufocus",
    version,
    about = "Electron spin mode-locking and nuclear focusing under detuned sech pulse trains"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Configuration file (TOML sections [dot] [pulse] [bath] [numerics] [scan] [output])
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. --set pulse.detuning=0.4meV (repeatable)
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (default: output.path from the configuration)
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: machine parallelism)
    #[arg(long, global = true, env = "NUFOCUS_THREADS", value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the single-pulse propagator as JSON
    Propagator {
        /// Electron precession frequency, e.g. 12GHz (default: bare Zeeman frequency)
        #[arg(long, value_name = "FREQ")]
        frequency: Option<String>,
    },
    /// Steady-state electron spin versus precession frequency
    Spin,
    /// Nuclear flip rates and drift over the polarization grid
    Rates,
    /// Stationary nuclear polarization distribution
    Distribution,
    /// Time evolution of the nuclear distribution from a sharp start
    Evolve,
    /// Run the full pipeline for each value of one parameter
    Scan {
        /// Axis: detuning, area, B_field or retardance (default: scan.axis)
        #[arg(long, value_name = "AXIS")]
        axis: Option<String>,
        /// start:stop:step (inclusive) or a comma list, with units (default: scan.values)
        #[arg(long, value_name = "VALUES", allow_hyphen_values = true)]
        values: Option<String>,
    },
    /// Spin, rates, distribution and observables for one parameter point
    Pipeline,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Propagator { .. } => "propagator",
            Command::Spin => "spin",
            Command::Rates => "rates",
            Command::Distribution => "distribution",
            Command::Evolve => "evolve",
            Command::Scan { .. } => "scan",
            Command::Pipeline => "pipeline",
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Errors go to stderr as one tagged line.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    EXIT_OK
                }
                _ => {
                    let text = e.to_string();
                    let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
                    eprintln!("nufocus: error[usage]: {first}");
                    EXIT_VALIDATION
                }
            };
        }
    };
    match execute(&cli) {
        Ok(dir) => {
            eprintln!("nufocus: wrote {}", dir.display());
            EXIT_OK
        }
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            eprintln!("nufocus: error[{}]: {line}", e.tag());
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

/// Resolves the configuration from file, overrides and scan flags.
pub fn resolve_config(cli: &Cli) -> Result<SimulationConfig> {
    let mut config = match &cli.common.config {
        Some(path) => SimulationConfig::load(path)?,
        None => SimulationConfig::default(),
    };
    for assignment in &cli.common.overrides {
        config.apply_override(assignment)?;
    }
    if let Command::Scan { axis, values } = &cli.command {
        if let Some(axis) = axis {
            let parsed = ScanAxis::parse(axis)
                .ok_or_else(|| Error::invalid("scan.axis", format!("unknown axis {axis:?}")))?;
            if parsed != config.scan.axis {
                config.scan.axis = parsed;
                if values.is_none() {
                    config.scan.values.clear();
                }
            }
        }
        if let Some(values) = values {
            config.scan.values = parse_values(values, config.scan.axis.dimension()).map_err(|source| {
                Error::Unit {
                    key: "scan.values".into(),
                    source,
                }
            })?;
        }
        if config.scan.axis == ScanAxis::None || config.scan.values.is_empty() {
            return Err(Error::invalid("scan.values", "a scan needs an axis and at least one value"));
        }
    }
    if let Some(out) = &cli.common.out {
        config.output.path = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: &Cli) -> Result<PathBuf> {
    let config = resolve_config(cli)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(Error::invalid("--threads", "must be positive"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid("--threads", e.to_string()))?;
    let dir = config.output.path.clone();
    output::ensure_dir(&dir)?;
    let mut manifest = Manifest::new(cli.command.name(), &config);
    pool.install(|| dispatch(&cli.command, &config, &dir, &mut manifest))?;
    manifest.add("manifest.json", "manifest", None);
    manifest.write(&dir.join("manifest.json"))?;
    Ok(dir)
}

fn dispatch(command: &Command, config: &SimulationConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    match command {
        Command::Propagator { frequency } => {
            let omega = match frequency {
                Some(text) => units::hz_to_rad_per_s(
                    parse_quantity(text, Dimension::Frequency).map_err(|source| Error::Unit {
                        key: "--frequency".into(),
                        source,
                    })?,
                ),
                None => config.dot.zeeman_frequency(),
            };
            if !(omega > config.numerics.omega_min()) {
                return Err(Error::NonpositiveFrequency { n: 0.0, omega });
            }
            let solver = PulseSolver::new(config.pulse, IntegratorSettings::from(&config.numerics));
            let u = solver.propagate(omega)?;
            u.write_json(&dir.join("propagator.json"))?;
            manifest.add("propagator.json", "propagator", None);
        }
        Command::Spin => {
            let n = &config.numerics;
            let center = config.dot.zeeman_frequency();
            let span = units::hz_to_rad_per_s(n.spin_span);
            let count = n.spin_points as usize;
            let omegas: Vec<f64> = (0..count)
                .map(|i| center - span + 2.0 * span * i as f64 / (count - 1) as f64)
                .collect();
            if !(omegas[0] > n.omega_min()) {
                return Err(Error::invalid(
                    "numerics.spin_span",
                    "reaches below the precession-frequency guard",
                ));
            }
            let source = propagator_source(config, omegas[0], omegas[count - 1])?;
            let table = spin_table(source.as_ref(), &config.dot, &omegas)?;
            let rows = output::write_spin_csv(&dir.join("spin.csv"), &table)?;
            manifest.add("spin.csv", "spin", Some(rows));
        }
        Command::Rates | Command::Distribution | Command::Evolve | Command::Pipeline => {
            let grid = PolarizationGrid::new(config.bath.n_nuclei, config.bath.n_window);
            let (lo, hi) = frequency_span(config, &grid)?;
            let source = propagator_source(config, lo, hi)?;
            match command {
                Command::Rates => {
                    let rates = pipeline::rates_at(config, source.as_ref(), &grid.values())?;
                    let rows = output::write_rates_csv(&dir.join("rates.csv"), &rates)?;
                    manifest.add("rates.csv", "rates", Some(rows));
                }
                Command::Distribution => {
                    let rates = pipeline::rates_at(config, source.as_ref(), &grid.values())?;
                    let p = steady_distribution(&grid, &rates)?;
                    let rows = output::write_distribution_csv(
                        &dir.join("distribution.csv"),
                        &grid,
                        &p,
                        &config.dot,
                        &config.bath,
                    )?;
                    manifest.add("distribution.csv", "distribution", Some(rows));
                }
                Command::Evolve => evolve(config, &grid, source.as_ref(), dir, manifest)?,
                _ => {
                    let out = run_pipeline_with(config, source.as_ref())?;
                    let spin_rows = output::write_spin_csv(&dir.join("spin.csv"), &out.spin)?;
                    manifest.add("spin.csv", "spin", Some(spin_rows));
                    let rate_rows = output::write_rates_csv(&dir.join("rates.csv"), &out.rates)?;
                    manifest.add("rates.csv", "rates", Some(rate_rows));
                    let p_rows = output::write_distribution_csv(
                        &dir.join("distribution.csv"),
                        &out.grid,
                        &out.distribution,
                        &config.dot,
                        &config.bath,
                    )?;
                    manifest.add("distribution.csv", "distribution", Some(p_rows));
                    let mut row = out.observables;
                    row.distribution_ref = Some(PathBuf::from("distribution.csv"));
                    let o_rows = output::write_observables_csv(&dir.join("observables.csv"), ScanAxis::None, &[row])?;
                    manifest.add("observables.csv", "observables", Some(o_rows));
                }
            }
        }
        Command::Scan { .. } => scan(config, dir, manifest)?,
    }
    Ok(())
}

fn evolve(
    config: &SimulationConfig,
    grid: &PolarizationGrid,
    source: &dyn crate::propagator::PropagatorSource,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<()> {
    let n = &config.numerics;
    let rates = pipeline::rates_at(config, source, &grid.values())?;
    let p0 = NuclearDistribution::delta(grid, n.evolve_initial_n);
    let steps = n.evolve_steps as usize;
    let every = n.evolve_record_every as usize;
    let trajectory = evolve_distribution(grid, &p0, &rates, n.evolve_dt, steps, every)?;
    let mut times: Vec<f64> = (0..trajectory.len())
        .map(|i| (i * every) as f64 * n.evolve_dt)
        .collect();
    if let Some(last) = times.last_mut() {
        *last = steps as f64 * n.evolve_dt;
    }
    let rows = output::write_trajectory_csv(&dir.join("trajectory.csv"), grid, &times, &trajectory)?;
    manifest.add("trajectory.csv", "trajectory", Some(rows));
    let last = trajectory.last().expect("trajectory holds the initial state");
    let p_rows =
        output::write_distribution_csv(&dir.join("distribution.csv"), grid, last, &config.dot, &config.bath)?;
    manifest.add("distribution.csv", "distribution", Some(p_rows));
    Ok(())
}

fn scan(config: &SimulationConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    let axis = config.scan.axis;
    let points = pipeline::scan(config, axis, &config.scan.values);
    let dump = config.numerics.dump_distributions;
    if dump {
        output::ensure_dir(&dir.join("distributions"))?;
    }
    let mut rows = Vec::with_capacity(points.len());
    for (i, point) in points.into_iter().enumerate() {
        let mut row = point.row;
        if let Some(err) = &row.error {
            eprintln!("nufocus: warning[scan-point]: {} = {}: {err}", axis.name(), row.scan_value);
        }
        if let (true, Some(out)) = (dump, point.output) {
            let rel = PathBuf::from("distributions").join(format!("point_{i:03}.csv"));
            let mut at_point = config.clone();
            axis.apply(&mut at_point, row.scan_value);
            let n = output::write_distribution_csv(
                &dir.join(&rel),
                &out.grid,
                &out.distribution,
                &at_point.dot,
                &at_point.bath,
            )?;
            manifest.add(rel.clone(), "distribution", Some(n));
            row.distribution_ref = Some(rel);
        }
        rows.push(row);
    }
    let n = output::write_observables_csv(&dir.join("observables.csv"), axis, &rows)?;
    manifest.add("observables.csv", "observables", Some(n));
    Ok(())
}
