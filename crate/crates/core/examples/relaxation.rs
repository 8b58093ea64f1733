//! Without optical pumping a polarized bath relaxes at the depolarization
//! rate: <n>(t) = n0 exp(-2 γ t).

use nufocus::config::SimulationConfig;
use nufocus::kinetics::{evolve_distribution, NuclearDistribution, PolarizationGrid};
use nufocus::pipeline::{frequency_span, propagator_source, rates_at};

fn main() -> nufocus::Result<()> {
    let mut config = SimulationConfig::default();
    config.pulse.area = 0.0;
    config.bath.n_nuclei = 2000;
    let grid = PolarizationGrid::new(config.bath.n_nuclei, config.bath.n_window);
    let (lo, hi) = frequency_span(&config, &grid)?;
    let source = propagator_source(&config, lo, hi)?;
    let rates = rates_at(&config, source.as_ref(), &grid.values())?;

    let n0 = 0.1;
    let (dt, steps, every) = (1e-3, 100_000, 10_000);
    let traj = evolve_distribution(&grid, &NuclearDistribution::delta(&grid, n0), &rates, dt, steps, every)?;
    let gamma = config.bath.gamma_depol;
    println!("t_s     <n>        n0*exp(-2*gamma*t)");
    for (i, p) in traj.iter().enumerate() {
        let t = (i * every) as f64 * dt;
        let (mean, _) = p.moments(&grid);
        println!("{t:6.1}  {mean:.6}  {:.6}", n0 * (-2.0 * gamma * t).exp());
    }
    Ok(())
}
