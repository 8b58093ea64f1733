//! Steady-state electron spin across three phase-synchronization
//! conditions. |S_z| peaks on the comb lines and S_x flips sign across them.

use nufocus::config::SimulationConfig;
use nufocus::propagator::{IntegratorSettings, PulseSolver};
use nufocus::spin::spin_vs_frequency;
use nufocus::units;

fn main() -> nufocus::Result<()> {
    let mut config = SimulationConfig::default();
    config.pulse.detuning = 0.4;
    let dot = config.dot.snapped_to_psc();
    let solver = PulseSolver::new(config.pulse, IntegratorSettings::from(&config.numerics));

    let w0 = dot.zeeman_frequency();
    let spacing = dot.psc_spacing();
    let omegas: Vec<f64> = (0..=48).map(|i| w0 + spacing * (-1.5 + i as f64 / 16.0)).collect();
    let states = spin_vs_frequency(&solver, &dot, &omegas)?;

    println!("offset/spacing  f_GHz      Sx         Sy         Sz");
    for (w, s) in omegas.iter().zip(&states) {
        let spin = s.spin();
        let bar = "#".repeat((spin.z.abs() * 120.0) as usize);
        println!(
            "{:+13.4}  {:.5}  {:+.6}  {:+.6}  {:+.6} {bar}",
            (w - w0) / spacing,
            units::rad_per_s_to_ghz(*w),
            spin.x,
            spin.y,
            spin.z
        );
    }
    Ok(())
}
