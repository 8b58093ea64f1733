//! Nuclear flip rates and mean-field drift for both signs of the detuning.
//! Stable zeros of the drift sit on (+δ) or between (−δ) the comb lines.

use nufocus::config::SimulationConfig;
use nufocus::pipeline::{propagator_source, rates_at};

fn main() -> nufocus::Result<()> {
    for &delta in &[0.4, -0.4] {
        let mut config = SimulationConfig::default();
        config.pulse.detuning = delta;
        let per_spacing = config.dot.psc_spacing() * nufocus::units::HBAR_MEV_S / config.bath.a_hyperfine;

        // 12 samples per comb spacing over four spacings.
        let n: Vec<f64> = (-24..=24).map(|i| i as f64 * per_spacing / 12.0).collect();
        let w0 = config.dot.zeeman_frequency();
        let a = nufocus::units::mev_to_rad_per_s(config.bath.a_hyperfine);
        let source = propagator_source(&config, w0 + a * n[0] * 1.01, w0 + a * n[n.len() - 1] * 1.01)?;
        let rates = rates_at(&config, source.as_ref(), &n)?;

        println!("delta = {delta} meV");
        println!("  n/spacing   w_plus      w_minus     drift");
        for k in 0..rates.len() {
            let stable = k + 1 < rates.len() && rates.drift(k) > 0.0 && rates.drift(k + 1) <= 0.0;
            println!(
                "  {:+8.3}  {:.4e}  {:.4e}  {:+.4e}{}",
                n[k] / per_spacing,
                rates.w_plus[k],
                rates.w_minus[k],
                rates.drift(k),
                if stable { "  <- stable" } else { "" }
            );
        }
    }
    Ok(())
}
