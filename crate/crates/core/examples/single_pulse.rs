//! One sech pulse on the four-level dot: excitation probability against the
//! closed two-level form, unitarity, and the excitation asymmetry α±.

use std::f64::consts::PI;

use nufocus::config::PulseParams;
use nufocus::propagator::{excitation_asymmetry, CircularAmplitudes, IntegratorSettings, PulseSolver, T_PLUS};
use nufocus::units;

fn main() -> nufocus::Result<()> {
    println!("area/pi  delta_meV  P_numeric     P_closed_form");
    for &area in &[0.5 * PI, PI, 2.0 * PI] {
        for &delta in &[0.0, 0.2, 0.4] {
            let pulse = PulseParams { area, detuning: delta, ..PulseParams::default() };
            let u = PulseSolver::new(pulse, IntegratorSettings::default())
                .with_amplitudes(CircularAmplitudes::SIGMA_PLUS)
                .propagate(0.0)?;
            // Spin up along z is (|x+> + |x->)/√2.
            let r = std::f64::consts::FRAC_1_SQRT_2;
            let p = (u.matrix[(T_PLUS, 0)] * r + u.matrix[(T_PLUS, 1)] * r).norm_sqr();
            let x = PI * units::mev_to_rad_per_s(delta) * pulse.duration() / 2.0;
            let closed = (area / 2.0).sin().powi(2) / x.cosh().powi(2);
            println!("{:7.2}  {delta:9.2}  {p:.10}  {closed:.10}", area / PI);
        }
    }

    let omega = nufocus::config::DotParams::default().zeeman_frequency();
    println!("\ndelta_meV  alpha_plus  alpha_minus  unitarity_defect");
    for &delta in &[-0.8, -0.4, 0.0, 0.4, 0.8] {
        let pulse = PulseParams { detuning: delta, ..PulseParams::default() };
        let u = PulseSolver::new(pulse, IntegratorSettings::default()).propagate(omega)?;
        let (ap, am) = excitation_asymmetry(&u)?;
        println!("{delta:9.2}  {ap:10.6}  {am:11.6}  {:.2e}", u.unitarity_defect());
    }
    Ok(())
}
