//! Frequency shift against detuning and against compensator retardance,
//! each point running the whole pipeline.

use std::f64::consts::PI;

use nufocus::config::{ScanAxis, SimulationConfig};
use nufocus::pipeline::scan;

fn print(axis: ScanAxis, config: &SimulationConfig, values: &[f64]) {
    println!("{:>16}  {:>10}  {:>14}  {:>9}", axis.header(), "mean_n", "freq_shift_GHz", "amplitude");
    for point in scan(config, axis, values) {
        let r = &point.row;
        match &r.error {
            Some(e) => println!("{:16.4}  failed: {e}", r.scan_value),
            None => println!("{:16.4}  {:+10.3e}  {:+14.4}  {:9.4}", r.scan_value, r.mean_n, r.freq_shift, r.amplitude),
        }
    }
    println!();
}

fn main() {
    let mut config = SimulationConfig::default();

    let detunings: Vec<f64> = (-6..=6).map(|i| 0.25 * i as f64).collect();
    print(ScanAxis::Detuning, &config, &detunings);

    config.pulse.detuning = 0.4;
    let retardances: Vec<f64> = (0..=4).map(|i| i as f64 * PI / 8.0).collect();
    print(ScanAxis::Retardance, &config, &retardances);
}
