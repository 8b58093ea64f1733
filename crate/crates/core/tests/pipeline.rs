use std::f64::consts::PI;

use nufocus::config::{ScanAxis, SimulationConfig};
use nufocus::kinetics::{NuclearDistribution, PolarizationGrid};
use nufocus::pipeline::{observables_from_distribution, run_pipeline, run_pipeline_with, scan};
use nufocus::propagator::{IntegratorSettings, PulseSolver};
use nufocus::spin::{spin_table, BlochState, SpinPoint};
use nufocus::Error;
use nalgebra::Vector3;

fn small(delta: f64) -> SimulationConfig {
    let mut c = SimulationConfig::default();
    c.pulse.detuning = delta;
    c.bath.n_nuclei = 2000;
    c
}

fn binomial(n: u32, k: usize) -> f64 {
    // ln C(n, k) by summing logs; fine for n in the thousands.
    let ln: f64 = (1..=k).map(|i| ((n as usize - k + i) as f64).ln() - (i as f64).ln()).sum();
    ln.exp()
}

#[test]
fn undriven_pipeline_is_a_pure_binomial() {
    let mut c = small(0.4);
    c.pulse.area = 0.0;
    c.bath.n_nuclei = 200;
    c.bath.n_window = 0.3;
    let out = run_pipeline(&c).unwrap();
    let grid = &out.grid;
    let weights: Vec<f64> = (0..grid.len())
        .map(|k| binomial(200, (100.0 * (1.0 + grid.value(k))).round() as usize))
        .collect();
    let total: f64 = weights.iter().sum();
    for (p, w) in out.distribution.p.iter().zip(&weights) {
        assert!((p - w / total).abs() <= 1e-12 * (w / total).max(1e-300) + 1e-300);
    }
    assert_eq!(out.observables.amplitude, 0.0);
    assert!(out.observables.freq_shift.abs() < 1e-12);
}

#[test]
fn zero_coupling_null_for_every_axis() {
    let mut c = small(0.4);
    c.pulse.area = 0.0;
    c.bath.n_window = 0.15;
    let cases: [(ScanAxis, &[f64]); 3] = [
        (ScanAxis::Detuning, &[-1.0, 0.0, 0.7]),
        (ScanAxis::BField, &[1.0, 2.5]),
        (ScanAxis::Retardance, &[0.0, PI / 4.0, PI / 2.0]),
    ];
    for (axis, values) in cases {
        for point in scan(&c, axis, values) {
            assert!(point.row.error.is_none());
            assert!(point.row.freq_shift.abs() < 1e-12, "{axis:?} {}", point.row.freq_shift);
            assert_eq!(point.row.amplitude, 0.0);
        }
    }
}

fn spin_point(omega: f64, s: Vector3<f64>) -> SpinPoint {
    SpinPoint {
        omega,
        state: BlochState { s, trion_yield: 0.1 },
        alpha: (1.0, 1.0),
    }
}

#[test]
fn observables_of_simple_distributions() {
    let c = small(0.0);
    let grid = PolarizationGrid::new(c.bath.n_nuclei, 0.01);
    let spin: Vec<SpinPoint> = grid
        .values()
        .iter()
        .map(|&n| spin_point(1e10 + n, Vector3::new(0.1, 0.3, -0.4)))
        .collect();

    let at_zero = NuclearDistribution::delta(&grid, 0.0);
    let row = observables_from_distribution(&at_zero, &spin, &grid, &c.dot, &c.bath).unwrap();
    assert_eq!(row.freq_shift, 0.0);
    assert!((row.amplitude - 0.25).abs() < 1e-15);

    let mut pair = vec![0.0; grid.len()];
    pair[grid.center() - 3] = 0.5;
    pair[grid.center() + 3] = 0.5;
    let row = observables_from_distribution(&NuclearDistribution { p: pair }, &spin, &grid, &c.dot, &c.bath)
        .unwrap();
    assert!(row.freq_shift.abs() < 1e-12);
    assert!(row.mean_n.abs() < 1e-18);

    let err = observables_from_distribution(&at_zero, &spin[1..], &grid, &c.dot, &c.bath).unwrap_err();
    assert!(matches!(err, Error::MisalignedTables(_)));
}

#[test]
fn vanishing_amplitude_falls_back_to_mean_polarization() {
    let c = small(0.0);
    let grid = PolarizationGrid::new(c.bath.n_nuclei, 0.01);
    let spin: Vec<SpinPoint> = grid
        .values()
        .iter()
        .map(|&n| spin_point(1e10 + n, Vector3::new(0.2, 0.0, 0.0)))
        .collect();
    let p = NuclearDistribution::delta(&grid, 0.005);
    let row = observables_from_distribution(&p, &spin, &grid, &c.dot, &c.bath).unwrap();
    assert_eq!(row.amplitude, 0.0);
    // ⟨n⟩ A / h with A = 0.1 meV.
    let expected = 0.005 * 0.1 / 6.582_119_569_509_067e-13 / (2.0 * PI) / 1e9;
    assert!((row.freq_shift - expected).abs() < 1e-12);
}

#[test]
fn cached_and_exact_propagators_agree_on_mean_polarization() {
    for &delta in &[-1.0, -0.6, -0.4, -0.2, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0] {
        let mut c = small(delta);
        c.bath.n_window = 0.05;
        let cached = run_pipeline(&c).unwrap().observables.mean_n;
        let solver = PulseSolver::new(c.pulse, IntegratorSettings::from(&c.numerics));
        let exact = run_pipeline_with(&c, &solver).unwrap().observables.mean_n;
        assert!(((cached - exact) / exact).abs() < 0.01, "δ = {delta}: {cached} vs {exact}");
    }
}

#[test]
fn pipeline_is_deterministic_across_thread_counts() {
    let c = small(0.4);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_pipeline(&c).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.distribution.p, b.distribution.p);
    assert_eq!(a.rates, b.rates);
    assert_eq!(a.observables, b.observables);
}

#[test]
fn scan_records_failures_and_continues() {
    let c = small(0.4);
    let points = scan(&c, ScanAxis::BField, &[0.2, 2.0]);
    assert_eq!(points.len(), 2);
    let bad = &points[0].row;
    assert!(bad.error.as_deref().unwrap().starts_with("nonpositive-frequency"));
    assert!(bad.freq_shift.is_nan() && points[0].output.is_none());
    assert!(points[1].row.error.is_none());
    assert_eq!(points[1].row.scan_value, 2.0);
}

#[test]
fn detuning_scan_shift_is_antisymmetric_on_a_comb_line() {
    let mut c = small(0.0);
    c.bath.n_nuclei = 20_000;
    c.dot = c.dot.snapped_to_psc();
    let values = [-1.2, -0.8, -0.4, -0.1, 0.0, 0.1, 0.4, 0.8, 1.2];
    let rows: Vec<f64> = scan(&c, ScanAxis::Detuning, &values)
        .iter()
        .map(|p| p.row.freq_shift)
        .collect();
    let zero = rows[4];
    // At δ = 0 the shift is only the residual of the depolarization-weighted
    // rate profile.
    assert!(zero.abs() < 0.01, "{zero}");
    for i in 0..4 {
        let (neg, pos) = (rows[i], rows[values.len() - 1 - i]);
        assert!(neg * pos <= 0.0, "δ = ±{}: {neg} {pos}", values[values.len() - 1 - i]);
    }
}

#[test]
fn spin_table_rows_follow_the_grid() {
    let c = small(0.4);
    let solver = PulseSolver::new(c.pulse, IntegratorSettings::from(&c.numerics));
    let w0 = c.dot.zeeman_frequency();
    let omegas: Vec<f64> = (0..9).map(|i| w0 * (1.0 + 0.001 * i as f64)).collect();
    let table = spin_table(&solver, &c.dot, &omegas).unwrap();
    assert_eq!(table.len(), omegas.len());
    assert!(table.iter().zip(&omegas).all(|(p, w)| p.omega == *w));
}
