//! Electron spin steady state under the periodic pulse train.
//!
//! One period is the affine map `pulse ∘ dark` acting on the Bloch vector
//! just after a pulse: instantaneous incoherent trion recombination into
//! both electron levels, precession about the field axis, transverse decay,
//! and then the next pulse. The fixed point of that map is the steady state.
//! The map uses [`Propagator::centered`], so "just after the pulse" means
//! at the pulse center and the dark interval is the full `T_R`.
//!
//! Bloch convention in the `(|x+⟩, |x−⟩)` basis:
//! `s_x = ρ₊₊ − ρ₋₋`, `s_z + i s_y = 2ρ₊₋`, with `S = s/2`.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use crate::config::DotParams;
use crate::error::{Error, Result};
use crate::propagator::{excitation_asymmetry, Mat4, Propagator, PropagatorSource, C64, T_MINUS, T_PLUS, X_MINUS, X_PLUS};

/// Contraction margin below which the fixed point is considered unique.
pub const CONTRACTION_MARGIN: f64 = 1e-12;

/// Electron Bloch vector and the trion population made by the last pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub s: Vector3<f64>,
    pub trion_yield: f64,
}

impl BlochState {
    /// Spin expectation `S = s/2`.
    pub fn spin(&self) -> Vector3<f64> {
        self.s / 2.0
    }

    /// Magnitude of the transverse (y, z) Bloch component.
    pub fn transverse(&self) -> f64 {
        self.s.y.hypot(self.s.z)
    }
}

/// Conjugates the electron density matrix by the pulse propagator.
///
/// Returns the electron Bloch vector read from the (unnormalized) electron
/// block and the total trion population.
pub fn apply_pulse(u: &Propagator, s_in: &Vector3<f64>) -> (Vector3<f64>, f64) {
    apply_pulse_matrix(&u.matrix, s_in)
}

fn apply_pulse_matrix(u: &Mat4, s: &Vector3<f64>) -> (Vector3<f64>, f64) {
    let mut rho = Mat4::zeros();
    rho[(X_PLUS, X_PLUS)] = C64::new(0.5 * (1.0 + s.x), 0.0);
    rho[(X_MINUS, X_MINUS)] = C64::new(0.5 * (1.0 - s.x), 0.0);
    let coh = C64::new(0.5 * s.z, 0.5 * s.y);
    rho[(X_PLUS, X_MINUS)] = coh;
    rho[(X_MINUS, X_PLUS)] = coh.conj();
    let out = u * rho * u.adjoint();
    let s_out = Vector3::new(
        out[(X_PLUS, X_PLUS)].re - out[(X_MINUS, X_MINUS)].re,
        2.0 * out[(X_PLUS, X_MINUS)].im,
        2.0 * out[(X_PLUS, X_MINUS)].re,
    );
    let trion = out[(T_PLUS, T_PLUS)].re + out[(T_MINUS, T_MINUS)].re;
    (s_out, trion)
}

/// Evolution between pulses: trion dump, precession and transverse decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpulseChannel {
    /// Precession angle about x over the dark interval.
    pub angle: f64,
    /// Transverse decay factor `exp(−t/T2)`.
    pub decay: f64,
}

impl InterpulseChannel {
    pub fn new(omega_e: f64, dark_time: f64, t2: f64) -> Self {
        Self {
            angle: omega_e * dark_time,
            decay: (-dark_time / t2).exp(),
        }
    }

    /// Returns the new Bloch vector and electron populations `(ρ₊₊, ρ₋₋)`.
    ///
    /// The trion population returns as equal incoherent halves, which leaves
    /// `s` untouched and restores the electron trace to one.
    pub fn apply(&self, s: &Vector3<f64>, trion_yield: f64) -> (Vector3<f64>, (f64, f64)) {
        let electron_trace = 1.0 - trion_yield;
        let populations = (
            0.5 * (electron_trace + s.x) + 0.5 * trion_yield,
            0.5 * (electron_trace - s.x) + 0.5 * trion_yield,
        );
        let (sin, cos) = self.angle.sin_cos();
        let sy = cos * s.y - sin * s.z;
        let sz = sin * s.y + cos * s.z;
        (
            Vector3::new(s.x, self.decay * sy, self.decay * sz),
            populations,
        )
    }

    /// Linear part acting on `s`.
    pub fn matrix(&self) -> Matrix3<f64> {
        let (sin, cos) = self.angle.sin_cos();
        let d = self.decay;
        Matrix3::new(1.0, 0.0, 0.0, 0.0, d * cos, -d * sin, 0.0, d * sin, d * cos)
    }
}

/// Evolution over one full repetition period.
pub fn interpulse_channel(omega_e: f64, dot: &DotParams) -> InterpulseChannel {
    InterpulseChannel::new(omega_e, dot.rep_period, dot.t2_electron)
}

/// Affine one-period map `s ↦ M s + b` on the after-pulse Bloch vector,
/// plus the trion yield as an affine function of the pre-pulse vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodMap {
    pub m: Matrix3<f64>,
    pub b: Vector3<f64>,
    pub trion_row: Vector3<f64>,
    pub trion_offset: f64,
    pub channel: InterpulseChannel,
}

impl PeriodMap {
    pub fn apply(&self, s: &Vector3<f64>) -> Vector3<f64> {
        self.m * s + self.b
    }

    /// Trion yield produced by a pulse hitting pre-pulse vector `s_before`.
    pub fn trion_yield(&self, s_before: &Vector3<f64>) -> f64 {
        self.trion_row.dot(s_before) + self.trion_offset
    }

    pub fn spectral_radius(&self) -> f64 {
        self.m
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Extracts the affine period map by pushing `s = 0` and the unit vectors
/// through `apply_pulse ∘ interpulse_channel`, with the pulse centered.
pub fn build_period_map(u: &Propagator, omega_e: f64, dot: &DotParams) -> PeriodMap {
    let pulse = u.centered().matrix;
    let channel = InterpulseChannel::new(omega_e, dot.rep_period, dot.t2_electron);
    let full = |s: &Vector3<f64>| {
        let (dark, _) = channel.apply(s, 0.0);
        apply_pulse_matrix(&pulse, &dark).0
    };
    let b = full(&Vector3::zeros());
    let mut m = Matrix3::zeros();
    let (_, t0) = apply_pulse_matrix(&pulse, &Vector3::zeros());
    let mut trion_row = Vector3::zeros();
    for k in 0..3 {
        let e = Vector3::ith(k, 1.0);
        m.set_column(k, &(full(&e) - b));
        trion_row[k] = apply_pulse_matrix(&pulse, &e).1 - t0;
    }
    PeriodMap {
        m,
        b,
        trion_row,
        trion_offset: t0,
        channel,
    }
}

/// Fixed point of the period map, reported just after the pulse.
///
/// Without longitudinal relaxation a pulse that excites nothing leaves
/// `s_x` untouched, so `M` has a unit eigenvalue along x. When that axis
/// decouples and carries no drive, `s_x = 0` is taken and the transverse
/// block is solved alone; any other unit-modulus eigenvalue means the
/// steady state is not unique.
pub fn steady_state(u: &Propagator, omega_e: f64, dot: &DotParams) -> Result<BlochState> {
    let map = build_period_map(u, omega_e, dot);
    let s = solve_fixed_point(&map)?;
    let (before, _) = map.channel.apply(&s, 0.0);
    Ok(BlochState {
        s,
        trion_yield: map.trion_yield(&before),
    })
}

fn solve_fixed_point(map: &PeriodMap) -> Result<Vector3<f64>> {
    let radius = map.spectral_radius();
    if radius < 1.0 - CONTRACTION_MARGIN {
        let lhs = Matrix3::identity() - map.m;
        return lhs
            .lu()
            .solve(&map.b)
            .ok_or(Error::NonContractive { radius });
    }
    let m = &map.m;
    let tiny = CONTRACTION_MARGIN;
    let x_decoupled = (m[(0, 0)] - 1.0).abs() < tiny
        && m[(0, 1)].abs() < tiny
        && m[(0, 2)].abs() < tiny
        && m[(1, 0)].abs() < tiny
        && m[(2, 0)].abs() < tiny
        && map.b.x.abs() < tiny;
    if !x_decoupled {
        return Err(Error::NonContractive { radius });
    }
    let block = Matrix2::new(m[(1, 1)], m[(1, 2)], m[(2, 1)], m[(2, 2)]);
    let block_radius = block
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if block_radius >= 1.0 - CONTRACTION_MARGIN {
        return Err(Error::NonContractive {
            radius: block_radius,
        });
    }
    let rhs = Vector2::new(map.b.y, map.b.z);
    let yz = (Matrix2::identity() - block)
        .lu()
        .solve(&rhs)
        .ok_or(Error::NonContractive { radius })?;
    Ok(Vector3::new(0.0, yz.x, yz.y))
}

/// Steady state and excitation weights at one precession frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinPoint {
    /// rad/s.
    pub omega: f64,
    pub state: BlochState,
    /// `(α₊, α₋)`; `(1, 1)` when the pulse excites nothing.
    pub alpha: (f64, f64),
}

/// Steady states over a strictly increasing frequency grid, in grid order.
pub fn spin_vs_frequency<S: PropagatorSource + ?Sized>(
    source: &S,
    dot: &DotParams,
    omegas: &[f64],
) -> Result<Vec<BlochState>> {
    spin_table(source, dot, omegas).map(|t| t.into_iter().map(|p| p.state).collect())
}

/// Like [`spin_vs_frequency`] but also keeps `α±` for the flip rates.
pub fn spin_table<S: PropagatorSource + ?Sized>(
    source: &S,
    dot: &DotParams,
    omegas: &[f64],
) -> Result<Vec<SpinPoint>> {
    if omegas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("omega_grid", "must be strictly increasing"));
    }
    omegas
        .par_iter()
        .map(|&omega| {
            let u = source.propagator_at(omega)?;
            let state = steady_state(&u, omega, dot)?;
            let alpha = match excitation_asymmetry(&u) {
                Ok(a) => a,
                Err(Error::NoExcitation) => (1.0, 1.0),
                Err(e) => return Err(e),
            };
            Ok(SpinPoint {
                omega,
                state,
                alpha,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PulseParams;
    use crate::propagator::{free_phases, propagate_pulse, CircularAmplitudes, IntegratorSettings, PulseSolver};
    use nalgebra::Complex;
    use std::f64::consts::PI;

    fn dot() -> DotParams {
        DotParams::default()
    }

    fn detuned(delta: f64) -> PulseParams {
        PulseParams {
            detuning: delta,
            ..PulseParams::default()
        }
    }

    /// Deterministic pseudo-random numbers in [-1, 1).
    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random_unitary(seed: &mut u64) -> Mat4 {
        let mut h = Mat4::zeros();
        for r in 0..4 {
            for c in r..4 {
                let z = if r == c { C64::new(lcg(seed), 0.0) } else { C64::new(lcg(seed), lcg(seed)) };
                h[(r, c)] = z * 2.0;
                h[(c, r)] = z.conj() * 2.0;
            }
        }
        (h * Complex::new(0.0, -1.0)).exp()
    }

    #[test]
    fn undriven_pulse_only_rotates() {
        let solver = PulseSolver::new(
            PulseParams {
                area: 0.0,
                ..PulseParams::default()
            },
            IntegratorSettings::default(),
        );
        let omega = dot().zeeman_frequency();
        let u = solver.propagate(omega).unwrap();
        let s = Vector3::new(0.3, -0.4, 0.5);
        let (out, trion) = apply_pulse(&u, &s);
        let angle = omega * u.window;
        let expected = Vector3::new(
            s.x,
            angle.cos() * s.y - angle.sin() * s.z,
            angle.sin() * s.y + angle.cos() * s.z,
        );
        assert!((out - expected).norm() < 1e-9, "{out} vs {expected}");
        assert!(trion.abs() < 1e-15);
    }

    #[test]
    fn mixed_state_half_excited_by_degenerate_pi_pulse() {
        let solver = PulseSolver::new(PulseParams::default(), IntegratorSettings::default())
            .with_amplitudes(CircularAmplitudes::SIGMA_PLUS);
        let u = solver.propagate(0.0).unwrap();
        let (_, trion) = apply_pulse(&u, &Vector3::zeros());
        assert!((trion - 0.5).abs() < 1e-8);
    }

    #[test]
    fn channel_examples() {
        let t_r = dot().rep_period;
        let sync = InterpulseChannel::new(3.0 * 2.0 * PI / t_r, t_r, f64::INFINITY);
        let s = Vector3::new(0.1, 0.2, -0.3);
        assert!((sync.apply(&s, 0.0).0 - s).norm() < 1e-12);

        let (s_out, pops) = sync.apply(&Vector3::zeros(), 1.0);
        assert_eq!(s_out, Vector3::zeros());
        assert_eq!(pops, (0.5, 0.5));

        let t2 = 40e-9;
        let halving = InterpulseChannel::new(0.0, t2 * 2f64.ln(), t2);
        let (h, _) = halving.apply(&s, 0.0);
        assert!((h - Vector3::new(s.x, s.y / 2.0, s.z / 2.0)).norm() < 1e-15);

        let dark = interpulse_channel(1e10, &dot());
        assert!((dark.angle - 1e10 * t_r).abs() < 1e-9);
    }

    #[test]
    fn period_map_is_the_composition() {
        let mut seed = 7u64;
        for _ in 0..5 {
            let matrix = random_unitary(&mut seed);
            let omega = 7e10 * (1.0 + 0.3 * lcg(&mut seed));
            let u = Propagator {
                matrix,
                omega_e: omega,
                detuning: 0.0,
                area: 1.0,
                retardance: 0.0,
                window: 3e-11,
                steps: 0,
            };
            let map = build_period_map(&u, omega, &dot());
            let c = u.centered();
            let direct = |s: &Vector3<f64>| apply_pulse(&c, &map.channel.apply(s, 0.0).0).0;
            for _ in 0..10 {
                let s = Vector3::new(lcg(&mut seed), lcg(&mut seed), lcg(&mut seed)) * 0.5;
                assert!((map.apply(&s) - direct(&s)).norm() < 1e-12);
                let (_, trion) = apply_pulse(&c, &s);
                assert!((map.trion_yield(&s) - trion).abs() < 1e-12);
            }
            let s1 = Vector3::new(0.2, -0.1, 0.3);
            let s2 = Vector3::new(-0.4, 0.05, 0.1);
            let (a, b) = (0.7, -1.3);
            let lin = map.apply(&(s1 * a + s2 * b)) - map.apply(&s1) * a - map.apply(&s2) * b
                + map.b * (a + b - 1.0);
            assert!(lin.norm() < 1e-12);
        }
    }

    #[test]
    fn undriven_steady_state_is_zero() {
        let pulse = PulseParams {
            area: 0.0,
            ..PulseParams::default()
        };
        let omega = dot().zeeman_frequency() * 1.01;
        let u = propagate_pulse(&pulse, omega).unwrap();
        let map = build_period_map(&u, omega, &dot());
        assert!(map.b.norm() < 1e-15);
        let decay = (-dot().rep_period / dot().t2_electron).exp();
        let block = map.m.fixed_view::<2, 2>(1, 1).complex_eigenvalues();
        assert!(block.iter().all(|z| (z.norm() - decay).abs() < 1e-9));
        let state = steady_state(&u, omega, &dot()).unwrap();
        assert!(state.s.norm() < 1e-15 && state.trion_yield.abs() < 1e-15);

        let coherent = DotParams {
            t2_electron: f64::INFINITY,
            ..dot()
        };
        assert!(matches!(
            steady_state(&u, omega, &coherent),
            Err(Error::NonContractive { .. })
        ));
    }

    #[test]
    fn steady_state_is_fixed_and_physical() {
        let solver = PulseSolver::new(detuned(0.4), IntegratorSettings::default());
        let w0 = dot().zeeman_frequency();
        for k in 0..12 {
            let omega = w0 * (0.97 + 0.005 * k as f64);
            let u = solver.propagate(omega).unwrap();
            let map = build_period_map(&u, omega, &dot());
            let state = steady_state(&u, omega, &dot()).unwrap();
            assert!(map.spectral_radius() < 1.0);
            assert!((map.apply(&state.s) - state.s).norm() < 1e-10);
            assert!(state.s.norm() <= 1.0 + 1e-9);
            assert!((-1e-9..=1.0 + 1e-9).contains(&state.trion_yield));
        }
    }

    /// Spin table over `intervals` PSC intervals centered on the PSC
    /// nearest the bare frequency.
    fn psc_table(pulse: PulseParams, intervals: f64, points: usize) -> (Vec<SpinPoint>, f64, f64) {
        let d = dot();
        let spacing = d.psc_spacing();
        let center = (d.zeeman_frequency() / spacing).round() * spacing;
        let omegas: Vec<f64> = (0..points)
            .map(|i| center + spacing * intervals * (i as f64 / (points - 1) as f64 - 0.5))
            .collect();
        let solver = PulseSolver::new(pulse, IntegratorSettings::default());
        (spin_table(&solver, &d, &omegas).unwrap(), center, spacing)
    }

    #[test]
    fn mode_locking_structure_near_combs() {
        let (table, center, spacing) = psc_table(detuned(0.4), 2.4, 193);
        let at = |w: f64| {
            table
                .iter()
                .min_by(|a, b| (a.omega - w).abs().total_cmp(&(b.omega - w).abs()))
                .unwrap()
                .state
                .spin()
        };
        for k in [-1.0, 0.0, 1.0] {
            let psc = center + k * spacing;
            assert!(at(psc).z.abs() > at(psc + 0.5 * spacing).z.abs());
            assert!(at(psc).z.abs() > at(psc - 0.5 * spacing).z.abs());
            let (lo, hi) = (at(psc - 0.1 * spacing).x, at(psc + 0.1 * spacing).x);
            assert!(lo * hi < 0.0, "S_x keeps its sign near PSC {k}: {lo} {hi}");
        }
        let sz: Vec<f64> = table.iter().map(|p| p.state.spin().z.abs()).collect();
        let maxima: Vec<f64> = (1..sz.len() - 1)
            .filter(|&i| sz[i] > sz[i - 1] && sz[i] >= sz[i + 1])
            .map(|i| (table[i].omega - center) / spacing)
            .collect();
        assert_eq!(maxima.len(), 3, "S_z maxima at {maxima:?}");
        assert!(maxima.iter().all(|m| (m - m.round()).abs() < 0.1), "{maxima:?}");
        assert_eq!(table.len(), 193);
    }

    #[test]
    fn average_sx_follows_detuning_sign() {
        let mean_sx = |delta: f64| {
            let (table, _, _) = psc_table(detuned(delta), 1.0, 121);
            let inner = &table[..table.len() - 1];
            inner.iter().map(|p| p.state.spin().x).sum::<f64>() / inner.len() as f64
        };
        let (plus, minus) = (mean_sx(0.4), mean_sx(-0.4));
        assert!(plus.abs() > 1e-3 && minus.abs() > 1e-3);
        assert!(plus * minus < 0.0, "{plus} {minus}");
    }

    #[test]
    fn short_pulses_act_like_instantaneous_kicks() {
        let pulse = PulseParams {
            bandwidth_fwhm: 20.0,
            detuning: 0.4,
            ..PulseParams::default()
        };
        let d = dot();
        let solver = PulseSolver::new(pulse, IntegratorSettings::default());
        let spacing = d.psc_spacing();
        let w0 = d.zeeman_frequency();
        let omegas: Vec<f64> = (0..81).map(|i| w0 + spacing * (i as f64 / 40.0 - 1.0)).collect();
        let full = spin_table(&solver, &d, &omegas).unwrap();
        // The same pulse acting with the Zeeman splitting switched off,
        // embedded in free precession over the same window.
        let w = solver.window();
        let u0 = solver.propagate(0.0).unwrap().matrix;
        let back = free_phases(0.0, pulse.detuning, -0.5 * w);
        let kick = Mat4::from_fn(|r, c| back[r] * u0[(r, c)] * back[c]);
        let scale = full.iter().map(|p| p.state.spin().norm()).fold(0.0, f64::max);
        let mut worst = 0.0f64;
        for point in &full {
            let f = free_phases(point.omega, pulse.detuning, 0.5 * w);
            let matrix = Mat4::from_fn(|r, c| f[r] * kick[(r, c)] * f[c]);
            let u = solver.wrap(matrix, point.omega, 0);
            let reduced = steady_state(&u, point.omega, &d).unwrap();
            worst = worst.max((reduced.spin() - point.state.spin()).amax());
            worst = worst.max((reduced.trion_yield - point.state.trion_yield).abs());
        }
        assert!(worst < 0.01 * scale, "worst {worst} scale {scale}");
    }

    #[test]
    fn table_requires_increasing_grid() {
        let solver = PulseSolver::new(PulseParams::default(), IntegratorSettings::default());
        let w = dot().zeeman_frequency();
        assert!(spin_table(&solver, &dot(), &[w, w]).is_err());
        assert!(spin_table(&solver, &dot(), &[]).unwrap().is_empty());
    }
}
