//! Coherent evolution of the electron–trion four-level system across one
//! hyperbolic-secant pulse.
//!
//! Basis order is fixed: `|x+⟩, |x−⟩, |T+⟩, |T−⟩` (indices 0..4). The electron
//! states are the eigenstates along the in-plane field; `|x+⟩` is the upper
//! Zeeman level. The trion states are written in the optical basis, with
//! `|T±⟩` reached from `|z±⟩ = (|x+⟩ ± |x−⟩)/√2` by σ± light.
//!
//! The Hamiltonian is taken in the frame rotating at the laser frequency and
//! integrated with a fourth-order Magnus scheme, so every step is an exact
//! matrix exponential of an anti-Hermitian generator and the product stays
//! unitary to rounding. The step count is doubled until two successive
//! results agree to the requested tolerance.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;

use nalgebra::{Complex, Matrix4};
use serde::Serialize;

use crate::config::{Numerics, PulseParams};
use crate::error::{Error, Result};
use crate::units;

pub type C64 = Complex<f64>;
pub type Mat4 = Matrix4<C64>;

pub const X_PLUS: usize = 0;
pub const X_MINUS: usize = 1;
pub const T_PLUS: usize = 2;
pub const T_MINUS: usize = 3;

pub const BASIS_LABELS: [&str; 4] = ["x+", "x-", "T+", "T-"];

/// Maximum `‖U†U − I‖_max` accepted for a returned propagator.
pub const UNITARITY_TOL: f64 = 1e-9;

/// Amplitudes of the σ+ and σ− components of the pump field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularAmplitudes {
    pub a_plus: C64,
    pub a_minus: C64,
}

impl CircularAmplitudes {
    pub const SIGMA_PLUS: Self = Self {
        a_plus: Complex { re: 1.0, im: 0.0 },
        a_minus: Complex { re: 0.0, im: 0.0 },
    };
    pub const SIGMA_MINUS: Self = Self {
        a_plus: Complex { re: 0.0, im: 0.0 },
        a_minus: Complex { re: 1.0, im: 0.0 },
    };
}

/// Polarization after a variable retarder fed with linear light at 45° to
/// its fast axis.
///
/// The output Jones vector is `(1, e^{iφ})/√2` in the (fast, slow) basis;
/// projecting on `(1, ±i)/√2` gives `|a±|² = (1 ± h sin φ)/2`, where `h`
/// is the helicity sign.
pub fn retardance_to_circular(retardance: f64, helicity_sign: f64) -> CircularAmplitudes {
    let phase = C64::from_polar(1.0, retardance);
    let i = C64::i();
    let h = if helicity_sign < 0.0 { -1.0 } else { 1.0 };
    CircularAmplitudes {
        a_plus: (C64::new(1.0, 0.0) - i * h * phase) * 0.5,
        a_minus: (C64::new(1.0, 0.0) + i * h * phase) * 0.5,
    }
}

/// Time-independent diagonal part of the rotating-frame Hamiltonian (rad/s).
fn diagonal_part(omega_e: f64, detuning_mev: f64) -> Mat4 {
    let delta = units::mev_to_rad_per_s(detuning_mev);
    Mat4::from_diagonal(&nalgebra::Vector4::new(
        C64::new(omega_e / 2.0, 0.0),
        C64::new(-omega_e / 2.0, 0.0),
        C64::new(-delta, 0.0),
        C64::new(-delta, 0.0),
    ))
}

/// Optical coupling per unit of `Ω0 f(t)`; Hermitian.
fn coupling_part(amps: &CircularAmplitudes) -> Mat4 {
    let c = 0.5 * FRAC_1_SQRT_2;
    let mut v = Mat4::zeros();
    let tp_xp = amps.a_plus * c;
    let tp_xm = amps.a_plus * c;
    let tm_xp = amps.a_minus * c;
    let tm_xm = -amps.a_minus * c;
    v[(T_PLUS, X_PLUS)] = tp_xp;
    v[(T_PLUS, X_MINUS)] = tp_xm;
    v[(T_MINUS, X_PLUS)] = tm_xp;
    v[(T_MINUS, X_MINUS)] = tm_xm;
    v[(X_PLUS, T_PLUS)] = tp_xp.conj();
    v[(X_MINUS, T_PLUS)] = tp_xm.conj();
    v[(X_PLUS, T_MINUS)] = tm_xp.conj();
    v[(X_MINUS, T_MINUS)] = tm_xm.conj();
    v
}

/// Rotating-frame Hamiltonian `H(t)/ħ` in rad/s for a `sech(t/τ)` pulse of
/// peak Rabi frequency `rabi0`.
pub fn hamiltonian_at(
    t: f64,
    omega_e: f64,
    detuning_mev: f64,
    rabi0: f64,
    tau: f64,
    amps: &CircularAmplitudes,
) -> Mat4 {
    let f = (t / tau).cosh().recip();
    diagonal_part(omega_e, detuning_mev) + coupling_part(amps) * C64::new(rabi0 * f, 0.0)
}

/// Max-norm of `U†U − I`.
pub fn unitarity_defect(u: &Mat4) -> f64 {
    let p = u.adjoint() * u;
    let mut worst = 0.0f64;
    for r in 0..4 {
        for c in 0..4 {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((p[(r, c)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

pub(crate) fn max_abs_diff(a: &Mat4, b: &Mat4) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Evolution operator of one pulse together with the parameters it was
/// built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub matrix: Mat4,
    /// Electron precession frequency, rad/s.
    pub omega_e: f64,
    /// meV.
    pub detuning: f64,
    pub area: f64,
    pub retardance: f64,
    /// Duration of the integration window in seconds. Free precession over
    /// this interval is already contained in `matrix`.
    pub window: f64,
    /// Magnus steps used for the accepted result (0 when interpolated).
    pub steps: usize,
}

impl Propagator {
    /// Transition amplitude `⟨to|U|from⟩`.
    pub fn element(&self, to: usize, from: usize) -> C64 {
        self.matrix[(to, from)]
    }

    /// Total trion population created from electron state `from`.
    pub fn excitation_probability(&self, from: usize) -> f64 {
        self.matrix[(T_PLUS, from)].norm_sqr() + self.matrix[(T_MINUS, from)].norm_sqr()
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }

    /// The same pulse collapsed onto its center: the drive-free evolution
    /// over each half of the integration window is divided out, leaving a
    /// zero-length window.
    pub fn centered(&self) -> Propagator {
        let back = free_phases(self.omega_e, self.detuning, -0.5 * self.window);
        Propagator {
            matrix: scale_rows_cols(&self.matrix, &back, &back),
            window: 0.0,
            ..self.clone()
        }
    }

    /// Writes the matrix as JSON: row-major `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Dump<'a> {
            basis: [&'a str; 4],
            layout: &'a str,
            omega_e_rad_per_s: f64,
            omega_e_over_2pi_ghz: f64,
            detuning_mev: f64,
            area_rad: f64,
            retardance_rad: f64,
            window_s: f64,
            matrix: Vec<Vec<[f64; 2]>>,
        }
        let matrix = (0..4)
            .map(|r| {
                (0..4)
                    .map(|c| [self.matrix[(r, c)].re, self.matrix[(r, c)].im])
                    .collect()
            })
            .collect();
        serde_json::to_value(Dump {
            basis: BASIS_LABELS,
            layout: "row-major, element [row][col] = <row|U|col> as [re, im]",
            omega_e_rad_per_s: self.omega_e,
            omega_e_over_2pi_ghz: units::rad_per_s_to_ghz(self.omega_e),
            detuning_mev: self.detuning,
            area_rad: self.area,
            retardance_rad: self.retardance,
            window_s: self.window,
            matrix,
        })
        .expect("propagator dump is plain data")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json()).expect("serializable");
        std::fs::write(path, text).map_err(|e| Error::Output {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Step-control settings for the pulse integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    /// Half-width of the integration window in units of τ.
    pub half_window: f64,
    pub tol: f64,
    pub initial_steps: usize,
    pub max_refinements: u32,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self::from(&Numerics::default())
    }
}

impl From<&Numerics> for IntegratorSettings {
    fn from(n: &Numerics) -> Self {
        Self {
            half_window: n.pulse_window,
            tol: n.propagator_tol,
            initial_steps: n.initial_steps as usize,
            max_refinements: n.max_refinements,
        }
    }
}

/// Builds propagators for one pulse shape at arbitrary precession frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSolver {
    pub pulse: PulseParams,
    pub settings: IntegratorSettings,
    amps: CircularAmplitudes,
    tau: f64,
}

impl PulseSolver {
    pub fn new(pulse: PulseParams, settings: IntegratorSettings) -> Self {
        Self {
            amps: retardance_to_circular(pulse.retardance, pulse.helicity_sign),
            tau: pulse.duration(),
            pulse,
            settings,
        }
    }

    /// Overrides the polarization derived from the retardance.
    pub fn with_amplitudes(mut self, amps: CircularAmplitudes) -> Self {
        self.amps = amps;
        self
    }

    pub fn amplitudes(&self) -> CircularAmplitudes {
        self.amps
    }

    /// Envelope constant τ in seconds.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Peak Rabi frequency so that `∫ Ω0 sech(t/τ) dt = Θ`.
    pub fn rabi0(&self) -> f64 {
        self.pulse.area / (PI * self.tau)
    }

    pub fn window(&self) -> f64 {
        2.0 * self.settings.half_window * self.tau
    }

    /// Fourth-order Magnus integration with a fixed number of steps.
    ///
    /// Time is measured in units of τ. With `H = D + f(s) V` the two-point
    /// Gauss commutator collapses to `(f₂ − f₁)[D, V]`.
    pub fn integrate_fixed(&self, omega_e: f64, steps: usize) -> Mat4 {
        let tau = C64::new(self.tau, 0.0);
        let d = diagonal_part(omega_e, self.pulse.detuning) * tau;
        let v = coupling_part(&self.amps) * (tau * self.rabi0());
        let comm = d * v - v * d;
        let half = self.settings.half_window;
        let h = 2.0 * half / steps as f64;
        let offset = 3f64.sqrt() / 6.0;
        let minus_i = -C64::i();
        let comm_scale = 3f64.sqrt() / 12.0 * h * h;

        let mut u = Mat4::identity();
        for k in 0..steps {
            let s0 = -half + k as f64 * h;
            let f1 = ((s0 + h * (0.5 - offset)).cosh()).recip();
            let f2 = ((s0 + h * (0.5 + offset)).cosh()).recip();
            let generator = (d * C64::new(h, 0.0) + v * C64::new(0.5 * h * (f1 + f2), 0.0))
                * minus_i
                + comm * C64::new(comm_scale * (f2 - f1), 0.0);
            u = generator.exp() * u;
        }
        u
    }

    /// Integrates with step doubling until successive results agree.
    pub fn propagate(&self, omega_e: f64) -> Result<Propagator> {
        let s = &self.settings;
        let mut steps = s.initial_steps.max(1);
        let mut previous = self.integrate_fixed(omega_e, steps);
        let mut last_diff = f64::INFINITY;
        for _ in 0..s.max_refinements {
            steps *= 2;
            let current = self.integrate_fixed(omega_e, steps);
            last_diff = max_abs_diff(&current, &previous);
            if last_diff < s.tol {
                let defect = unitarity_defect(&current);
                if defect >= UNITARITY_TOL {
                    return Err(Error::NonUnitary { defect, steps });
                }
                return Ok(self.wrap(current, omega_e, steps));
            }
            previous = current;
        }
        Err(Error::NonUnitary {
            defect: last_diff.max(unitarity_defect(&previous)),
            steps,
        })
    }

    pub(crate) fn wrap(&self, matrix: Mat4, omega_e: f64, steps: usize) -> Propagator {
        Propagator {
            matrix,
            omega_e,
            detuning: self.pulse.detuning,
            area: self.pulse.area,
            retardance: self.pulse.retardance,
            window: self.window(),
            steps,
        }
    }
}

/// Propagator of one pulse with default integration settings.
pub fn propagate_pulse(params: &PulseParams, omega_e: f64) -> Result<Propagator> {
    PulseSolver::new(*params, IntegratorSettings::default()).propagate(omega_e)
}

/// Relative trion excitation weights `(α₊, α₋)` of the two electron
/// eigenstates, summed over both trion spin states. `α₊ + α₋ = 2`.
pub fn excitation_asymmetry(u: &Propagator) -> Result<(f64, f64)> {
    let p_plus = u.excitation_probability(X_PLUS);
    let p_minus = u.excitation_probability(X_MINUS);
    let total = p_plus + p_minus;
    if !(total > 1e-15) {
        return Err(Error::NoExcitation);
    }
    let alpha_plus = 2.0 * p_plus / total;
    Ok((alpha_plus, 2.0 - alpha_plus))
}

/// Source of pulse propagators indexed by precession frequency.
pub trait PropagatorSource: Sync {
    fn propagator_at(&self, omega_e: f64) -> Result<Propagator>;
}

impl PropagatorSource for PulseSolver {
    fn propagator_at(&self, omega_e: f64) -> Result<Propagator> {
        self.propagate(omega_e)
    }
}

/// Diagonal of `exp(−i H₀ t)` for the drive-free Hamiltonian.
pub(crate) fn free_phases(omega_e: f64, detuning_mev: f64, t: f64) -> [C64; 4] {
    let delta = units::mev_to_rad_per_s(detuning_mev);
    [omega_e / 2.0, -omega_e / 2.0, -delta, -delta].map(|e| C64::from_polar(1.0, -e * t))
}

/// `diag(a) · m · diag(b)`.
fn scale_rows_cols(m: &Mat4, a: &[C64; 4], b: &[C64; 4]) -> Mat4 {
    Mat4::from_fn(|r, c| a[r] * m[(r, c)] * b[c])
}

/// Nearest unitary by Newton–Schulz iteration `X ← X(3I − X†X)/2`; valid
/// for inputs already close to unitary.
pub fn project_unitary(m: &Mat4) -> Mat4 {
    let mut x = *m;
    let three = Mat4::identity() * C64::new(3.0, 0.0);
    for _ in 0..8 {
        if unitarity_defect(&x) < 1e-15 {
            break;
        }
        x = x * (three - x.adjoint() * x) * C64::new(0.5, 0.0);
    }
    x
}

/// Propagators tabulated on a uniform frequency grid.
///
/// Interpolation runs on the interaction-picture operator
/// `U_I = e^{iH₀W/2} U e^{iH₀W/2}` (W the window), which varies with `ω_e`
/// only through the pulse itself. Entries are interpolated linearly, the
/// result is projected back onto the unitary group, and the free phases
/// are restored exactly.
#[derive(Debug, Clone)]
pub struct PropagatorCache {
    solver: PulseSolver,
    omega_start: f64,
    omega_step: f64,
    table: Vec<Mat4>,
}

impl PropagatorCache {
    /// Tabulates `[omega_lo, omega_hi]` (rad/s) with spacing at most
    /// `omega_step`. Nodes are computed in parallel; results are placed by
    /// index so the table is independent of scheduling.
    pub fn build(solver: PulseSolver, omega_lo: f64, omega_hi: f64, omega_step: f64) -> Result<Self> {
        use rayon::prelude::*;
        let span = (omega_hi - omega_lo).max(0.0);
        let intervals = ((span / omega_step).ceil() as usize).max(1);
        let step = if span > 0.0 { span / intervals as f64 } else { omega_step };
        let table = (0..=intervals)
            .into_par_iter()
            .map(|k| {
                let omega = omega_lo + k as f64 * step;
                let u = solver.propagate(omega)?.matrix;
                let inv = free_phases(omega, solver.pulse.detuning, -0.5 * solver.window());
                Ok(scale_rows_cols(&u, &inv, &inv))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            solver,
            omega_start: omega_lo,
            omega_step: step,
            table,
        })
    }

    pub fn solver(&self) -> &PulseSolver {
        &self.solver
    }

    pub fn nodes(&self) -> usize {
        self.table.len()
    }

    pub fn omega_step(&self) -> f64 {
        self.omega_step
    }

    pub fn range(&self) -> (f64, f64) {
        (
            self.omega_start,
            self.omega_start + (self.table.len() - 1) as f64 * self.omega_step,
        )
    }

    /// Interpolated matrix; falls back to direct integration outside the
    /// tabulated range.
    pub fn interpolate(&self, omega_e: f64) -> Result<Mat4> {
        let x = (omega_e - self.omega_start) / self.omega_step;
        let last = self.table.len() - 1;
        if !(x >= -1e-9 && x <= last as f64 + 1e-9) {
            return self.solver.propagate(omega_e).map(|p| p.matrix);
        }
        let x = x.clamp(0.0, last as f64);
        let interaction = if last == 0 {
            self.table[0]
        } else {
            let k = (x.floor() as usize).min(last - 1);
            let frac = x - k as f64;
            project_unitary(
                &(self.table[k] * C64::new(1.0 - frac, 0.0) + self.table[k + 1] * C64::new(frac, 0.0)),
            )
        };
        let free = free_phases(omega_e, self.solver.pulse.detuning, 0.5 * self.solver.window());
        Ok(scale_rows_cols(&interaction, &free, &free))
    }

    /// Largest interpolation error found at interval midpoints, checked
    /// against direct integration at every `stride`-th interval.
    pub fn audit(&self, stride: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        let stride = stride.max(1);
        for k in (0..self.table.len().saturating_sub(1)).step_by(stride) {
            let omega = self.omega_start + (k as f64 + 0.5) * self.omega_step;
            let exact = self.solver.propagate(omega)?.matrix;
            worst = worst.max(max_abs_diff(&exact, &self.interpolate(omega)?));
        }
        Ok(worst)
    }
}

impl PropagatorSource for PropagatorCache {
    fn propagator_at(&self, omega_e: f64) -> Result<Propagator> {
        Ok(self.solver.wrap(self.interpolate(omega_e)?, omega_e, 0))
    }
}
