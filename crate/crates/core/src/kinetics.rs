//! Nuclear spin-flip rates and the birth–death master equation for the
//! distribution of the nuclear polarization `n = (N↑ − N↓)/N`.

use crate::config::{precession_frequency, BathParams, DotParams};
use crate::error::{Error, Result};
use crate::spin::BlochState;
use crate::units;

/// Uniform polarization grid `n_k = 2(k − K)/N`, `k = 0..=2K`, symmetric
/// about zero with one nuclear flip per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolarizationGrid {
    n_nuclei: u32,
    half_steps: usize,
}

impl PolarizationGrid {
    /// Largest grid with `|n| ≤ n_window`.
    pub fn new(n_nuclei: u32, n_window: f64) -> Self {
        let max_half = (n_nuclei / 2) as usize;
        let half_steps = ((n_window * n_nuclei as f64 / 2.0 + 1e-9).floor() as usize).min(max_half);
        Self {
            n_nuclei,
            half_steps,
        }
    }

    pub fn n_nuclei(&self) -> u32 {
        self.n_nuclei
    }

    pub fn len(&self) -> usize {
        2 * self.half_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Polarization change per flip, `2/N`.
    pub fn step(&self) -> f64 {
        2.0 / self.n_nuclei as f64
    }

    /// Index of `n = 0`.
    pub fn center(&self) -> usize {
        self.half_steps
    }

    pub fn value(&self, k: usize) -> f64 {
        2.0 * (k as f64 - self.half_steps as f64) / self.n_nuclei as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.value(k)).collect()
    }

    /// Number of up spins `N(1 + n)/2` at grid index `k`.
    pub fn n_up(&self, k: usize) -> f64 {
        (self.n_nuclei / 2) as f64 + (k as f64 - self.half_steps as f64)
    }

    pub fn n_down(&self, k: usize) -> f64 {
        (self.n_nuclei / 2) as f64 - (k as f64 - self.half_steps as f64)
    }

    /// Nearest grid index to polarization `n` (clamped to the window).
    pub fn index_of(&self, n: f64) -> usize {
        let k = (n * self.n_nuclei as f64 / 2.0).round() + self.half_steps as f64;
        k.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    /// Precession frequency at every grid point, enforcing the guard.
    pub fn precession_frequencies(
        &self,
        dot: &DotParams,
        bath: &BathParams,
        omega_min: f64,
    ) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|k| precession_frequency(self.value(k), dot, bath, omega_min))
            .collect()
    }
}

/// Per-nucleus flip rates on a set of polarization points, with the inputs
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipRates {
    /// Polarization at each point.
    pub n: Vec<f64>,
    /// 1/s per nucleus.
    pub w_plus: Vec<f64>,
    pub w_minus: Vec<f64>,
    pub alpha_plus: Vec<f64>,
    pub alpha_minus: Vec<f64>,
    /// After-pulse `S_x = s_x/2`.
    pub sx: Vec<f64>,
    pub rho_tt: Vec<f64>,
    /// Additive depolarization rate included in both channels.
    pub gamma_depol: f64,
}

impl FlipRates {
    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    /// Mean-field drift `dn̄/dt` at point `k`.
    pub fn drift(&self, k: usize) -> f64 {
        mean_drift(self.n[k], self.w_plus[k], self.w_minus[k])
    }

    pub fn drifts(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.drift(k)).collect()
    }
}

/// Optical prefactor `[A/(ħ ω_e N)]²`.
pub fn hyperfine_prefactor(a_hyperfine_mev: f64, omega_e: f64, n_nuclei: u32) -> f64 {
    let ratio = a_hyperfine_mev / (units::rad_per_s_to_mev(omega_e) * n_nuclei as f64);
    ratio * ratio
}

/// Flip rates `w± = [A/(ħω_e N)]² α± (ρ_TT/T_R)(1 ± 2S_x) + γ_d` on the
/// points `n` (which need not be a master-equation grid).
///
/// `n_nuclei` sets the prefactor; the spin and α tables must be aligned
/// with `n`.
pub fn flip_rates_at(
    n: &[f64],
    n_nuclei: u32,
    spin_table: &[BlochState],
    alpha_table: &[(f64, f64)],
    bath: &BathParams,
    dot: &DotParams,
) -> Result<FlipRates> {
    if spin_table.len() != n.len() || alpha_table.len() != n.len() {
        return Err(Error::MisalignedTables(format!(
            "{} points, {} spin states, {} alpha pairs",
            n.len(),
            spin_table.len(),
            alpha_table.len()
        )));
    }
    let len = n.len();
    let mut rates = FlipRates {
        n: n.to_vec(),
        w_plus: Vec::with_capacity(len),
        w_minus: Vec::with_capacity(len),
        alpha_plus: Vec::with_capacity(len),
        alpha_minus: Vec::with_capacity(len),
        sx: Vec::with_capacity(len),
        rho_tt: Vec::with_capacity(len),
        gamma_depol: bath.gamma_depol,
    };
    for (k, (&nk, (state, &(ap, am)))) in n.iter().zip(spin_table.iter().zip(alpha_table)).enumerate() {
        let omega = crate::config::unguarded_precession_frequency(nk, dot, bath);
        if !(omega > 0.0) {
            return Err(Error::NonpositiveFrequency { n: nk, omega });
        }
        let gamma_opt = state.trion_yield.max(0.0) / dot.rep_period;
        let optical = hyperfine_prefactor(bath.a_hyperfine, omega, n_nuclei) * gamma_opt;
        let sx = 0.5 * state.s.x;
        let up = (optical * ap * (1.0 + 2.0 * sx)).max(0.0);
        let down = (optical * am * (1.0 - 2.0 * sx)).max(0.0);
        let (up, down) = (up + bath.gamma_depol, down + bath.gamma_depol);
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::ZeroRate { index: k });
        }
        rates.w_plus.push(up);
        rates.w_minus.push(down);
        rates.alpha_plus.push(ap);
        rates.alpha_minus.push(am);
        rates.sx.push(sx);
        rates.rho_tt.push(state.trion_yield);
    }
    Ok(rates)
}

/// Flip rates on a polarization grid.
pub fn flip_rates(
    grid: &PolarizationGrid,
    spin_table: &[BlochState],
    alpha_table: &[(f64, f64)],
    bath: &BathParams,
    dot: &DotParams,
) -> Result<FlipRates> {
    flip_rates_at(&grid.values(), grid.n_nuclei(), spin_table, alpha_table, bath, dot)
}

/// `dn̄/dt = w₊ − w₋ − n̄(w₊ + w₋)`.
#[inline]
pub fn mean_drift(n: f64, w_plus: f64, w_minus: f64) -> f64 {
    w_plus - w_minus - n * (w_plus + w_minus)
}

/// Probability distribution over a [`PolarizationGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct NuclearDistribution {
    pub p: Vec<f64>,
}

impl NuclearDistribution {
    /// All mass at the grid point nearest `n`.
    pub fn delta(grid: &PolarizationGrid, n: f64) -> Self {
        let mut p = vec![0.0; grid.len()];
        p[grid.index_of(n)] = 1.0;
        Self { p }
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn moments(&self, grid: &PolarizationGrid) -> (f64, f64) {
        moments(self, grid)
    }
}

/// Mean and variance of the polarization.
pub fn moments(p: &NuclearDistribution, grid: &PolarizationGrid) -> (f64, f64) {
    let total: f64 = p.p.iter().sum();
    let mean = p
        .p
        .iter()
        .enumerate()
        .map(|(k, &pk)| pk * grid.value(k))
        .sum::<f64>()
        / total;
    let variance = p
        .p
        .iter()
        .enumerate()
        .map(|(k, &pk)| pk * (grid.value(k) - mean).powi(2))
        .sum::<f64>()
        / total;
    (mean, variance)
}

fn check_aligned(grid: &PolarizationGrid, rates: &FlipRates) -> Result<()> {
    if rates.len() != grid.len() {
        return Err(Error::MisalignedTables(format!(
            "grid has {} points, rates have {}",
            grid.len(),
            rates.len()
        )));
    }
    Ok(())
}

/// Stationary distribution of the master equation.
///
/// Nearest-neighbour structure gives detailed balance between `n` and `n⁺`:
/// `P(n⁺)/P(n) = N↓(n) w₊(n) / (N↑(n⁺) w₋(n⁺))`. Ratios are accumulated in
/// log space so that tails far below the double range do not underflow the
/// bulk.
pub fn steady_distribution(grid: &PolarizationGrid, rates: &FlipRates) -> Result<NuclearDistribution> {
    check_aligned(grid, rates)?;
    let len = grid.len();
    for k in 0..len {
        let needs_up = k + 1 < len && grid.n_down(k) > 0.0;
        let needs_down = k > 0 && grid.n_up(k) > 0.0;
        if (needs_up && !(rates.w_plus[k] > 0.0)) || (needs_down && !(rates.w_minus[k] > 0.0)) {
            return Err(Error::ZeroRate { index: k });
        }
    }
    let mut log_p = Vec::with_capacity(len);
    log_p.push(0.0);
    for k in 0..len - 1 {
        let up = grid.n_down(k) * rates.w_plus[k];
        let down = grid.n_up(k + 1) * rates.w_minus[k + 1];
        log_p.push(log_p[k] + up.ln() - down.ln());
    }
    let max = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = log_p.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    Ok(NuclearDistribution { p })
}

/// Probability fluxes `(up, down)` out of each cell; no flux leaves the
/// window.
fn fluxes(grid: &PolarizationGrid, rates: &FlipRates, p: &[f64], up: &mut [f64], down: &mut [f64]) {
    let last = p.len() - 1;
    for k in 0..p.len() {
        up[k] = if k < last { p[k] * grid.n_down(k) * rates.w_plus[k] } else { 0.0 };
        down[k] = if k > 0 { p[k] * grid.n_up(k) * rates.w_minus[k] } else { 0.0 };
    }
}

/// Time derivative `∂P/∂t` of the truncated master equation.
pub fn master_rhs(grid: &PolarizationGrid, rates: &FlipRates, p: &[f64]) -> Vec<f64> {
    let mut up = vec![0.0; p.len()];
    let mut down = vec![0.0; p.len()];
    fluxes(grid, rates, p, &mut up, &mut down);
    (0..p.len())
        .map(|k| {
            let mut d = -up[k] - down[k];
            if k > 0 {
                d += up[k - 1];
            }
            if k + 1 < p.len() {
                d += down[k + 1];
            }
            d
        })
        .collect()
}

/// Largest total outflow rate of any cell (1/s).
pub fn max_outflow(grid: &PolarizationGrid, rates: &FlipRates) -> f64 {
    let last = grid.len() - 1;
    (0..grid.len())
        .map(|k| {
            let up = if k < last { grid.n_down(k) * rates.w_plus[k] } else { 0.0 };
            let down = if k > 0 { grid.n_up(k) * rates.w_minus[k] } else { 0.0 };
            up + down
        })
        .fold(0.0, f64::max)
}

/// Relative residual of the generator applied to `p`: the largest net rate
/// divided by the largest one-way flux.
pub fn generator_residual(grid: &PolarizationGrid, rates: &FlipRates, p: &NuclearDistribution) -> f64 {
    let mut up = vec![0.0; p.p.len()];
    let mut down = vec![0.0; p.p.len()];
    fluxes(grid, rates, &p.p, &mut up, &mut down);
    let scale = up.iter().chain(down.iter()).cloned().fold(0.0, f64::max);
    let rhs = master_rhs(grid, rates, &p.p);
    rhs.iter().map(|r| r.abs()).fold(0.0, f64::max) / scale
}

/// Forward-Euler evolution of the master equation.
///
/// Returns the distribution after every `record_every` steps (the initial
/// state first, the final state last). Each flux is removed from one cell
/// and added to its neighbour, so the total is conserved to rounding.
pub fn evolve_distribution(
    grid: &PolarizationGrid,
    p0: &NuclearDistribution,
    rates: &FlipRates,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<Vec<NuclearDistribution>> {
    check_aligned(grid, rates)?;
    if p0.p.len() != grid.len() {
        return Err(Error::MisalignedTables(format!(
            "grid has {} points, distribution has {}",
            grid.len(),
            p0.p.len()
        )));
    }
    let max_dt = 0.5 / max_outflow(grid, rates);
    if !(dt < max_dt) {
        return Err(Error::UnstableStep { dt, max_dt });
    }
    let record_every = record_every.max(1);
    let len = grid.len();
    let mut p = p0.p.clone();
    let mut up = vec![0.0; len];
    let mut down = vec![0.0; len];
    let mut trajectory = vec![p0.clone()];
    for step in 1..=steps {
        fluxes(grid, rates, &p, &mut up, &mut down);
        for k in 0..len {
            let mut d = -up[k] - down[k];
            if k > 0 {
                d += up[k - 1];
            }
            if k + 1 < len {
                d += down[k + 1];
            }
            p[k] += dt * d;
        }
        if step % record_every == 0 || step == steps {
            trajectory.push(NuclearDistribution { p: p.clone() });
        }
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn uniform_rates(grid: &PolarizationGrid, w_plus: f64, w_minus: f64) -> FlipRates {
        let len = grid.len();
        FlipRates {
            n: grid.values(),
            w_plus: vec![w_plus; len],
            w_minus: vec![w_minus; len],
            alpha_plus: vec![1.0; len],
            alpha_minus: vec![1.0; len],
            sx: vec![0.0; len],
            rho_tt: vec![0.0; len],
            gamma_depol: 0.0,
        }
    }

    fn state(sx: f64, rho_tt: f64) -> BlochState {
        BlochState {
            s: Vector3::new(2.0 * sx, 0.0, 0.0),
            trion_yield: rho_tt,
        }
    }

    #[test]
    fn grid_layout() {
        let g = PolarizationGrid::new(2000, 0.3);
        assert_eq!(g.len(), 601);
        assert_eq!(g.value(g.center()), 0.0);
        assert!((g.value(0) + 0.3).abs() < 1e-15);
        assert!((g.value(1) - g.value(0) - g.step()).abs() < 1e-15);
        for k in [0, 17, 300, 600] {
            assert_eq!(g.n_up(k) + g.n_down(k), 2000.0);
            assert!((g.n_up(k) - 1000.0 * (1.0 + g.value(k))).abs() < 1e-9);
        }
        assert_eq!(PolarizationGrid::new(50, 1.0).len(), 51);
        assert_eq!(g.index_of(-0.3), 0);
        assert_eq!(g.index_of(0.0004), 300);
        assert_eq!(g.index_of(0.0006), 301);
    }

    #[test]
    fn no_excitation_leaves_depolarization() {
        let dot = DotParams::default();
        let bath = BathParams::default();
        let grid = PolarizationGrid::new(200, 0.1);
        let spins = vec![state(0.3, 0.0); grid.len()];
        let alphas = vec![(0.9, 1.1); grid.len()];
        let r = flip_rates(&grid, &spins, &alphas, &bath, &dot).unwrap();
        assert!(r.w_plus.iter().chain(&r.w_minus).all(|&w| w == bath.gamma_depol));
    }

    #[test]
    fn symmetric_inputs_give_equal_rates() {
        let dot = DotParams::default();
        let bath = BathParams::default();
        let grid = PolarizationGrid::new(200, 0.1);
        let spins = vec![state(0.0, 0.4); grid.len()];
        let alphas = vec![(1.0, 1.0); grid.len()];
        let r = flip_rates(&grid, &spins, &alphas, &bath, &dot).unwrap();
        assert_eq!(r.w_plus, r.w_minus);
        assert!(r.w_plus[0] > bath.gamma_depol);
    }

    #[test]
    fn misaligned_tables() {
        let grid = PolarizationGrid::new(20, 0.5);
        let err = flip_rates(&grid, &[state(0.0, 0.1)], &[(1.0, 1.0)], &BathParams::default(), &DotParams::default());
        assert!(matches!(err, Err(Error::MisalignedTables(_))));
    }

    #[test]
    fn prefactor_at_two_tesla() {
        // Independent arithmetic: ħω_e = g μ_B B.
        let hbar_omega_mev: f64 = 0.43 * 5.788_381_806e-2 * 2.0;
        assert!((hbar_omega_mev - 0.0497).abs() < 1e-3);
        let expected = (0.1 / (hbar_omega_mev * 2e4)).powi(2);
        let omega = DotParams::default().zeeman_frequency();
        let got = hyperfine_prefactor(0.1, omega, 20_000);
        assert!((got / expected - 1.0).abs() < 1e-9);
        assert!((got - 1.01e-8).abs() < 0.01e-8, "{got}");
    }

    #[test]
    fn drift_limits() {
        assert_eq!(mean_drift(0.1, 2.0, 2.0), -0.4);
        assert_eq!(mean_drift(0.0, 3.0, 1.0), 2.0);
    }

    #[test]
    fn moments_basic() {
        let g = PolarizationGrid::new(100, 0.5);
        let d = NuclearDistribution::delta(&g, 0.2);
        let (m, v) = moments(&d, &g);
        assert!((m - 0.2).abs() < 1e-15);
        assert_eq!(v, 0.0);
        let mut p = vec![0.0; g.len()];
        p[g.center() - 3] = 0.25;
        p[g.center() + 3] = 0.25;
        p[g.center()] = 0.5;
        let (m, _) = moments(&NuclearDistribution { p }, &g);
        assert!(m.abs() < 1e-16);
    }

    #[test]
    fn uniform_rates_give_binomial() {
        let g = PolarizationGrid::new(2000, 0.3);
        let r = uniform_rates(&g, 0.7, 0.7);
        let d = steady_distribution(&g, &r).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-12);
        let (m, v) = moments(&d, &g);
        assert!(m.abs() < 1e-12);
        assert!((v * 2000.0 - 1.0).abs() < 0.02, "{}", v * 2000.0);
        assert!(generator_residual(&g, &r, &d) < 1e-10);
        // Stationary shape does not depend on the overall rate scale.
        let d2 = steady_distribution(&g, &uniform_rates(&g, 3e-5, 3e-5)).unwrap();
        for (a, b) in d.p.iter().zip(&d2.p) {
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }

    #[test]
    fn zero_rate_rejected() {
        let g = PolarizationGrid::new(20, 0.5);
        let mut r = uniform_rates(&g, 1.0, 1.0);
        r.w_minus[3] = 0.0;
        assert!(matches!(steady_distribution(&g, &r), Err(Error::ZeroRate { index: 3 })));
    }

    #[test]
    fn evolution_conserves_and_rejects_large_steps() {
        let g = PolarizationGrid::new(200, 0.2);
        let r = uniform_rates(&g, 0.1, 0.3);
        let p0 = NuclearDistribution::delta(&g, 0.05);
        let max_dt = 0.5 / max_outflow(&g, &r);
        let err = evolve_distribution(&g, &p0, &r, 2.0 * max_dt, 1, 1).unwrap_err();
        match err {
            Error::UnstableStep { max_dt: reported, .. } => assert!((reported - max_dt).abs() < 1e-15),
            other => panic!("{other}"),
        }
        let traj = evolve_distribution(&g, &p0, &r, 0.5 * max_dt, 500, 1).unwrap();
        assert_eq!(traj.len(), 501);
        for d in &traj {
            assert!((d.total() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn steady_state_is_stationary_under_evolution() {
        let g = PolarizationGrid::new(400, 0.2);
        let len = g.len();
        let mut r = uniform_rates(&g, 0.0, 0.0);
        for k in 0..len {
            let x = k as f64 / len as f64;
            r.w_plus[k] = 0.2 + 0.1 * (17.0 * x).sin().powi(2);
            r.w_minus[k] = 0.25 + 0.1 * (11.0 * x).cos().powi(2);
        }
        let d = steady_distribution(&g, &r).unwrap();
        let dt = 0.4 / max_outflow(&g, &r);
        let end = evolve_distribution(&g, &d, &r, dt, 1000, 1000).unwrap();
        let last = end.last().unwrap();
        for (a, b) in d.p.iter().zip(&last.p) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
