//! Time integration of `i u_t = Hu + g(|u|²)u` on a box, optionally with an
//! absorbing sponge `-iW`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::weights::{exp_weight, exp_weighted_h1_norm};
use crate::error::{LabError, Result};
use crate::field::{ComplexField, I};
use crate::grid::{Boundary, Grid};
use crate::modulation::{Decomposer, ModulationState};
use crate::nonlinearity::Nonlinearity;
use crate::operator::Hamiltonian;
use crate::propagator::{CayleyStepper, ChebyshevPropagator, ChebyshevStep, Sponge, SplitStepper};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    StrangSplit,
    CrankNicolson,
}

/// Linear substep of the Strang scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSubstep {
    /// `e^{-i dt H}` of the finite-difference operator, to rounding.
    #[default]
    Exact,
    /// Fourier kinetic step plus pointwise potential; periodic grids only.
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpongeConfig {
    pub enabled: bool,
    pub start_fraction: f64,
    pub strength: f64,
}

impl Default for SpongeConfig {
    fn default() -> Self {
        let s = Sponge::default();
        SpongeConfig {
            enabled: false,
            start_fraction: s.start_fraction,
            strength: s.strength,
        }
    }
}

impl SpongeConfig {
    pub fn sponge(&self) -> Option<Sponge> {
        self.enabled.then_some(Sponge {
            start_fraction: self.start_fraction,
            strength: self.strength,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
    pub scheme: Scheme,
    pub linear: LinearSubstep,
    pub sponge: SpongeConfig,
    /// Radiation counts as arrived once `|u|` exceeds this fraction of `sup|u₀|`
    /// beyond the sponge start (or `0.9 L` without a sponge).
    pub wavefront_fraction: f64,
    pub cn_tolerance: f64,
    pub cn_max_iterations: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            dt: 1e-3,
            t_final: 10.0,
            snapshot_stride: 100,
            scheme: Scheme::StrangSplit,
            linear: LinearSubstep::Exact,
            sponge: SpongeConfig::default(),
            wavefront_fraction: 1e-3,
            cn_tolerance: 1e-14,
            cn_max_iterations: 100,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::InvalidParameter(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return bad(format!("t_final must be at least dt, got {}", self.t_final));
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be positive".into());
        }
        if let Some(s) = self.sponge.sponge() {
            s.validate()?;
        }
        if !(self.wavefront_fraction > 0.0) {
            return bad("wavefront_fraction must be positive".into());
        }
        Ok(())
    }

    /// Number of steps; `t_final` is rounded to a whole number of steps.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }
}

enum Kernel {
    Strang {
        cheb: ChebyshevPropagator,
        step: ChebyshevStep,
    },
    Fourier(SplitStepper),
    Cn(CayleyStepper),
}

/// One-step map for a fixed `dt`.
pub struct Stepper {
    nl: Nonlinearity,
    dt: f64,
    kernel: Kernel,
    absorb: Vec<f64>,
    tolerance: f64,
    max_iterations: usize,
    backup: Vec<Complex64>,
    work: Vec<Complex64>,
    explicit: Vec<Complex64>,
    next: Vec<Complex64>,
}

impl Stepper {
    pub fn new(ham: &Hamiltonian, nl: Nonlinearity, config: &EvolutionConfig) -> Result<Self> {
        config.validate()?;
        let grid = ham.grid();
        let sponge = config.sponge.sponge();
        let kernel = match (config.scheme, config.linear) {
            (Scheme::CrankNicolson, _) => Kernel::Cn(CayleyStepper::new(ham, config.dt, sponge.as_ref())?),
            (Scheme::StrangSplit, LinearSubstep::Exact) => {
                let cheb = ChebyshevPropagator::new(ham);
                let step = cheb.step(config.dt);
                Kernel::Strang { cheb, step }
            }
            (Scheme::StrangSplit, LinearSubstep::Fourier) => Kernel::Fourier(SplitStepper::new(ham)?),
        };
        let absorb = match &sponge {
            Some(s) => s.profile(grid),
            None => vec![0.0; grid.len()],
        };
        let n = grid.len();
        Ok(Stepper {
            nl,
            dt: config.dt,
            kernel,
            absorb,
            tolerance: config.cn_tolerance,
            max_iterations: config.cn_max_iterations,
            backup: vec![ZERO; n],
            work: vec![ZERO; n],
            explicit: vec![ZERO; n],
            next: vec![ZERO; n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn absorption(&self) -> &[f64] {
        &self.absorb
    }

    fn nonlinear_half(&self, u: &mut [Complex64]) {
        let half = 0.5 * self.dt;
        for (v, w) in u.iter_mut().zip(&self.absorb) {
            let g = self.nl.g(v.norm_sqr());
            let mut factor = (-I * (half * g)).exp();
            if *w != 0.0 {
                factor *= (-half * w).exp();
            }
            *v *= factor;
        }
    }

    /// Advances `u` by one step; on a non-finite result `u` is restored and
    /// `NonFinite` is returned. The count is the number of fixed-point sweeps
    /// (one for the splitting schemes).
    pub fn step(&mut self, u: &mut [Complex64], t: f64) -> Result<usize> {
        self.backup.copy_from_slice(u);
        let sweeps = match &self.kernel {
            Kernel::Strang { cheb, step } => {
                self.nonlinear_half(u);
                cheb.apply_step(step, u);
                self.nonlinear_half(u);
                1
            }
            Kernel::Fourier(split) => {
                self.nonlinear_half(u);
                split.propagate_values(u, self.dt, 1);
                self.nonlinear_half(u);
                1
            }
            Kernel::Cn(cayley) => {
                let mut cn = ConservativeCn {
                    nl: self.nl,
                    dt: self.dt,
                    tolerance: self.tolerance,
                    max_iterations: self.max_iterations,
                    cayley,
                };
                cn.step(u, &mut self.explicit, &mut self.work, &mut self.next)?
            }
        };
        if u.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            u.copy_from_slice(&self.backup);
            return Err(LabError::NonFinite { t: t + self.dt });
        }
        Ok(sweeps)
    }
}

/// Conservative Crank–Nicolson: the nonlinear term is the difference quotient
/// `(G(|u⁺|²) - G(|u|²))/(|u⁺|² - |u|²)` times the midpoint, which keeps
/// discrete mass and energy exact (sponge off).
struct ConservativeCn<'a> {
    nl: Nonlinearity,
    dt: f64,
    tolerance: f64,
    max_iterations: usize,
    cayley: &'a CayleyStepper,
}

impl ConservativeCn<'_> {
    fn step(
        &mut self,
        u: &mut [Complex64],
        explicit: &mut [Complex64],
        rhs: &mut Vec<Complex64>,
        next: &mut Vec<Complex64>,
    ) -> Result<usize> {
        let n = u.len();
        self.cayley.explicit_half(u, explicit);
        next.copy_from_slice(explicit);
        self.cayley.solve_implicit(next);
        if self.nl.is_linear() {
            u.copy_from_slice(next);
            return Ok(1);
        }
        let scale = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Ok(0);
        }
        for sweep in 1..=self.max_iterations {
            for i in 0..n {
                let a = u[i].norm_sqr();
                let b = next[i].norm_sqr();
                let q = if (b - a).abs() > 1e-12 * (a + b) {
                    (self.nl.big_g(b) - self.nl.big_g(a)) / (b - a)
                } else {
                    self.nl.g(0.5 * (a + b))
                };
                let mid = 0.5 * (u[i] + next[i]);
                rhs[i] = explicit[i] - I * (self.dt * q) * mid;
            }
            self.cayley.solve_implicit(rhs);
            let change = rhs
                .iter()
                .zip(next.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            std::mem::swap(next, rhs);
            if change <= self.tolerance * scale {
                u.copy_from_slice(next);
                return Ok(sweep);
            }
            if !change.is_finite() {
                break;
            }
        }
        Err(LabError::NewtonDivergence {
            iterations: self.max_iterations,
            residual: f64::NAN,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub half_width: f64,
    pub n: usize,
    pub boundary: Boundary,
    pub potential: String,
    pub nonlinearity: Nonlinearity,
    pub config: EvolutionConfig,
    pub version: String,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub u: ComplexField,
    pub state: ModulationState,
    /// `E(|z|²)` on the branch.
    pub energy_level: f64,
    pub mass: f64,
    pub energy: f64,
    /// `∫₀ᵗ ∫ W|u|² dx ds`.
    pub absorbed: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub config: EvolutionConfig,
    pub snapshots: Vec<Snapshot>,
    /// `z = (u, φ)` after every step, index 0 at `t = 0`.
    pub z_series: Vec<Complex64>,
    pub wavefront_time: Option<f64>,
    /// Set when the run stopped early.
    pub truncated: Option<String>,
}

impl Trajectory {
    pub fn grid(&self) -> &Arc<Grid> {
        self.snapshots[0].u.grid()
    }

    pub fn absorption(&self) -> Option<Vec<f64>> {
        self.config.sponge.sponge().map(|s| s.profile(self.grid()))
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// End of the window free of boundary effects: the wavefront time when
    /// the sponge is off, otherwise the whole run.
    pub fn trust_end(&self) -> f64 {
        let end = self.snapshots.last().map_or(0.0, |s| s.t);
        if self.config.sponge.enabled {
            end
        } else {
            self.wavefront_time.map_or(end, |w| w.min(end))
        }
    }

    /// Snapshots with `t ≤ trust_end`.
    pub fn trusted(&self) -> &[Snapshot] {
        let end = self.trust_end();
        let k = self.snapshots.partition_point(|s| s.t <= end + 1e-12);
        &self.snapshots[..k.max(1)]
    }

    pub fn initial_mass(&self) -> f64 {
        self.snapshots[0].mass
    }

    /// Largest relative drift of mass and energy against `t = 0`.
    pub fn conservation_drift(&self) -> (f64, f64) {
        let m0 = self.snapshots[0].mass;
        let e0 = self.snapshots[0].energy;
        let mut dm: f64 = 0.0;
        let mut de: f64 = 0.0;
        for s in &self.snapshots {
            if m0 > 0.0 {
                dm = dm.max((s.mass - m0).abs() / m0);
            }
            if e0 != 0.0 {
                de = de.max((s.energy - e0).abs() / e0.abs());
            }
        }
        (dm, de)
    }
}

fn absorbed_rate(u: &[Complex64], absorb: &[f64], h: f64) -> f64 {
    u.iter().zip(absorb).map(|(v, w)| w * v.norm_sqr()).sum::<f64>() * h
}

/// Evolves `u₀` and decomposes every `snapshot_stride`-th state.
pub fn run(decomposer: &Decomposer, u0: &ComplexField, config: &EvolutionConfig) -> Result<Trajectory> {
    let branch = decomposer.branch();
    let ham = branch.hamiltonian();
    let nl = branch.nonlinearity();
    let phi = branch.spectral().phi.clone();
    let grid = ham.grid().clone();
    u0.check_grid(&phi)?;
    let mut stepper = Stepper::new(ham, nl, config)?;
    let h = grid.spacing();
    let meta = TrajectoryMeta {
        half_width: grid.half_width(),
        n: grid.len(),
        boundary: grid.boundary(),
        potential: ham.potential().describe(),
        nonlinearity: nl,
        config: *config,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let front = match config.sponge.sponge() {
        Some(s) => s.start(&grid),
        None => 0.9 * grid.half_width(),
    };
    let outer: Vec<usize> = (0..grid.len()).filter(|&j| grid.x(j).abs() >= front).collect();
    let threshold = config.wavefront_fraction * u0.sup_norm();

    let snapshot = |step: usize, t: f64, u: &ComplexField, absorbed: f64| -> Result<Snapshot> {
        let (state, point) = decomposer.decompose(u, t)?;
        let (energy, mass) = nl.energy_mass(ham, u)?;
        Ok(Snapshot {
            step,
            t,
            u: u.clone(),
            state,
            energy_level: point.e,
            mass,
            energy,
            absorbed,
        })
    };

    let mut u = u0.clone();
    let mut traj = Trajectory {
        meta,
        config: *config,
        snapshots: vec![snapshot(0, 0.0, &u, 0.0)?],
        z_series: vec![u.inner(&phi)],
        wavefront_time: None,
        truncated: None,
    };
    let steps = config.steps();
    let mut absorbed = 0.0;
    let mut rate = absorbed_rate(u.values(), stepper.absorption(), h);
    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * config.dt;
        let t = k as f64 * config.dt;
        if let Err(e) = stepper.step(u.values_mut(), t_prev) {
            traj.truncated = Some(format!("step {k}: {e}"));
            break;
        }
        let next_rate = absorbed_rate(u.values(), stepper.absorption(), h);
        absorbed += 0.5 * config.dt * (rate + next_rate);
        rate = next_rate;
        traj.z_series.push(u.inner(&phi));
        if traj.wavefront_time.is_none() && threshold > 0.0 {
            let vals = u.values();
            if outer.iter().any(|&j| vals[j].norm() > threshold) {
                traj.wavefront_time = Some(t);
            }
        }
        if k % config.snapshot_stride == 0 || k == steps {
            match snapshot(k, t, &u, absorbed) {
                Ok(s) => traj.snapshots.push(s),
                Err(e) => {
                    traj.truncated = Some(format!("decomposition at t = {t}: {e}"));
                    break;
                }
            }
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Serialize)]
pub struct EquipartitionReport {
    pub times: Vec<f64>,
    /// `𝐐(u₀) - 𝐐(Q[z(t)]) - 𝐐(η(t))`, with mass absorbed by the sponge
    /// counted as radiation.
    pub drift: Vec<f64>,
    pub eta_mass: Vec<f64>,
    pub late_value: f64,
    pub eta_mass_peak: f64,
    /// `|late_value| / peak 𝐐(η)`, zero when `η` never appears.
    pub late_ratio: f64,
}

pub fn mass_equipartition_check(traj: &Trajectory) -> EquipartitionReport {
    let q0 = traj.initial_mass();
    let snaps = traj.trusted();
    let mut times = Vec::with_capacity(snaps.len());
    let mut drift = Vec::with_capacity(snaps.len());
    let mut eta_mass = Vec::with_capacity(snaps.len());
    for s in snaps {
        let q = &s.u - &s.state.eta;
        let m_eta = 0.5 * s.state.eta.norm_sqr();
        times.push(s.t);
        drift.push(q0 - s.absorbed - 0.5 * q.norm_sqr() - m_eta);
        eta_mass.push(m_eta);
    }
    let late_value = drift.last().copied().unwrap_or(0.0);
    let eta_mass_peak = eta_mass.iter().copied().fold(0.0, f64::max);
    let late_ratio = if eta_mass_peak > 0.0 {
        late_value.abs() / eta_mass_peak
    } else {
        0.0
    };
    EquipartitionReport {
        times,
        drift,
        eta_mass,
        late_value,
        eta_mass_peak,
        late_ratio,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalDecayReport {
    pub a: f64,
    pub times: Vec<f64>,
    /// `½‖e^{-a⟨x⟩}η‖²`.
    pub local_mass: Vec<f64>,
    /// `‖e^{-a⟨x⟩}η‖²_{H¹}`.
    pub local_h1_sq: Vec<f64>,
    pub peak: f64,
    /// `𝐚(T)/max 𝐚`, zero when `η ≡ 0`.
    pub final_over_peak: f64,
    /// Fraction of consecutive decreases after the peak.
    pub decreasing_fraction: f64,
    /// `∫ ‖e^{-a⟨x⟩}η‖²_{H¹} dt` over the trusted window.
    pub h1_integral: f64,
    /// Share of that integral from its final quarter.
    pub h1_tail_fraction: f64,
}

pub fn local_decay_series(traj: &Trajectory, a: f64) -> LocalDecayReport {
    let snaps = traj.trusted();
    let grid = traj.grid();
    let w = exp_weight(grid, a);
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let local_mass: Vec<f64> = snaps
        .iter()
        .map(|s| 0.5 * s.state.eta.weighted_norm(&w).powi(2))
        .collect();
    let local_h1_sq: Vec<f64> = snaps
        .iter()
        .map(|s| exp_weighted_h1_norm(&s.state.eta, a).powi(2))
        .collect();
    let (peak_idx, peak) = local_mass
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let last = local_mass.last().copied().unwrap_or(0.0);
    let final_over_peak = if peak > 0.0 { last / peak } else { 0.0 };
    let after = &local_mass[peak_idx..];
    let decreasing_fraction = if after.len() > 1 {
        after.windows(2).filter(|p| p[1] <= p[0]).count() as f64 / (after.len() - 1) as f64
    } else {
        1.0
    };
    let mut cumulative = vec![0.0; times.len()];
    for i in 1..times.len() {
        cumulative[i] = cumulative[i - 1] + 0.5 * (times[i] - times[i - 1]) * (local_h1_sq[i] + local_h1_sq[i - 1]);
    }
    let total = cumulative.last().copied().unwrap_or(0.0);
    let h1_tail_fraction = if total > 0.0 && times.len() > 1 {
        let t0 = times[0] + 0.75 * (times[times.len() - 1] - times[0]);
        let k = times.partition_point(|&t| t < t0);
        (total - cumulative[k.min(times.len() - 1)]) / total
    } else {
        0.0
    };
    LocalDecayReport {
        a,
        times,
        local_mass,
        local_h1_sq,
        peak,
        final_over_peak,
        decreasing_fraction,
        h1_integral: total,
        h1_tail_fraction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch::{BranchSettings, BranchSolver};
    use crate::modulation::ModulationSettings;
    use crate::potential::Potential;
    use crate::propagator::LinearPropagator;
    use crate::spectrum::SpectralData;
    use crate::operator::Stencil;

    fn setup(n: usize, nl: Nonlinearity) -> Decomposer {
        let g = Arc::new(Grid::dirichlet(30.0, n).unwrap());
        let h = Hamiltonian::new(&g, &Potential::sech2(1.0, 1.0).unwrap(), Stencil::Second);
        let sp = SpectralData::cached(&h).unwrap();
        let b = BranchSolver::new(&h, sp, nl, BranchSettings::default()).unwrap();
        Decomposer::new(b, ModulationSettings::default())
    }

    fn packet(d: &Decomposer, amp: f64) -> ComplexField {
        let sp = d.branch().spectral();
        let g = sp.grid();
        let raw = ComplexField::from_fn(g, |x| (-(x - 2.0) * (x - 2.0) / 2.0).exp() * (I * x).exp());
        let pc = sp.project_pc(&raw).unwrap();
        pc.scale_real(amp / pc.h1_norm())
    }

    #[test]
    fn zero_stays_zero() {
        let d = setup(401, Nonlinearity::focusing_cubic());
        let u0 = ComplexField::zeros(d.branch().spectral().grid());
        for scheme in [Scheme::StrangSplit, Scheme::CrankNicolson] {
            let cfg = EvolutionConfig {
                t_final: 1.0,
                dt: 0.01,
                snapshot_stride: 10,
                scheme,
                ..Default::default()
            };
            let tr = run(&d, &u0, &cfg).unwrap();
            assert!(tr.snapshots.iter().all(|s| s.u.sup_norm() == 0.0));
            assert_eq!(tr.snapshots.len(), 11);
            assert!(tr.wavefront_time.is_none());
        }
    }

    #[test]
    fn linear_flow_matches_propagator() {
        let nl = Nonlinearity::new(2.0, 0.0).unwrap();
        let d = setup(601, nl);
        let u0 = &packet(&d, 0.05) + &d.branch().spectral().phi.scale_real(0.01);
        let cfg = EvolutionConfig {
            t_final: 2.0,
            dt: 0.01,
            snapshot_stride: 200,
            ..Default::default()
        };
        let tr = run(&d, &u0, &cfg).unwrap();
        let exact = LinearPropagator::exact(d.branch().hamiltonian())
            .propagate(&u0, 2.0)
            .unwrap();
        assert!(tr.snapshots.last().unwrap().u.max_abs_diff(&exact) < 1e-9);
    }

    #[test]
    fn stationary_orbit_is_preserved() {
        let d = setup(801, Nonlinearity::focusing_cubic());
        let z0 = Complex64::new(0.05, 0.0);
        let pt = d.branch().solve(z0).unwrap();
        for scheme in [Scheme::StrangSplit, Scheme::CrankNicolson] {
            let cfg = EvolutionConfig {
                t_final: 2.0,
                dt: 1e-3,
                snapshot_stride: 500,
                scheme,
                ..Default::default()
            };
            let tr = run(&d, &pt.q, &cfg).unwrap();
            for s in &tr.snapshots {
                let exact = pt.q.scale((-I * pt.e * s.t).exp());
                assert!((&s.u - &exact).norm() < 1e-6, "{scheme:?} t = {}", s.t);
            }
        }
    }

    fn final_state(d: &Decomposer, u0: &ComplexField, dt: f64, scheme: Scheme) -> ComplexField {
        let cfg = EvolutionConfig {
            t_final: 1.0,
            dt,
            snapshot_stride: 1_000_000,
            scheme,
            ..Default::default()
        };
        run(d, u0, &cfg).unwrap().snapshots.pop().unwrap().u
    }

    #[test]
    fn second_order_in_dt() {
        let d = setup(401, Nonlinearity::focusing_cubic());
        let u0 = &packet(&d, 0.15) + &d.branch().spectral().phi.scale_real(0.1);
        for scheme in [Scheme::StrangSplit, Scheme::CrankNicolson] {
            let a = final_state(&d, &u0, 0.02, scheme);
            let b = final_state(&d, &u0, 0.01, scheme);
            let c = final_state(&d, &u0, 0.005, scheme);
            let ratio = (&a - &b).norm() / (&b - &c).norm();
            assert!((ratio - 4.0).abs() < 0.5, "{scheme:?}: {ratio}");
        }
    }

    #[test]
    fn conservative_scheme_conserves() {
        let d = setup(401, Nonlinearity::focusing_cubic());
        let u0 = &packet(&d, 0.1) + &d.branch().spectral().phi.scale_real(0.05);
        let cfg = EvolutionConfig {
            t_final: 5.0,
            dt: 0.01,
            snapshot_stride: 50,
            scheme: Scheme::CrankNicolson,
            ..Default::default()
        };
        let tr = run(&d, &u0, &cfg).unwrap();
        let (dm, de) = tr.conservation_drift();
        assert!(dm < 1e-12 && de < 1e-10, "{dm} {de}");
    }

    #[test]
    fn crank_nicolson_is_reversible() {
        let d = setup(401, Nonlinearity::focusing_cubic());
        let u0 = &packet(&d, 0.1) + &d.branch().spectral().phi.scale_real(0.05);
        let cfg = EvolutionConfig {
            t_final: 3.0,
            dt: 0.01,
            snapshot_stride: 1000,
            scheme: Scheme::CrankNicolson,
            ..Default::default()
        };
        let fwd = run(&d, &u0, &cfg).unwrap().snapshots.pop().unwrap().u;
        let back = run(&d, &fwd.conj(), &cfg).unwrap().snapshots.pop().unwrap().u;
        assert!(back.conj().max_abs_diff(&u0) < 1e-10);
    }

    #[test]
    fn sponge_loss_matches_absorption() {
        let d = setup(601, Nonlinearity::focusing_cubic());
        let raw = packet(&d, 0.05);
        let u0 = raw.map(|v| v * 1.0);
        let cfg = EvolutionConfig {
            t_final: 20.0,
            dt: 0.005,
            snapshot_stride: 200,
            sponge: SpongeConfig {
                enabled: true,
                ..Default::default()
            },
            ..Default::default()
        };
        let tr = run(&d, &u0, &cfg).unwrap();
        let m0 = tr.initial_mass();
        for w in tr.snapshots.windows(2) {
            assert!(w[1].mass <= w[0].mass * (1.0 + 1e-12));
        }
        let last = tr.snapshots.last().unwrap();
        let loss = m0 - last.mass;
        assert!(loss > 0.1 * m0);
        assert!((loss - last.absorbed).abs() < 0.05 * last.absorbed);
        assert!(tr.wavefront_time.is_some());
    }

    #[test]
    fn equipartition_at_start_is_cross_term() {
        let d = setup(401, Nonlinearity::focusing_cubic());
        let u0 = &packet(&d, 0.03) + &d.branch().spectral().phi.scale_real(0.05);
        let cfg = EvolutionConfig {
            t_final: 0.1,
            dt: 0.01,
            snapshot_stride: 5,
            ..Default::default()
        };
        let tr = run(&d, &u0, &cfg).unwrap();
        let rep = mass_equipartition_check(&tr);
        let s = &tr.snapshots[0];
        let q = &s.u - &s.state.eta;
        assert!((rep.drift[0] - q.pairing(&s.state.eta)).abs() < 1e-15);
    }

    #[test]
    fn local_decay_with_zero_weight_is_half_mass() {
        let d = setup(401, Nonlinearity::focusing_cubic());
        let u0 = &packet(&d, 0.03) + &d.branch().spectral().phi.scale_real(0.05);
        let cfg = EvolutionConfig {
            t_final: 0.2,
            dt: 0.01,
            snapshot_stride: 10,
            ..Default::default()
        };
        let tr = run(&d, &u0, &cfg).unwrap();
        let rep = local_decay_series(&tr, 0.0);
        for (s, m) in tr.snapshots.iter().zip(&rep.local_mass) {
            assert!((m - 0.5 * s.state.eta.norm_sqr()).abs() < 1e-16);
        }
    }
}
