//! Linear Schrödinger groups `e^{-itH}`.
//!
//! * `Chebyshev`: expansion of the exact discrete group in Chebyshev polynomials
//!   of the rescaled operator, accurate to rounding.
//! * `Cayley`: Crank–Nicolson `(1 + i dt H/2)⁻¹ (1 - i dt H/2)`, optionally with
//!   an absorbing sponge `H - iW`. Dirichlet grids only.
//! * `SplitStep`: Fourier kinetic step with the potential applied pointwise.
//!   Periodic grids only; its kinetic operator is spectral rather than the
//!   finite-difference stencil.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{ComplexField, I};
use crate::grid::{Boundary, Grid};
use crate::linalg::BandLu;
use crate::operator::Hamiltonian;
use crate::special::bessel_j_sequence;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorMethod {
    #[default]
    Chebyshev,
    Cayley,
    SplitStep,
}

/// Complex absorbing layer `-iW(x)` with `W = strength · q((|x| - x₀)/(L - x₀))`
/// for `|x| > x₀ = start_fraction · L`, `q` the quintic smoothstep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sponge {
    pub start_fraction: f64,
    pub strength: f64,
}

impl Default for Sponge {
    fn default() -> Self {
        Sponge {
            start_fraction: 0.75,
            strength: 1.0,
        }
    }
}

impl Sponge {
    pub fn validate(&self) -> Result<()> {
        if !(self.start_fraction >= 0.5 && self.start_fraction < 1.0) {
            return Err(LabError::InvalidParameter(format!(
                "sponge start_fraction must lie in [0.5, 1), got {}",
                self.start_fraction
            )));
        }
        if !(self.strength.is_finite() && self.strength >= 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "sponge strength must be nonnegative, got {}",
                self.strength
            )));
        }
        Ok(())
    }

    pub fn start(&self, grid: &Grid) -> f64 {
        self.start_fraction * grid.half_width()
    }

    pub fn profile(&self, grid: &Grid) -> Vec<f64> {
        let l = grid.half_width();
        let x0 = self.start(grid);
        grid.points()
            .iter()
            .map(|&x| {
                let s = ((x.abs() - x0) / (l - x0)).clamp(0.0, 1.0);
                self.strength * s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
            })
            .collect()
    }
}

/// Precomputed Chebyshev expansion of `e^{-itH}` for one fixed `t`.
#[derive(Debug, Clone)]
pub struct ChebyshevStep {
    t: f64,
    phase: Complex64,
    coeffs: Vec<Complex64>,
}

impl ChebyshevStep {
    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn terms(&self) -> usize {
        self.coeffs.len()
    }
}

#[derive(Debug, Clone)]
pub struct ChebyshevPropagator {
    ham: Hamiltonian,
    center: f64,
    radius: f64,
}

/// Largest `r·t` handled by one expansion; longer times are chunked.
const MAX_CHEB_ARG: f64 = 400.0;

impl ChebyshevPropagator {
    pub fn new(ham: &Hamiltonian) -> Self {
        let (lo, hi) = ham.spectral_bounds();
        ChebyshevPropagator {
            ham: ham.clone(),
            center: 0.5 * (hi + lo),
            radius: 0.5 * (hi - lo) * (1.0 + 1e-12) + 1e-12,
        }
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.ham
    }

    pub fn step(&self, t: f64) -> ChebyshevStep {
        let arg = self.radius * t.abs();
        let kmax = (arg + 12.0 * arg.max(1.0).cbrt() + 40.0).ceil() as usize;
        let j = bessel_j_sequence(arg, kmax);
        let last = j
            .iter()
            .rposition(|v| v.abs() > 1e-18)
            .unwrap_or(0)
            .max(1);
        let rot = if t >= 0.0 { -I } else { I };
        let mut power = Complex64::new(1.0, 0.0);
        let mut coeffs = Vec::with_capacity(last + 1);
        for (k, &jk) in j.iter().enumerate().take(last + 1) {
            let w = if k == 0 { 1.0 } else { 2.0 };
            coeffs.push(power * (w * jk));
            power *= rot;
        }
        ChebyshevStep {
            t,
            phase: (-I * self.center * t).exp(),
            coeffs,
        }
    }

    /// `u ← e^{-itH} u` with a precomputed expansion.
    pub fn apply_step(&self, step: &ChebyshevStep, u: &mut [Complex64]) {
        let n = u.len();
        let inv_r = 1.0 / self.radius;
        let c = self.center;
        let mut t_prev = u.to_vec();
        let mut t_cur = vec![ZERO; n];
        let mut hbuf = vec![ZERO; n];
        let mut acc: Vec<Complex64> = u.iter().map(|v| v * step.coeffs[0]).collect();
        // T_1 = H_s u
        self.ham.apply_into(&t_prev, &mut hbuf);
        for i in 0..n {
            t_cur[i] = (hbuf[i] - t_prev[i] * c) * inv_r;
            acc[i] += t_cur[i] * step.coeffs[1];
        }
        for &ak in &step.coeffs[2..] {
            self.ham.apply_into(&t_cur, &mut hbuf);
            for i in 0..n {
                let next = (hbuf[i] - t_cur[i] * c) * (2.0 * inv_r) - t_prev[i];
                t_prev[i] = next;
                acc[i] += next * ak;
            }
            std::mem::swap(&mut t_prev, &mut t_cur);
        }
        for (dst, a) in u.iter_mut().zip(acc) {
            *dst = a * step.phase;
        }
    }

    pub fn propagate_values(&self, u: &mut [Complex64], t: f64) {
        if t == 0.0 {
            return;
        }
        let chunks = (self.radius * t.abs() / MAX_CHEB_ARG).ceil().max(1.0) as usize;
        let step = self.step(t / chunks as f64);
        for _ in 0..chunks {
            self.apply_step(&step, u);
        }
    }
}

/// Crank–Nicolson stepper for `i u_t = (H - iW) u`.
#[derive(Debug, Clone)]
pub struct CayleyStepper {
    ham: Hamiltonian,
    dt: f64,
    absorb: Vec<f64>,
    lu: BandLu,
}

impl CayleyStepper {
    pub fn new(ham: &Hamiltonian, dt: f64, sponge: Option<&Sponge>) -> Result<Self> {
        ham.grid().require_dirichlet()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(LabError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let grid = ham.grid();
        let absorb = match sponge {
            Some(s) => {
                s.validate()?;
                s.profile(grid)
            }
            None => vec![0.0; grid.len()],
        };
        let band = ham.band()?;
        let m = band.bandwidth();
        let half = 0.5 * dt;
        let lu = BandLu::factor(grid.len(), m, m, |i, j| {
            let hij = band.entry(i, j);
            let mut a = I * (half * hij);
            if i == j {
                a += 1.0 + half * absorb[i];
            }
            a
        })?;
        Ok(CayleyStepper {
            ham: ham.clone(),
            dt,
            absorb,
            lu,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn absorption(&self) -> &[f64] {
        &self.absorb
    }

    /// `(1 - i dt/2 (H - iW)) u`.
    pub fn explicit_half(&self, u: &[Complex64], out: &mut [Complex64]) {
        self.ham.apply_into(u, out);
        let half = 0.5 * self.dt;
        for i in 0..u.len() {
            out[i] = u[i] * (1.0 - half * self.absorb[i]) - I * half * out[i];
        }
    }

    pub fn solve_implicit(&self, rhs: &mut [Complex64]) {
        self.lu.solve_in_place(rhs);
    }

    pub fn step_values(&self, u: &mut [Complex64]) {
        let mut rhs = vec![ZERO; u.len()];
        self.explicit_half(u, &mut rhs);
        self.lu.solve_in_place(&mut rhs);
        u.copy_from_slice(&rhs);
    }
}

/// Fourier split step `e^{-iVdt/2} F⁻¹ e^{-ik²dt} F e^{-iVdt/2}`.
pub struct SplitStepper {
    n: usize,
    half_width: f64,
    v: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for SplitStepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplitStepper").field("n", &self.n).finish()
    }
}

impl SplitStepper {
    pub fn new(ham: &Hamiltonian) -> Result<Self> {
        let grid = ham.grid();
        if grid.boundary() != Boundary::Periodic {
            return Err(LabError::UnsupportedBoundary {
                required: "periodic",
            });
        }
        let n = grid.len();
        let mut planner = FftPlanner::new();
        let length = 2.0 * grid.half_width();
        let wavenumbers = (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                2.0 * std::f64::consts::PI * m / length
            })
            .collect();
        Ok(SplitStepper {
            n,
            half_width: grid.half_width(),
            v: ham.potential_samples().to_vec(),
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            wavenumbers,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn propagate_values(&self, u: &mut [Complex64], t: f64, steps: usize) {
        let dt = t / steps as f64;
        let half: Vec<Complex64> = self.v.iter().map(|v| (-I * v * (0.5 * dt)).exp()).collect();
        let kin: Vec<Complex64> = self
            .wavenumbers
            .iter()
            .map(|k| (-I * k * k * dt).exp() / self.n as f64)
            .collect();
        for _ in 0..steps {
            for (a, b) in u.iter_mut().zip(&half) {
                *a *= b;
            }
            self.fwd.process(u);
            for (a, b) in u.iter_mut().zip(&kin) {
                *a *= b;
            }
            self.inv.process(u);
            for (a, b) in u.iter_mut().zip(&half) {
                *a *= b;
            }
        }
    }
}

/// `e^{-itH}` by any of the three methods.
#[derive(Debug)]
pub enum LinearPropagator {
    Chebyshev(ChebyshevPropagator),
    Cayley { ham: Hamiltonian, max_dt: f64 },
    SplitStep { stepper: SplitStepper, max_dt: f64 },
}

impl LinearPropagator {
    pub fn new(ham: &Hamiltonian, method: PropagatorMethod, max_dt: f64) -> Result<Self> {
        match method {
            PropagatorMethod::Chebyshev => Ok(Self::Chebyshev(ChebyshevPropagator::new(ham))),
            PropagatorMethod::Cayley => {
                ham.grid().require_dirichlet()?;
                Ok(Self::Cayley {
                    ham: ham.clone(),
                    max_dt,
                })
            }
            PropagatorMethod::SplitStep => Ok(Self::SplitStep {
                stepper: SplitStepper::new(ham)?,
                max_dt,
            }),
        }
    }

    pub fn exact(ham: &Hamiltonian) -> Self {
        Self::Chebyshev(ChebyshevPropagator::new(ham))
    }

    pub fn propagate(&self, psi: &ComplexField, t: f64) -> Result<ComplexField> {
        if !t.is_finite() {
            return Err(LabError::InvalidParameter(format!(
                "propagation time must be finite, got {t}"
            )));
        }
        let mut out = psi.clone();
        if t == 0.0 {
            return Ok(out);
        }
        match self {
            Self::Chebyshev(p) => {
                if **psi.grid() != **p.hamiltonian().grid() {
                    return Err(LabError::GridMismatch);
                }
                p.propagate_values(out.values_mut(), t);
            }
            Self::Cayley { ham, max_dt } => {
                if **psi.grid() != **ham.grid() {
                    return Err(LabError::GridMismatch);
                }
                let steps = (t.abs() / max_dt).ceil().max(1.0) as usize;
                let stepper = CayleyStepper::new(ham, t.abs() / steps as f64, None)?;
                let reverse = t < 0.0;
                let vals = out.values_mut();
                if reverse {
                    vals.iter_mut().for_each(|v| *v = v.conj());
                }
                for _ in 0..steps {
                    stepper.step_values(vals);
                }
                if reverse {
                    vals.iter_mut().for_each(|v| *v = v.conj());
                }
            }
            Self::SplitStep { stepper, max_dt } => {
                if psi.len() != stepper.n || psi.grid().half_width() != stepper.half_width() {
                    return Err(LabError::GridMismatch);
                }
                let steps = (t.abs() / max_dt).ceil().max(1.0) as usize;
                stepper.propagate_values(out.values_mut(), t, steps);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;
    use crate::spectrum::SpectralData;
    use crate::operator::Stencil;

    fn setup(n: usize) -> (Hamiltonian, SpectralData) {
        let g = Arc::new(Grid::dirichlet(40.0, n).unwrap());
        let h = Hamiltonian::new(&g, &Potential::sech2(1.0, 1.0).unwrap(), Stencil::Second);
        let s = SpectralData::compute(&h).unwrap();
        (h, s)
    }

    fn packet(g: &Arc<Grid>) -> ComplexField {
        ComplexField::from_fn(g, |x| {
            (-(x - 2.0) * (x - 2.0) / 2.0).exp() * (I * 1.5 * x).exp()
        })
    }

    #[test]
    fn eigenvector_rotates_by_its_phase() {
        let (h, s) = setup(1024);
        let p = LinearPropagator::exact(&h);
        let t = 3.7;
        let out = p.propagate(&s.phi, t).unwrap();
        let want = s.phi.scale((I * s.lambda * t).exp());
        assert!((&out - &want).norm() < 1e-9);
    }

    #[test]
    fn chebyshev_is_unitary_and_a_group() {
        let (h, _) = setup(1024);
        let p = LinearPropagator::exact(&h);
        let u = packet(h.grid());
        let a = p.propagate(&u, 1.3).unwrap();
        assert!((a.norm() - u.norm()).abs() < 1e-10);
        let b = p.propagate(&a, 0.4).unwrap();
        let c = p.propagate(&u, 1.7).unwrap();
        assert!((&b - &c).norm() < 1e-9);
        let back = p.propagate(&c, -1.7).unwrap();
        assert!((&back - &u).norm() < 1e-9);
    }

    #[test]
    fn cayley_is_unitary_without_sponge() {
        let (h, _) = setup(512);
        let p = LinearPropagator::new(&h, PropagatorMethod::Cayley, 0.01).unwrap();
        let u = packet(h.grid());
        let a = p.propagate(&u, 2.0).unwrap();
        assert!((a.norm() - u.norm()).abs() < 1e-12);
    }

    #[test]
    fn sponge_absorbs() {
        let (h, _) = setup(1024);
        let sp = Sponge {
            start_fraction: 0.5,
            strength: 1.0,
        };
        let st = CayleyStepper::new(&h, 0.05, Some(&sp)).unwrap();
        let mut u = packet(h.grid()).into_values();
        let before: f64 = u.iter().map(|v| v.norm_sqr()).sum();
        for _ in 0..1000 {
            st.step_values(&mut u);
        }
        let after: f64 = u.iter().map(|v| v.norm_sqr()).sum();
        assert!(after < 0.5 * before);
    }

    #[test]
    fn free_gaussian_split_step() {
        let g = Arc::new(Grid::periodic(40.0, 2048).unwrap());
        let h = Hamiltonian::new(&g, &Potential::zero(), Stencil::Second);
        let p = LinearPropagator::new(&h, PropagatorMethod::SplitStep, 0.1).unwrap();
        let u = ComplexField::from_fn(&g, |x| Complex64::new((-x * x / 2.0).exp(), 0.0));
        let t = 2.0;
        let out = p.propagate(&u, t).unwrap();
        // (1 + 2it)^{-1/2} exp(-x²/(2(1 + 2it)))
        let d = Complex64::new(1.0, 2.0 * t);
        let want = ComplexField::from_fn(&g, |x| (-x * x / (2.0 * d)).exp() / d.sqrt());
        assert!(out.max_abs_diff(&want) < 1e-10);
    }

    #[test]
    fn wrong_boundary_is_rejected() {
        let g = Arc::new(Grid::dirichlet(10.0, 128).unwrap());
        let h = Hamiltonian::new(&g, &Potential::zero(), Stencil::Second);
        assert!(LinearPropagator::new(&h, PropagatorMethod::SplitStep, 0.1).is_err());
        let g = Arc::new(Grid::periodic(10.0, 128).unwrap());
        let h = Hamiltonian::new(&g, &Potential::zero(), Stencil::Second);
        assert!(LinearPropagator::new(&h, PropagatorMethod::Cayley, 0.1).is_err());
    }
}
