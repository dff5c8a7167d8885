//! Jost solutions `f_±(x,k) = e^{±ikx} m_±(x,k)`, Wronskian and transmission.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ode::{integrate, State, Tolerance};
use crate::error::{LabError, Result};
use crate::field::{japanese, ComplexField, I};
use crate::grid::Grid;
use crate::potential::Potential;

/// Potential magnitude below which the Jost ODE is launched.
pub const LAUNCH_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `m₊ → 1` as `x → +∞`.
    Plus,
    /// `m₋ → 1` as `x → -∞`.
    Minus,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JostSolution {
    k: Complex64,
    side: Side,
    grid: Arc<Grid>,
    m: Vec<Complex64>,
    dm: Vec<Complex64>,
    launch: f64,
}

impl JostSolution {
    pub fn k(&self) -> Complex64 {
        self.k
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Abscissa where `m = 1, m' = 0` was imposed.
    pub fn launch_point(&self) -> f64 {
        self.launch
    }

    pub fn m(&self) -> &[Complex64] {
        &self.m
    }

    pub fn dm(&self) -> &[Complex64] {
        &self.dm
    }

    pub fn m_field(&self) -> ComplexField {
        ComplexField::from_values(&self.grid, self.m.clone()).expect("length matches grid")
    }

    fn phase(&self, x: f64) -> Complex64 {
        (I * self.k * (self.side.sign() * x)).exp()
    }

    /// `f(x_j)`.
    pub fn f(&self, j: usize) -> Complex64 {
        self.phase(self.grid.x(j)) * self.m[j]
    }

    /// `f'(x_j) = e^{±ikx}(±ik m + m')`.
    pub fn df(&self, j: usize) -> Complex64 {
        let s = self.side.sign();
        self.phase(self.grid.x(j)) * (I * self.k * s * self.m[j] + self.dm[j])
    }

    pub fn f_field(&self) -> ComplexField {
        let vals = (0..self.grid.len()).map(|j| self.f(j)).collect();
        ComplexField::from_values(&self.grid, vals).expect("length matches grid")
    }

    /// Max over interior points of the centered-difference residual of the
    /// `m`-equation, normalized by `max(1, |k|²)`.
    pub fn ode_residual(&self, v: &Potential) -> f64 {
        let n = self.grid.len();
        let h = self.grid.spacing();
        let s = self.side.sign();
        let mut worst: f64 = 0.0;
        for j in 1..n - 1 {
            let d2 = (self.dm[j + 1] - self.dm[j - 1]) / (2.0 * h);
            let r = d2 + I * self.k * (2.0 * s) * self.dm[j] - self.m[j] * v.eval(self.grid.x(j));
            worst = worst.max(r.norm());
        }
        worst / self.k.norm_sqr().max(1.0)
    }

    /// Smallest constant `C` with
    /// `|m(x,k) - 1| ≤ C ⟨x∓⟩ ⟨k⟩⁻¹ |∫_x^{±∞} ⟨y⟩|V(y)| dy|` on the grid.
    pub fn kernel_bound_constant(&self, v: &Potential) -> f64 {
        let g = &self.grid;
        let n = g.len();
        let h = g.spacing();
        let vals: Vec<f64> = g.points().iter().map(|&y| japanese(y) * v.eval(y).abs()).collect();
        // tail integrals toward the side's infinity (trapezoid)
        let mut tail = vec![0.0; n];
        match self.side {
            Side::Plus => {
                for j in (0..n - 1).rev() {
                    tail[j] = tail[j + 1] + 0.5 * h * (vals[j] + vals[j + 1]);
                }
            }
            Side::Minus => {
                for j in 1..n {
                    tail[j] = tail[j - 1] + 0.5 * h * (vals[j] + vals[j - 1]);
                }
            }
        }
        let kfac = 1.0 / japanese(self.k.norm());
        let mut c: f64 = 0.0;
        for j in 0..n {
            let x = g.x(j);
            let xm = match self.side {
                Side::Plus => (-x).max(0.0),
                Side::Minus => x.max(0.0),
            };
            let denom = japanese(xm) * kfac * tail[j];
            if denom > 1e-12 {
                c = c.max((self.m[j] - 1.0).norm() / denom);
            }
        }
        c
    }
}

/// Integrate the Jost ODE `m'' ± 2ik m' = V m` inward from the side's end.
pub fn compute_jost(v: &Potential, grid: &Arc<Grid>, k: Complex64, side: Side) -> Result<JostSolution> {
    if k.im < 0.0 || !k.re.is_finite() || !k.im.is_finite() {
        return Err(LabError::InvalidParameter(format!(
            "Jost solutions need Im k ≥ 0, got {k}"
        )));
    }
    let n = grid.len();
    let radius = v.support_radius(LAUNCH_THRESHOLD).min(grid.half_width());
    let s = side.sign();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut m = vec![one; n];
    let mut dm = vec![zero; n];
    let two_ik = I * k * (2.0 * s);
    let rhs = |x: f64, y: &State| -> State { [y[1], y[0] * v.eval(x) - two_ik * y[1]] };
    let order: Vec<usize> = match side {
        Side::Plus => (0..n).rev().collect(),
        Side::Minus => (0..n).collect(),
    };
    // first grid point inside the launch radius
    let first = order
        .iter()
        .position(|&j| grid.x(j).abs() <= radius)
        .unwrap_or(n);
    let launch = s * radius;
    let mut y: State = [one, zero];
    let mut x = launch;
    let tol = Tolerance::default();
    let mut step = grid.spacing();
    for &j in &order[first..] {
        let xj = grid.x(j);
        y = integrate(&rhs, x, xj, y, &mut step, tol)?;
        x = xj;
        m[j] = y[0];
        dm[j] = y[1];
    }
    Ok(JostSolution {
        k,
        side,
        grid: grid.clone(),
        m,
        dm,
        launch,
    })
}

/// The Jost pair at one wavenumber with Wronskian and scattering data.
#[derive(Debug, Clone)]
pub struct JostPair {
    pub plus: JostSolution,
    pub minus: JostSolution,
    /// `[f₊, f₋](x_j) = f₊' f₋ - f₊ f₋'`.
    pub wronskian_profile: Vec<Complex64>,
}

impl JostPair {
    pub fn compute(v: &Potential, grid: &Arc<Grid>, k: Complex64) -> Result<Self> {
        let plus = compute_jost(v, grid, k, Side::Plus)?;
        let minus = compute_jost(v, grid, k, Side::Minus)?;
        let two_ik = I * k * 2.0;
        let wronskian_profile = (0..grid.len())
            .map(|j| {
                two_ik * plus.m[j] * minus.m[j] + plus.dm[j] * minus.m[j] - plus.m[j] * minus.dm[j]
            })
            .collect();
        Ok(JostPair {
            plus,
            minus,
            wronskian_profile,
        })
    }

    /// Interior window `|x| ≤ L/2` where both profiles are integrated.
    fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        let g = self.plus.grid.clone();
        let half = 0.5 * g.half_width();
        (0..g.len()).filter(move |&j| g.x(j).abs() <= half)
    }

    /// Wronskian at the grid point nearest the origin.
    pub fn wronskian(&self) -> Complex64 {
        let j = self.plus.grid.nearest_index(0.0);
        self.wronskian_profile[j]
    }

    /// `max |W(x) - W(0)| / |W(0)|` over the interior.
    pub fn wronskian_variation(&self) -> f64 {
        let w0 = self.wronskian();
        let scale = w0.norm();
        let dev = self
            .interior()
            .map(|j| (self.wronskian_profile[j] - w0).norm())
            .fold(0.0, f64::max);
        if scale > 0.0 {
            dev / scale
        } else {
            dev
        }
    }

    pub fn transmission(&self) -> Result<Complex64> {
        let k = self.plus.k;
        let w = self.wronskian();
        if w.norm() < 1e-300 || (k.norm() > 0.0 && w.norm() < 1e-14 * k.norm()) {
            return Err(LabError::DegenerateWronskian {
                k: format!("{k}"),
                modulus: w.norm(),
            });
        }
        Ok(I * k * 2.0 / w)
    }

    /// Left reflection coefficient from the asymptotics of `f₊` at the left end:
    /// `f₊ = A e^{ikx} + B e^{-ikx}` with `A = 1/T`.
    pub fn reflection(&self) -> Option<Complex64> {
        let k = self.plus.k;
        if k.norm() == 0.0 || k.im != 0.0 {
            return None;
        }
        let j = 0;
        let x = self.plus.grid.x(j);
        let m = self.plus.m[j];
        let dm = self.plus.dm[j];
        let two_ik = I * k * 2.0;
        let a = m + dm / two_ik;
        let b = -dm * (two_ik * x).exp() / two_ik;
        Some(b / a)
    }
}

/// Row of the scattering table.
#[derive(Debug, Clone, Serialize)]
pub struct ScatteringSummary {
    pub k: f64,
    pub wronskian: [f64; 2],
    pub transmission: [f64; 2],
    pub transmission_modulus: f64,
    pub wronskian_variation: f64,
    pub reflection_modulus: Option<f64>,
}

pub fn transmission(v: &Potential, grid: &Arc<Grid>, k: f64) -> Result<ScatteringSummary> {
    if !(k.is_finite() && k > 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "transmission needs real k > 0, got {k}"
        )));
    }
    let pair = JostPair::compute(v, grid, Complex64::new(k, 0.0))?;
    let t = pair.transmission()?;
    let w = pair.wronskian();
    Ok(ScatteringSummary {
        k,
        wronskian: [w.re, w.im],
        transmission: [t.re, t.im],
        transmission_modulus: t.norm(),
        wronskian_variation: pair.wronskian_variation(),
        reflection_modulus: pair.reflection().map(|r| r.norm()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceClass {
    Generic,
    Resonant,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceReport {
    pub class: ResonanceClass,
    /// `|W(0)| / |W(1)|`.
    pub score: f64,
    pub wronskian_zero: f64,
    pub wronskian_unit: f64,
    pub probe_k: f64,
    pub probe_transmission: f64,
}

/// `|W(0)| < threshold · |W(1)|` ⇒ resonant.
pub const RESONANCE_THRESHOLD: f64 = 1e-3;
pub const RESONANCE_PROBE: f64 = 0.01;

pub fn resonance_indicator(v: &Potential, grid: &Arc<Grid>) -> Result<ResonanceReport> {
    let w0 = JostPair::compute(v, grid, Complex64::new(0.0, 0.0))?.wronskian().norm();
    let w1 = JostPair::compute(v, grid, Complex64::new(1.0, 0.0))?.wronskian().norm();
    let probe = JostPair::compute(v, grid, Complex64::new(RESONANCE_PROBE, 0.0))?;
    let probe_t = probe.transmission().map(|t| t.norm()).unwrap_or(f64::INFINITY);
    let score = w0 / w1;
    let class = if score < RESONANCE_THRESHOLD {
        ResonanceClass::Resonant
    } else {
        ResonanceClass::Generic
    };
    Ok(ResonanceReport {
        class,
        score,
        wronskian_zero: w0,
        wronskian_unit: w1,
        probe_k: RESONANCE_PROBE,
        probe_transmission: probe_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::dirichlet(40.0, 2049).unwrap())
    }

    #[test]
    fn free_jost_is_identically_one() {
        let g = grid();
        let s = compute_jost(&Potential::zero(), &g, Complex64::new(0.7, 0.0), Side::Plus).unwrap();
        assert!(s.m().iter().all(|&m| m == Complex64::new(1.0, 0.0)));
        let t = transmission(&Potential::zero(), &g, 0.7).unwrap();
        assert!((t.transmission[0] - 1.0).abs() < 1e-15 && t.transmission[1].abs() < 1e-15);
    }

    #[test]
    fn reflectionless_closed_form() {
        let g = grid();
        let v = Potential::sech2(2.0, 1.0).unwrap();
        let s = compute_jost(&v, &g, Complex64::new(1.0, 0.0), Side::Plus).unwrap();
        let err = (0..g.len())
            .map(|j| {
                let x = g.x(j);
                let want = (Complex64::new(1.0, x.tanh())) / Complex64::new(1.0, 1.0);
                (s.m()[j] - want).norm()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        let pair = JostPair::compute(&v, &g, Complex64::new(1.0, 0.0)).unwrap();
        let t = pair.transmission().unwrap();
        assert!((t - I).norm() < 1e-8, "{t}");
        assert!(pair.reflection().unwrap().norm() < 1e-8);
    }

    #[test]
    fn zero_energy_solution_of_reflectionless_well_is_tanh() {
        let g = grid();
        let v = Potential::sech2(2.0, 1.0).unwrap();
        let s = compute_jost(&v, &g, Complex64::new(0.0, 0.0), Side::Plus).unwrap();
        let err = (0..g.len())
            .map(|j| (s.m()[j] - g.x(j).tanh()).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn unitarity_of_scattering() {
        let g = grid();
        let v = Potential::sech2(1.0, 1.0).unwrap();
        for k in [0.3, 1.0, 2.5] {
            let pair = JostPair::compute(&v, &g, Complex64::new(k, 0.0)).unwrap();
            let t = pair.transmission().unwrap().norm();
            let r = pair.reflection().unwrap().norm();
            assert!((t * t + r * r - 1.0).abs() < 1e-8, "{k}: {t} {r}");
        }
    }

    #[test]
    fn classification() {
        let g = grid();
        let r = resonance_indicator(&Potential::zero(), &g).unwrap();
        assert_eq!(r.class, ResonanceClass::Resonant);
        let r = resonance_indicator(&Potential::sech2(2.0, 1.0).unwrap(), &g).unwrap();
        assert_eq!(r.class, ResonanceClass::Resonant);
        let r = resonance_indicator(&Potential::sech2(1.0, 1.0).unwrap(), &g).unwrap();
        assert_eq!(r.class, ResonanceClass::Generic);
        assert!(r.probe_transmission < 0.1);
    }
}
