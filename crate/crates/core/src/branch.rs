//! Nonlinear bound states `HQ + g(|Q|²)Q = E(|z|²)Q` bifurcating from `zφ`.
//!
//! Only the real representative `q_r`, `r = |z|`, is solved for; the branch is
//! normalized by `⟨q_r - rφ, φ⟩ = 0` and extended by `Q[z] = (z/|z|) q_{|z|}`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{ComplexField, I};
use crate::linalg::BandLu;
use crate::nonlinearity::Nonlinearity;
use crate::operator::Hamiltonian;
use crate::spectrum::SpectralData;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BranchSettings {
    /// Largest admissible `|z|`.
    pub z_max: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Decay parameter entering the reporting weight `a₀ = min(√λ, κ)/2`.
    pub kappa: f64,
}

impl Default for BranchSettings {
    fn default() -> Self {
        BranchSettings {
            z_max: 0.2,
            tolerance: 1e-10,
            max_iterations: 40,
            kappa: 0.3,
        }
    }
}

/// Solution on the real half-line `z = r ≥ 0`, with `r`-derivatives.
#[derive(Debug, Clone)]
pub struct RealBranchPoint {
    pub r: f64,
    pub q: Vec<f64>,
    pub e: f64,
    pub dq: Vec<f64>,
    pub de: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct BoundStatePoint {
    pub z: Complex64,
    pub q: ComplexField,
    pub e: f64,
    /// `∂Q/∂Re z`.
    pub d1q: ComplexField,
    /// `∂Q/∂Im z`.
    pub d2q: ComplexField,
    pub newton_residual: f64,
    pub iterations: usize,
}

/// One row of the exported branch table.
#[derive(Debug, Clone, Serialize)]
pub struct BranchRow {
    pub r: f64,
    pub e: f64,
    pub residual: f64,
    pub deviation: f64,
    pub d1_deviation: f64,
    pub d2_deviation: f64,
    pub decay_rate: f64,
}

#[derive(Debug, Clone)]
pub struct BranchSolver {
    ham: Hamiltonian,
    spectral: Arc<SpectralData>,
    nl: Nonlinearity,
    settings: BranchSettings,
}

impl BranchSolver {
    pub fn new(
        ham: &Hamiltonian,
        spectral: Arc<SpectralData>,
        nl: Nonlinearity,
        settings: BranchSettings,
    ) -> Result<Self> {
        if **spectral.grid() != **ham.grid() {
            return Err(LabError::GridMismatch);
        }
        if !(settings.z_max > 0.0 && settings.tolerance > 0.0 && settings.kappa > 0.0) {
            return Err(LabError::InvalidParameter(
                "branch radius, tolerance and kappa must be positive".into(),
            ));
        }
        ham.grid().require_dirichlet()?;
        Ok(BranchSolver {
            ham: ham.clone(),
            spectral,
            nl,
            settings,
        })
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.ham
    }

    pub fn spectral(&self) -> &Arc<SpectralData> {
        &self.spectral
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nl
    }

    pub fn settings(&self) -> &BranchSettings {
        &self.settings
    }

    /// `a₀ = min(√λ, κ)/2`.
    pub fn a0(&self) -> f64 {
        self.spectral.branch_weight(self.settings.kappa)
    }

    fn phi(&self) -> Vec<f64> {
        self.spectral.phi.values().iter().map(|v| v.re).collect()
    }

    fn residual_vec(&self, q: &[f64], e: f64) -> Vec<f64> {
        let n = q.len();
        let qc: Vec<Complex64> = q.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut hq = vec![Complex64::new(0.0, 0.0); n];
        self.ham.apply_into(&qc, &mut hq);
        (0..n)
            .map(|i| hq[i].re + self.nl.g(q[i] * q[i]) * q[i] - e * q[i])
            .collect()
    }

    fn l2(&self, v: &[f64]) -> f64 {
        (v.iter().map(|x| x * x).sum::<f64>() * self.ham.grid().spacing()).sqrt()
    }

    /// Factor `H + σp|q|^{p-1} - E` and return solves of `A a = rhs1`, `A b = q`.
    fn linear_solves(&self, q: &[f64], e: f64, rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let band = self.ham.band()?;
        let m = band.bandwidth();
        let n = q.len();
        let lu = BandLu::factor(n, m, m, |i, j| {
            let mut a = band.entry(i, j);
            if i == j {
                a += self.nl.real_derivative(q[i]) - e;
            }
            Complex64::new(a, 0.0)
        })?;
        let to_c = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
        let a = lu.solve(&to_c(rhs));
        let b = lu.solve(&to_c(q));
        Ok((a.iter().map(|z| z.re).collect(), b.iter().map(|z| z.re).collect()))
    }

    fn newton(&self, r: f64, mut q: Vec<f64>, mut e: f64) -> Result<RealBranchPoint> {
        let h = self.ham.grid().spacing();
        let phi = self.phi();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * h;
        let mut residual = f64::INFINITY;
        for it in 0..=self.settings.max_iterations {
            let f = self.residual_vec(&q, e);
            residual = self.l2(&f);
            let c = dot(&phi, &q) - r;
            if !residual.is_finite() {
                break;
            }
            if residual <= self.settings.tolerance && c.abs() <= 1e-13 * r.max(1e-300) {
                let (_, b) = self.linear_solves(&q, e, &f)?;
                let de = 1.0 / dot(&phi, &b);
                let dq: Vec<f64> = b.iter().map(|v| v * de).collect();
                return Ok(RealBranchPoint {
                    r,
                    q,
                    e,
                    dq,
                    de,
                    residual,
                    iterations: it,
                });
            }
            if it == self.settings.max_iterations {
                break;
            }
            let minus_f: Vec<f64> = f.iter().map(|v| -v).collect();
            let (a, b) = self.linear_solves(&q, e, &minus_f)?;
            let de = (-c - dot(&phi, &a)) / dot(&phi, &b);
            for i in 0..q.len() {
                q[i] += a[i] + de * b[i];
            }
            e += de;
        }
        Err(LabError::NewtonDivergence {
            iterations: self.settings.max_iterations,
            residual,
        })
    }

    /// Real branch point at radius `r ≥ 0`, warm-started from `warm` when given.
    pub fn solve_radius(&self, r: f64, warm: Option<&RealBranchPoint>) -> Result<RealBranchPoint> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(LabError::InvalidParameter(format!("radius must be nonnegative, got {r}")));
        }
        if r > self.settings.z_max {
            return Err(LabError::BranchRadiusExceeded {
                modulus: r,
                radius: self.settings.z_max,
            });
        }
        let phi = self.phi();
        let lambda = self.spectral.lambda;
        if r == 0.0 || self.nl.is_linear() {
            let f = self.residual_vec(&phi, -lambda);
            return Ok(RealBranchPoint {
                r,
                q: phi.iter().map(|v| v * r).collect(),
                e: -lambda,
                dq: phi,
                de: 0.0,
                residual: self.l2(&f) * r,
                iterations: 0,
            });
        }
        let guess = |w: Option<&RealBranchPoint>| match w {
            Some(w) if w.r > 0.0 => (w.q.iter().map(|v| v * r / w.r).collect(), w.e),
            _ => (phi.iter().map(|v| v * r).collect::<Vec<_>>(), -lambda),
        };
        let (q0, e0) = guess(warm);
        match self.newton(r, q0, e0) {
            Ok(p) => Ok(p),
            Err(LabError::NewtonDivergence { .. }) => {
                // continuation from the linear branch
                let steps = 8;
                let mut prev: Option<RealBranchPoint> = None;
                for k in 1..=steps {
                    let rk = r * k as f64 / steps as f64;
                    let (q0, e0) = match &prev {
                        Some(p) => (p.q.iter().map(|v| v * rk / p.r).collect(), p.e),
                        None => (phi.iter().map(|v| v * rk).collect(), -lambda),
                    };
                    prev = Some(self.newton(rk, q0, e0)?);
                }
                Ok(prev.expect("at least one continuation step"))
            }
            Err(e) => Err(e),
        }
    }

    /// `Q[z]`, `E(|z|²)` and `D₁Q`, `D₂Q` at `z`.
    pub fn solve(&self, z: Complex64) -> Result<BoundStatePoint> {
        let real = self.solve_radius(z.norm(), None)?;
        self.point_from_real(z, &real)
    }

    /// Rotate a real branch point to `z`; `|z|` must equal `real.r`.
    pub fn point_from_real(&self, z: Complex64, real: &RealBranchPoint) -> Result<BoundStatePoint> {
        let grid = self.ham.grid();
        let r = z.norm();
        if (r - real.r).abs() > 1e-15 * r.max(1.0) {
            return Err(LabError::InvalidParameter(format!(
                "branch point has radius {} but |z| = {r}",
                real.r
            )));
        }
        let phase = if r > 0.0 { z / r } else { Complex64::new(1.0, 0.0) };
        let (c, s) = (phase.re, phase.im);
        let q = ComplexField::from_values(grid, real.q.iter().map(|&v| phase * v).collect())?;
        let (d1, d2): (Vec<Complex64>, Vec<Complex64>) = if r > 0.0 {
            real.q
                .iter()
                .zip(&real.dq)
                .map(|(&qv, &dqv)| {
                    let over_r = qv / r;
                    (
                        phase * (c * dqv - I * s * over_r),
                        phase * (s * dqv + I * c * over_r),
                    )
                })
                .unzip()
        } else {
            real.dq
                .iter()
                .map(|&v| (Complex64::new(v, 0.0), I * v))
                .unzip()
        };
        Ok(BoundStatePoint {
            z,
            q,
            e: real.e,
            d1q: ComplexField::from_values(grid, d1)?,
            d2q: ComplexField::from_values(grid, d2)?,
            newton_residual: real.residual,
            iterations: real.iterations,
        })
    }

    /// `‖u‖_{H¹_{a₀}}` with weight `e^{a₀|x|}`.
    pub fn weighted_h1(&self, u: &ComplexField) -> f64 {
        let a0 = self.a0();
        let w: Vec<f64> = u.grid().points().iter().map(|x| (a0 * x.abs()).exp()).collect();
        let d = u.derivative();
        (u.weighted_norm(&w).powi(2) + d.weighted_norm(&w).powi(2)).sqrt()
    }

    /// Branch table over increasing radii with continuation.
    pub fn table(&self, radii: &[f64]) -> Result<Vec<BranchRow>> {
        let mut order: Vec<usize> = (0..radii.len()).collect();
        order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
        let mut rows: Vec<Option<BranchRow>> = vec![None; radii.len()];
        let mut prev: Option<RealBranchPoint> = None;
        let phi = &self.spectral.phi;
        for &i in &order {
            let real = self.solve_radius(radii[i], prev.as_ref())?;
            let pt = self.point_from_real(Complex64::new(real.r, 0.0), &real)?;
            let lin = phi.scale_real(real.r);
            rows[i] = Some(BranchRow {
                r: real.r,
                e: real.e,
                residual: real.residual,
                deviation: self.weighted_h1(&(&pt.q - &lin)),
                d1_deviation: self.weighted_h1(&(&pt.d1q - phi)),
                d2_deviation: self.weighted_h1(&(&pt.d2q - &phi.scale(I))),
                decay_rate: fit_decay_rate(&pt.q),
            });
            prev = Some(real);
        }
        Ok(rows.into_iter().map(|r| r.expect("every radius solved")).collect())
    }
}

/// Exponential decay rate of `|u|` fitted by least squares on `L/4 ≤ |x| ≤ L/2`,
/// averaged over both tails.
pub fn fit_decay_rate(u: &ComplexField) -> f64 {
    let grid = u.grid();
    let l = grid.half_width();
    let mut rates = Vec::new();
    for side in [1.0, -1.0] {
        let (xs, ys): (Vec<f64>, Vec<f64>) = grid
            .points()
            .iter()
            .zip(u.values())
            .filter(|(x, v)| {
                let s = side * **x;
                s >= 0.25 * l && s <= 0.5 * l && v.norm() > 0.0
            })
            .map(|(x, v)| (x.abs(), v.norm().ln()))
            .unzip();
        if xs.len() >= 2 {
            rates.push(-loglog_slope_raw(&xs, &ys));
        }
    }
    if rates.is_empty() {
        f64::NAN
    } else {
        rates.iter().sum::<f64>() / rates.len() as f64
    }
}

fn loglog_slope_raw(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    loglog_slope_raw(&lx, &ly)
}
