//! Resolvent kernels `R(λ ± ia)(x, y)` assembled from Jost data.
//!
//! For `x < y` the kernel is `c f₋(x,k) f₊(y,k)`, mirrored for `x > y`, with
//! `k = √(λ + ia)`, `Im k ≥ 0`. The textbook prefactor `T(k)/(2ik) = 1/W` with
//! `W = [f₊, f₋] = f₊'f₋ - f₊f₋'` yields `(H - k²) R = -δ`; the kernel is therefore
//! stored with `c = SIGN_CONVENTION / W`, `SIGN_CONVENTION = -1`, so that
//! `(H - k²) R = +δ`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::jost::{resonance_indicator, JostPair, ResonanceClass};
use crate::error::{LabError, Result};
use crate::field::{japanese_weight, ComplexField};
use crate::grid::Grid;
use crate::operator::Hamiltonian;
use crate::potential::Potential;

/// Global factor applied to `T(k)/(2ik)`.
pub const SIGN_CONVENTION: f64 = -1.0;

/// Below this `λ` (with `a = 0`) a resonant potential has no resolvent.
pub const LAMBDA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventSign {
    /// `R(λ + i0)`, outgoing.
    Plus,
    /// `R(λ - i0)`, the elementwise conjugate.
    Minus,
}

#[derive(Debug, Clone)]
pub struct ResolventKernel {
    lambda: f64,
    absorption: f64,
    sign: ResolventSign,
    k: Complex64,
    grid: Arc<Grid>,
    f_minus: Vec<Complex64>,
    f_plus: Vec<Complex64>,
    c: Complex64,
}

impl ResolventKernel {
    /// Boundary value `R^±(λ)` for `λ ≥ 0`.
    pub fn new(v: &Potential, grid: &Arc<Grid>, lambda: f64, sign: ResolventSign) -> Result<Self> {
        Self::with_absorption(v, grid, lambda, 0.0, sign)
    }

    /// `R(λ ± ia)` for `a ≥ 0`.
    pub fn with_absorption(
        v: &Potential,
        grid: &Arc<Grid>,
        lambda: f64,
        a: f64,
        sign: ResolventSign,
    ) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "spectral parameter must satisfy λ ≥ 0, got {lambda}"
            )));
        }
        if !(a.is_finite() && a >= 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "absorption must satisfy a ≥ 0, got {a}"
            )));
        }
        if a == 0.0 && lambda < LAMBDA_FLOOR {
            let report = resonance_indicator(v, grid)?;
            if report.class == ResonanceClass::Resonant {
                return Err(LabError::ResonantPotential {
                    score: report.score,
                });
            }
        }
        let k = Complex64::new(lambda, a).sqrt();
        let pair = JostPair::compute(v, grid, k)?;
        let w = pair.wronskian();
        if w.norm() == 0.0 {
            return Err(LabError::DegenerateWronskian {
                k: format!("{k}"),
                modulus: 0.0,
            });
        }
        let n = grid.len();
        let f_minus = (0..n).map(|j| pair.minus.f(j)).collect();
        let f_plus = (0..n).map(|j| pair.plus.f(j)).collect();
        Ok(ResolventKernel {
            lambda,
            absorption: a,
            sign,
            k,
            grid: grid.clone(),
            f_minus,
            f_plus,
            c: SIGN_CONVENTION / w,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn absorption(&self) -> f64 {
        self.absorption
    }

    pub fn sign(&self) -> ResolventSign {
        self.sign
    }

    /// `k = √(λ + ia)` of the `+` kernel.
    pub fn wavenumber(&self) -> Complex64 {
        self.k
    }

    pub fn sign_convention(&self) -> f64 {
        SIGN_CONVENTION
    }

    /// Spectral parameter `z` with `(H - z) R = δ`.
    pub fn spectral_parameter(&self) -> Complex64 {
        let z = Complex64::new(self.lambda, self.absorption);
        match self.sign {
            ResolventSign::Plus => z,
            ResolventSign::Minus => z.conj(),
        }
    }

    fn orient(&self, v: Complex64) -> Complex64 {
        match self.sign {
            ResolventSign::Plus => v,
            ResolventSign::Minus => v.conj(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.orient(self.c * self.f_minus[lo] * self.f_plus[hi])
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.grid.len()).map(|i| self.entry(i, j)).collect()
    }

    pub fn dense(&self) -> Vec<Vec<Complex64>> {
        (0..self.grid.len()).map(|i| self.column(i)).collect()
    }

    /// `(Ru)(x_i) = h Σ_j R(x_i, x_j) u_j` in `O(n)`.
    pub fn apply(&self, u: &ComplexField) -> Result<ComplexField> {
        if **u.grid() != *self.grid {
            return Err(LabError::GridMismatch);
        }
        let n = self.grid.len();
        let h = self.grid.spacing();
        let uu: Vec<Complex64> = match self.sign {
            ResolventSign::Plus => u.values().to_vec(),
            ResolventSign::Minus => u.values().iter().map(|v| v.conj()).collect(),
        };
        // left[i] = Σ_{j ≤ i} f₋_j u_j, right[i] = Σ_{j > i} f₊_j u_j
        let mut left = vec![Complex64::new(0.0, 0.0); n];
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            acc += self.f_minus[i] * uu[i];
            left[i] = acc;
        }
        let mut right = vec![Complex64::new(0.0, 0.0); n];
        let mut acc = Complex64::new(0.0, 0.0);
        for i in (0..n).rev() {
            right[i] = acc;
            acc += self.f_plus[i] * uu[i];
        }
        let vals = (0..n)
            .map(|i| {
                let r = self.c * h * (self.f_plus[i] * left[i] + self.f_minus[i] * right[i]);
                self.orient(r)
            })
            .collect();
        ComplexField::from_values(&self.grid, vals)
    }

    /// `max_i |h ((H - z) R e_j)_i - δ_ij|` over rows at distance ≥ 3 from the edges.
    pub fn column_defect(&self, ham: &Hamiltonian, j: usize) -> Result<f64> {
        if **ham.grid() != *self.grid {
            return Err(LabError::GridMismatch);
        }
        let n = self.grid.len();
        let col = self.column(j);
        let mut hcol = vec![Complex64::new(0.0, 0.0); n];
        ham.apply_into(&col, &mut hcol);
        let z = self.spectral_parameter();
        let h = self.grid.spacing();
        let mut worst: f64 = 0.0;
        for i in 3..n - 3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            let r = (hcol[i] - z * col[i]) * h - delta;
            worst = worst.max(r.norm());
        }
        Ok(worst)
    }

    /// Hilbert–Schmidt norm of `⟨x⟩^{-s} R(x, y) ⟨y⟩^{-τ}` on the grid, in `O(n)`.
    pub fn weighted_hs_norm(&self, s: f64, tau: f64) -> f64 {
        let n = self.grid.len();
        let h = self.grid.spacing();
        let wx = japanese_weight(&self.grid, -s);
        let wy = japanese_weight(&self.grid, -tau);
        let fm: Vec<f64> = self.f_minus.iter().map(|v| v.norm_sqr()).collect();
        let fp: Vec<f64> = self.f_plus.iter().map(|v| v.norm_sqr()).collect();
        // i ≥ j: |f₊(x_i)|² |f₋(y_j)|²;  i < j: |f₋(x_i)|² |f₊(y_j)|²
        let mut total = 0.0;
        let mut lower = 0.0;
        for i in 0..n {
            lower += fm[i] * wy[i] * wy[i];
            total += wx[i] * wx[i] * fp[i] * lower;
        }
        let mut upper = 0.0;
        for i in (0..n).rev() {
            total += wx[i] * wx[i] * fm[i] * upper;
            upper += fp[i] * wy[i] * wy[i];
        }
        self.c.norm() * h * total.sqrt()
    }
}

/// `‖⟨x⟩^{-s} R(λ + ia) ⟨y⟩^{-τ}‖_{HS}` for `s > 3/2`, `τ > 1/2`.
pub fn limiting_absorption_norm(
    v: &Potential,
    grid: &Arc<Grid>,
    lambda: f64,
    a: f64,
    s: f64,
    tau: f64,
) -> Result<f64> {
    if !(s > 1.5) || !(tau > 0.5) {
        return Err(LabError::InvalidParameter(format!(
            "weights need s > 3/2 and τ > 1/2, got s = {s}, τ = {tau}"
        )));
    }
    let kernel = ResolventKernel::with_absorption(v, grid, lambda, a, ResolventSign::Plus)?;
    Ok(kernel.weighted_hs_norm(s, tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Stencil;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::dirichlet(40.0, n).unwrap())
    }

    #[test]
    fn free_kernel_has_modulus_one_half() {
        let g = grid(513);
        let r = ResolventKernel::new(&Potential::zero(), &g, 1.0, ResolventSign::Plus).unwrap();
        for (i, j) in [(0, 0), (3, 400), (256, 100), (512, 0)] {
            assert!((r.entry(i, j).norm() - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn column_test_reproduces_delta() {
        let g = grid(2049);
        let v = Potential::sech2(1.0, 1.0).unwrap();
        let ham = Hamiltonian::new(&g, &v, Stencil::Second);
        let r = ResolventKernel::new(&v, &g, 0.5, ResolventSign::Plus).unwrap();
        let h2 = g.spacing() * g.spacing();
        for j in [400, 1000, 1024, 1500] {
            let d = r.column_defect(&ham, j).unwrap();
            assert!(d < h2, "column {j}: {d} vs {h2}");
        }
    }

    #[test]
    fn minus_is_conjugate_and_symmetric() {
        let g = grid(257);
        let v = Potential::sech2(1.0, 1.0).unwrap();
        let p = ResolventKernel::new(&v, &g, 0.25, ResolventSign::Plus).unwrap();
        let m = ResolventKernel::new(&v, &g, 0.25, ResolventSign::Minus).unwrap();
        for i in (0..257).step_by(17) {
            for j in (0..257).step_by(13) {
                assert_eq!(m.entry(i, j), p.entry(i, j).conj());
                assert_eq!(p.entry(i, j), p.entry(j, i));
            }
        }
    }

    #[test]
    fn apply_matches_dense_sum() {
        let g = grid(129);
        let v = Potential::sech2(1.0, 1.0).unwrap();
        let u = ComplexField::from_fn(&g, |x| Complex64::new((-x * x / 8.0).exp(), x.sin() * 0.1));
        for sign in [ResolventSign::Plus, ResolventSign::Minus] {
            let r = ResolventKernel::with_absorption(&v, &g, 1.0, 0.05, sign).unwrap();
            let fast = r.apply(&u).unwrap();
            let h = g.spacing();
            for i in 0..129 {
                let slow: Complex64 = (0..129).map(|j| r.entry(i, j) * u[j] * h).sum();
                assert!((slow - fast[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hs_norm_matches_dense_sum() {
        let g = grid(129);
        let v = Potential::sech2(1.0, 1.0).unwrap();
        let r = ResolventKernel::new(&v, &g, 1.0, ResolventSign::Plus).unwrap();
        let h = g.spacing();
        let wx = japanese_weight(&g, -2.0);
        let wy = japanese_weight(&g, -0.6);
        let mut s = 0.0;
        for i in 0..129 {
            for j in 0..129 {
                s += (wx[i] * r.entry(i, j).norm() * wy[j]).powi(2);
            }
        }
        let dense = h * s.sqrt();
        assert!((dense - r.weighted_hs_norm(2.0, 0.6)).abs() < 1e-12 * dense);
    }

    #[test]
    fn resonant_potential_at_zero_energy_is_rejected() {
        let g = grid(513);
        let r = ResolventKernel::new(&Potential::zero(), &g, 0.0, ResolventSign::Plus);
        assert!(matches!(r, Err(LabError::ResonantPotential { .. })));
        assert!(limiting_absorption_norm(&Potential::zero(), &g, 1.0, 0.0, 1.0, 2.0).is_err());
    }
}
