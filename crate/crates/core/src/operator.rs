//! The discrete Schrödinger operator `H = -D² + V`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::ComplexField;
use crate::grid::{Boundary, Grid};
use crate::linalg::SymBand;
use crate::potential::Potential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    #[default]
    Second,
    Fourth,
}

impl Stencil {
    /// Coefficients of `-h² D²`: `c[0] u_j + Σ_k c[k] (u_{j-k} + u_{j+k})`.
    pub fn coefficients(self) -> &'static [f64] {
        match self {
            Stencil::Second => &[2.0, -1.0],
            Stencil::Fourth => &[2.5, -4.0 / 3.0, 1.0 / 12.0],
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Stencil::Second => 2,
            Stencil::Fourth => 4,
        }
    }

    pub fn half_width(self) -> usize {
        self.coefficients().len() - 1
    }
}

#[derive(Debug, Clone)]
pub struct Hamiltonian {
    grid: Arc<Grid>,
    potential: Potential,
    v: Vec<f64>,
    stencil: Stencil,
}

impl Hamiltonian {
    pub fn new(grid: &Arc<Grid>, potential: &Potential, stencil: Stencil) -> Self {
        Hamiltonian {
            grid: grid.clone(),
            potential: potential.clone(),
            v: potential.sample(grid),
            stencil,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn potential_samples(&self) -> &[f64] {
        &self.v
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn apply(&self, psi: &ComplexField) -> Result<ComplexField> {
        if **psi.grid() != *self.grid {
            return Err(LabError::GridMismatch);
        }
        let mut out = ComplexField::zeros(&self.grid);
        self.apply_into(psi.values(), out.values_mut());
        Ok(out)
    }

    /// `out = H u` on raw samples.
    pub fn apply_into(&self, u: &[Complex64], out: &mut [Complex64]) {
        let n = u.len();
        let c = self.stencil.coefficients();
        let m = c.len() - 1;
        let inv_h2 = 1.0 / (self.grid.spacing() * self.grid.spacing());
        let periodic = self.grid.boundary() == Boundary::Periodic;
        let zero = Complex64::new(0.0, 0.0);
        let at = |j: isize| -> Complex64 {
            if j >= 0 && (j as usize) < n {
                u[j as usize]
            } else if periodic {
                u[j.rem_euclid(n as isize) as usize]
            } else {
                zero
            }
        };
        // interior without bounds checks
        for j in m..n.saturating_sub(m) {
            let mut s = u[j] * c[0];
            for (k, &ck) in c.iter().enumerate().skip(1) {
                s += (u[j - k] + u[j + k]) * ck;
            }
            out[j] = s * inv_h2 + u[j] * self.v[j];
        }
        let edges = (0..m.min(n)).chain(n.saturating_sub(m).max(m)..n);
        for j in edges {
            let mut s = u[j] * c[0];
            for (k, &ck) in c.iter().enumerate().skip(1) {
                let k = k as isize;
                s += (at(j as isize - k) + at(j as isize + k)) * ck;
            }
            out[j] = s * inv_h2 + u[j] * self.v[j];
        }
    }

    /// Symmetric band form; only meaningful on Dirichlet grids.
    pub fn band(&self) -> Result<SymBand> {
        self.grid.require_dirichlet()?;
        let n = self.grid.len();
        let c = self.stencil.coefficients();
        let inv_h2 = 1.0 / (self.grid.spacing() * self.grid.spacing());
        let mut bands = vec![self.v.iter().map(|v| v + c[0] * inv_h2).collect::<Vec<_>>()];
        for (k, &ck) in c.iter().enumerate().skip(1) {
            bands.push(vec![ck * inv_h2; n - k]);
        }
        Ok(SymBand::new(bands))
    }

    /// Interval containing the spectrum of the discrete operator.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let c = self.stencil.coefficients();
        let inv_h2 = 1.0 / (self.grid.spacing() * self.grid.spacing());
        let radius: f64 = c.iter().skip(1).map(|v| 2.0 * v.abs()).sum::<f64>() * inv_h2;
        let vmin = self.v.iter().copied().fold(f64::INFINITY, f64::min);
        let vmax = self.v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (vmin + (c[0] * inv_h2 - radius).min(0.0), vmax + c[0] * inv_h2 + radius)
    }

    /// `⟨Hu, u⟩` under the real pairing.
    pub fn quadratic_form(&self, u: &ComplexField) -> Result<f64> {
        Ok(self.apply(u)?.pairing(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::I;

    #[test]
    fn fourier_mode_on_periodic_grid() {
        let g = Arc::new(Grid::periodic(std::f64::consts::PI * 8.0, 2048).unwrap());
        let k = 0.5;
        let psi = ComplexField::from_fn(&g, |x| (I * k * x).exp());
        for st in [Stencil::Second, Stencil::Fourth] {
            let h = Hamiltonian::new(&g, &Potential::zero(), st);
            let hpsi = h.apply(&psi).unwrap();
            let err = (0..g.len())
                .map(|j| (hpsi[j] - psi[j] * k * k).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-5, "{st:?}: {err}");
        }
    }

    #[test]
    fn sech_is_an_eigenfunction_of_reflectionless_well() {
        let g = Arc::new(Grid::dirichlet(20.0, 8001).unwrap());
        let v = Potential::sech2(2.0, 1.0).unwrap();
        let psi = ComplexField::from_fn(&g, |x| Complex64::new(1.0 / x.cosh(), 0.0));
        let h = Hamiltonian::new(&g, &v, Stencil::Fourth);
        let hpsi = h.apply(&psi).unwrap();
        let err = (0..g.len())
            .filter(|&j| g.x(j).abs() < 15.0)
            .map(|j| (hpsi[j] + psi[j]).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn band_matches_apply() {
        let g = Arc::new(Grid::dirichlet(5.0, 64).unwrap());
        let v = Potential::sech2(1.0, 1.0).unwrap();
        for st in [Stencil::Second, Stencil::Fourth] {
            let h = Hamiltonian::new(&g, &v, st);
            let x: Vec<f64> = g.points().iter().map(|x| (0.7 * x).sin() + 0.1 * x).collect();
            let psi = ComplexField::from_real(&g, &x).unwrap();
            let a = h.apply(&psi).unwrap();
            let b = h.band().unwrap().matvec(&x);
            for j in 0..g.len() {
                assert!((a[j].re - b[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_maps_to_zero_and_mismatch_is_rejected() {
        let g = Arc::new(Grid::dirichlet(5.0, 64).unwrap());
        let h = Hamiltonian::new(&g, &Potential::sech2(1.0, 1.0).unwrap(), Stencil::Second);
        assert_eq!(h.apply(&ComplexField::zeros(&g)).unwrap().sup_norm(), 0.0);
        let other = Arc::new(Grid::dirichlet(5.0, 65).unwrap());
        assert!(matches!(
            h.apply(&ComplexField::zeros(&other)),
            Err(LabError::GridMismatch)
        ));
    }
}
