//! Complex samples on a grid and the two pairings used throughout.
//!
//! Quadrature is the plain `h Σ` rule on both grid kinds. For Dirichlet grids this
//! is the trapezoid rule with vanishing ghost values beyond `±L`, and it is the
//! weight under which the finite-difference Hamiltonian is symmetric.

use std::ops::{Add, Index, IndexMut, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::Grid;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        ComplexField {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::InvalidParameter(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ComplexField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_real(grid: &Arc<Grid>, values: &[f64]) -> Result<Self> {
        Self::from_values(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Self {
        ComplexField {
            grid: grid.clone(),
            values: grid.points().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn same_grid(&self, other: &ComplexField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn check_grid(&self, other: &ComplexField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(LabError::GridMismatch)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Complex pairing `(u, v) = ∫ u v̄`.
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        debug_assert!(self.same_grid(other));
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        s * self.grid.spacing()
    }

    /// Real pairing `⟨u, v⟩ = Re (u, v)`.
    pub fn pairing(&self, other: &ComplexField) -> f64 {
        debug_assert!(self.same_grid(other));
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum();
        s * self.grid.spacing()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `‖w u‖_{L²}` for a real weight sampled on the grid.
    pub fn weighted_norm(&self, weight: &[f64]) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(weight)
            .map(|(v, w)| w * w * v.norm_sqr())
            .sum();
        (s * self.grid.spacing()).sqrt()
    }

    pub fn scale(&self, c: Complex64) -> ComplexField {
        self.map(|v| v * c)
    }

    pub fn scale_real(&self, c: f64) -> ComplexField {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise product with a real weight.
    pub fn weighted(&self, weight: &[f64]) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(weight).map(|(v, w)| v * w).collect(),
        }
    }

    pub fn conj(&self) -> ComplexField {
        self.map(|v| v.conj())
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &ComplexField) {
        debug_assert!(self.same_grid(other));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    /// Centered first difference; one-sided ghost values follow the boundary kind.
    pub fn derivative(&self) -> ComplexField {
        let n = self.len();
        let h2 = 2.0 * self.grid.spacing();
        let periodic = self.grid.boundary() == crate::grid::Boundary::Periodic;
        let zero = Complex64::new(0.0, 0.0);
        let v = &self.values;
        let values = (0..n)
            .map(|j| {
                let left = if j > 0 {
                    v[j - 1]
                } else if periodic {
                    v[n - 1]
                } else {
                    zero
                };
                let right = if j + 1 < n {
                    v[j + 1]
                } else if periodic {
                    v[0]
                } else {
                    zero
                };
                (right - left) / h2
            })
            .collect();
        ComplexField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// `‖u‖_{H¹}² = ‖u‖² + ‖u'‖²` with the centered difference.
    pub fn h1_norm(&self) -> f64 {
        (self.norm_sqr() + self.derivative().norm_sqr()).sqrt()
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for ComplexField {
    type Output = Complex64;
    fn index(&self, j: usize) -> &Complex64 {
        &self.values[j]
    }
}

impl IndexMut<usize> for ComplexField {
    fn index_mut(&mut self, j: usize) -> &mut Complex64 {
        &mut self.values[j]
    }
}

impl Add for &ComplexField {
    type Output = ComplexField;
    fn add(self, rhs: &ComplexField) -> ComplexField {
        debug_assert!(self.same_grid(rhs));
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexField {
    type Output = ComplexField;
    fn sub(self, rhs: &ComplexField) -> ComplexField {
        debug_assert!(self.same_grid(rhs));
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<Complex64> for &ComplexField {
    type Output = ComplexField;
    fn mul(self, rhs: Complex64) -> ComplexField {
        self.scale(rhs)
    }
}

impl Mul<f64> for &ComplexField {
    type Output = ComplexField;
    fn mul(self, rhs: f64) -> ComplexField {
        self.scale_real(rhs)
    }
}

/// `⟨x⟩ = √(1 + x²)`.
pub fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// Samples of `⟨x⟩^s`.
pub fn japanese_weight(grid: &Grid, s: f64) -> Vec<f64> {
    grid.points().iter().map(|&x| japanese(x).powf(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::dirichlet(10.0, 401).unwrap())
    }

    #[test]
    fn pairings_agree_with_definitions() {
        let g = grid();
        let u = ComplexField::from_fn(&g, |x| Complex64::new((-x * x).exp(), x * (-x * x).exp()));
        let v = u.scale(I);
        // (u, iu) = -i‖u‖², so the real pairing vanishes.
        assert!(u.pairing(&v).abs() < 1e-15);
        assert!((u.inner(&v) + I * u.norm_sqr()).norm() < 1e-14);
    }

    #[test]
    fn gaussian_norm_matches_closed_form() {
        let g = grid();
        let u = ComplexField::from_fn(&g, |x| Complex64::new((-x * x / 2.0).exp(), 0.0));
        let exact = std::f64::consts::PI.sqrt();
        assert!((u.norm_sqr() - exact).abs() < 1e-12);
    }

    #[test]
    fn derivative_of_gaussian() {
        let g = Arc::new(Grid::dirichlet(10.0, 4001).unwrap());
        let u = ComplexField::from_fn(&g, |x| Complex64::new((-x * x).exp(), 0.0));
        let du = u.derivative();
        let err = (0..g.len())
            .map(|j| {
                let x = g.x(j);
                (du[j].re + 2.0 * x * (-x * x).exp()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }
}
