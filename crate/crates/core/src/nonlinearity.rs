//! Pure-power nonlinearity `f(u) = g(|u|²)u` with `g(s) = σ s^{(p-1)/2}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::ComplexField;
use crate::operator::Hamiltonian;

/// Floor for `|u|` in derivatives of `g` that are singular at the origin.
pub const MODULUS_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    p: f64,
    sigma: f64,
}

impl Nonlinearity {
    /// `sigma ∈ {-1, 0, 1}`; zero switches the nonlinearity off.
    pub fn new(p: f64, sigma: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(LabError::InvalidParameter(format!("exponent p must exceed 1, got {p}")));
        }
        if ![-1.0, 0.0, 1.0].contains(&sigma) {
            return Err(LabError::InvalidParameter(format!(
                "sigma must be -1, 0 or 1, got {sigma}"
            )));
        }
        Ok(Nonlinearity { p, sigma })
    }

    pub fn focusing_cubic() -> Self {
        Nonlinearity { p: 2.0, sigma: -1.0 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_linear(&self) -> bool {
        self.sigma == 0.0
    }

    fn half(&self) -> f64 {
        0.5 * (self.p - 1.0)
    }

    pub fn g(&self, s: f64) -> f64 {
        if self.sigma == 0.0 || s <= 0.0 {
            return 0.0;
        }
        self.sigma * s.powf(self.half())
    }

    pub fn g_prime(&self, s: f64) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let s = s.max(MODULUS_FLOOR * MODULUS_FLOOR);
        self.sigma * self.half() * s.powf(self.half() - 1.0)
    }

    pub fn g_second(&self, s: f64) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let s = s.max(MODULUS_FLOOR * MODULUS_FLOOR);
        let a = self.half();
        self.sigma * a * (a - 1.0) * s.powf(a - 2.0)
    }

    /// `G(s) = σ (2/(p+1)) s^{(p+1)/2}`, so `G(0) = 0` and `G' = g`.
    pub fn big_g(&self, s: f64) -> f64 {
        if self.sigma == 0.0 || s <= 0.0 {
            return 0.0;
        }
        self.sigma * 2.0 / (self.p + 1.0) * s.powf(0.5 * (self.p + 1.0))
    }

    /// Constant `C_k` with `|g^{(k)}(s)| ≤ C_k s^{(p-1)/2-k}`; equality for
    /// the pure power.
    pub fn derivative_constant(&self, k: usize) -> f64 {
        let a = self.half();
        (0..k).fold(self.sigma.abs(), |c, j| c * (a - j as f64).abs())
    }

    pub fn f(&self, u: Complex64) -> Complex64 {
        u * self.g(u.norm_sqr())
    }

    /// `Df(u)X = g(|u|²)X + 2g'(|u|²) u Re(ū X)`.
    pub fn df(&self, u: Complex64, x: Complex64) -> Complex64 {
        let m = u.norm();
        if self.sigma == 0.0 || m == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        // 2g'(s)s = σ(p-1)|u|^{p-1}; written this way it stays bounded
        let unit = u / m;
        let radial = (unit.conj() * x).re;
        x * self.g(m * m) + unit * (2.0 * self.g_prime(m * m) * m * m * radial)
    }

    /// `g(q²) + 2g'(q²)q² = σp|q|^{p-1}`, the derivative of `f` along real `q`.
    pub fn real_derivative(&self, q: f64) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        self.sigma * self.p * q.abs().powf(self.p - 1.0)
    }

    pub fn f_field(&self, u: &ComplexField) -> ComplexField {
        u.map(|v| self.f(v))
    }

    pub fn g_field(&self, u: &ComplexField) -> Vec<f64> {
        u.values().iter().map(|v| self.g(v.norm_sqr())).collect()
    }

    pub fn big_g_field(&self, u: &ComplexField) -> Vec<f64> {
        u.values().iter().map(|v| self.big_g(v.norm_sqr())).collect()
    }

    pub fn df_field(&self, u: &ComplexField, x: &ComplexField) -> Result<ComplexField> {
        u.check_grid(x)?;
        let values = u
            .values()
            .iter()
            .zip(x.values())
            .map(|(a, b)| self.df(*a, *b))
            .collect();
        ComplexField::from_values(u.grid(), values)
    }

    /// `f(a + b) - f(a)`.
    pub fn difference(&self, a: &ComplexField, b: &ComplexField) -> Result<ComplexField> {
        a.check_grid(b)?;
        let values = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| self.f(x + y) - self.f(*x))
            .collect();
        ComplexField::from_values(a.grid(), values)
    }

    /// `(𝐄(u), 𝐐(u)) = (½⟨Hu, u⟩ + ½∫G(|u|²), ½‖u‖²)`. The ½ on the
    /// potential term makes `𝐄` invariant for `i u_t = Hu + g(|u|²)u`, since the
    /// gradient of `∫G(|u|²)` under the real pairing is `2g(|u|²)u`.
    pub fn energy_mass(&self, ham: &Hamiltonian, u: &ComplexField) -> Result<(f64, f64)> {
        let hu = ham.apply(u)?;
        let quad = hu.pairing(u);
        let h = u.grid().spacing();
        let pot: f64 = self.big_g_field(u).iter().sum::<f64>() * h;
        Ok((0.5 * (quad + pot), 0.5 * u.norm_sqr()))
    }
}
