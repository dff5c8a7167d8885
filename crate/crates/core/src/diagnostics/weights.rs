//! Cutoffs, weights and the norms `Σ_A`, `Σ̃`, `L^{2,s}` and `e^{-a⟨x⟩}H¹`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{japanese, ComplexField};
use crate::grid::Grid;
use crate::special::gauss_legendre;

/// `q(s) = 1 - s³(10 - 15s + 6s²)`, decreasing from 1 to 0 on `[0, 1]`.
fn fall(s: f64) -> f64 {
    1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

fn fall_prime(s: f64) -> f64 {
    -30.0 * s * s * (1.0 - s) * (1.0 - s)
}

/// Even cutoff: 1 on `[-1, 1]`, 0 outside `[-2, 2]`.
pub fn chi(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        fall(a - 1.0)
    }
}

pub fn chi_prime(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 || a >= 2.0 {
        0.0
    } else {
        fall_prime(a - 1.0) * x.signum()
    }
}

/// `ζ_A(x) = exp(-(|x|/A)(1 - χ(x)))`.
pub fn zeta(a_scale: f64, x: f64) -> f64 {
    (-(x.abs() / a_scale) * (1.0 - chi(x))).exp()
}

/// `φ_A(x) = ∫₀ˣ ζ_A²`: exact on `[-1, 1]`, Gauss–Legendre on the
/// polynomial stretch, closed form beyond 2.
pub fn phi_a(a_scale: f64, x: f64) -> f64 {
    let ax = x.abs();
    let inner = |to: f64| -> f64 {
        let (nodes, weights) = gauss_legendre(24, 1.0, to);
        nodes
            .iter()
            .zip(&weights)
            .map(|(s, w)| w * zeta(a_scale, *s).powi(2))
            .sum::<f64>()
    };
    let value = if ax <= 1.0 {
        ax
    } else if ax <= 2.0 {
        1.0 + inner(ax)
    } else {
        let at2 = 1.0 + inner(2.0);
        at2 + 0.5 * a_scale * ((-4.0 / a_scale).exp() - (-2.0 * ax / a_scale).exp())
    };
    value.copysign(x)
}

/// `e^{-a⟨x⟩}` samples.
pub fn exp_weight(grid: &Grid, a: f64) -> Vec<f64> {
    grid.points().iter().map(|&x| (-a * japanese(x)).exp()).collect()
}

/// `‖e^{-a⟨x⟩}η‖_{H¹}` with `(wη)' = w'η + wη'`, `w'` exact and `η'` by the
/// centered difference.
pub fn exp_weighted_h1_norm(eta: &ComplexField, a: f64) -> f64 {
    let grid = eta.grid();
    let w = exp_weight(grid, a);
    let d = eta.derivative();
    let h = grid.spacing();
    let mut s = 0.0;
    for (j, &x) in grid.points().iter().enumerate() {
        let wp = -a * x / japanese(x) * w[j];
        let v = eta[j] * w[j];
        let dv = eta[j] * wp + d[j] * w[j];
        s += v.norm_sqr() + dv.norm_sqr();
    }
    (s * h).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightParams {
    /// Virial scale `A`.
    #[serde(rename = "A")]
    pub a_virial: f64,
    /// Cutoff scale `B`.
    #[serde(rename = "B")]
    pub b_cutoff: f64,
    pub kappa: f64,
    /// Observation weight `e^{-a⟨x⟩}`.
    pub a: f64,
    pub s: f64,
    pub tau: f64,
}

impl Default for WeightParams {
    fn default() -> Self {
        WeightParams {
            a_virial: 64.0,
            b_cutoff: 4.0,
            kappa: 0.3,
            a: 0.2,
            s: 2.0,
            tau: 0.6,
        }
    }
}

impl WeightParams {
    /// Defaults with `A = B³`.
    pub fn with_b(b: f64) -> Self {
        WeightParams {
            a_virial: b * b * b,
            b_cutoff: b,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeightFamily {
    pub params: WeightParams,
    grid: Arc<Grid>,
    pub chi: Vec<f64>,
    /// `χ(x/B)`.
    pub chi_b: Vec<f64>,
    pub zeta_a: Vec<f64>,
    pub phi_a: Vec<f64>,
    /// `sech(2x/A)`.
    pub sech_a: Vec<f64>,
    /// `sech(κx)`.
    pub sech_kappa: Vec<f64>,
    pub exp_a: Vec<f64>,
}

impl WeightFamily {
    pub fn build(params: WeightParams, grid: &Arc<Grid>) -> Result<Self> {
        let WeightParams {
            a_virial,
            b_cutoff,
            kappa,
            a,
            ..
        } = params;
        let bad = |m: String| Err(LabError::InvalidParameter(m));
        if !(a_virial >= 4.0) {
            return bad(format!("A must be at least 4, got {a_virial}"));
        }
        if !(b_cutoff >= 2.0) {
            return bad(format!("B must be at least 2, got {b_cutoff}"));
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return bad(format!("kappa must lie in (0, 1), got {kappa}"));
        }
        if !(a > 0.0 && a.is_finite()) {
            return bad(format!("a must be positive, got {a}"));
        }
        let xs = grid.points();
        let map = |f: &dyn Fn(f64) -> f64| -> Vec<f64> { xs.iter().map(|&x| f(x)).collect() };
        Ok(WeightFamily {
            params,
            grid: grid.clone(),
            chi: map(&chi),
            chi_b: map(&|x| chi(x / b_cutoff)),
            zeta_a: map(&|x| zeta(a_virial, x)),
            phi_a: map(&|x| phi_a(a_virial, x)),
            sech_a: map(&|x| 1.0 / (2.0 * x / a_virial).cosh()),
            sech_kappa: map(&|x| 1.0 / (kappa * x).cosh()),
            exp_a: exp_weight(grid, a),
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `‖sech(2x/A)η'‖ + A⁻¹‖sech(2x/A)η‖`.
    pub fn sigma_a(&self, eta: &ComplexField) -> f64 {
        eta.derivative().weighted_norm(&self.sech_a) + eta.weighted_norm(&self.sech_a) / self.params.a_virial
    }

    /// `‖sech(κx)η‖`.
    pub fn sigma_tilde(&self, eta: &ComplexField) -> f64 {
        eta.weighted_norm(&self.sech_kappa)
    }

    /// `‖⟨x⟩^s η‖`; negative `s` gives the dual space.
    pub fn l2s(&self, eta: &ComplexField, s: f64) -> f64 {
        let w: Vec<f64> = self.grid.points().iter().map(|&x| japanese(x).powf(s)).collect();
        eta.weighted_norm(&w)
    }

    pub fn exp_h1(&self, eta: &ComplexField) -> f64 {
        exp_weighted_h1_norm(eta, self.params.a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormSuite {
    pub sigma_a: f64,
    pub sigma_tilde: f64,
    pub l2s: f64,
    pub exp_h1: f64,
    pub virial: f64,
}

pub fn norm_suite(eta: &ComplexField, wf: &WeightFamily, s: f64) -> Result<NormSuite> {
    if **eta.grid() != **wf.grid() {
        return Err(LabError::GridMismatch);
    }
    Ok(NormSuite {
        sigma_a: wf.sigma_a(eta),
        sigma_tilde: wf.sigma_tilde(eta),
        l2s: wf.l2s(eta, s),
        exp_h1: wf.exp_h1(eta),
        virial: super::virial::virial_functional(eta, wf),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::I;
    use num_complex::Complex64;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::dirichlet(40.0, n).unwrap())
    }

    #[test]
    fn chi_shape() {
        let g = grid(4001);
        let wf = WeightFamily::build(WeightParams::default(), &g).unwrap();
        for (j, &x) in g.points().iter().enumerate() {
            let c = wf.chi[j];
            assert!((0.0..=1.0).contains(&c));
            assert!(x * chi_prime(x) <= 0.0);
            assert_eq!(c, chi(-x));
            if x.abs() <= 1.0 {
                assert_eq!(c, 1.0);
            }
            if x.abs() >= 2.0 {
                assert_eq!(c, 0.0);
            }
        }
    }

    #[test]
    fn zeta_and_phi_identities() {
        let a = 64.0;
        assert_eq!(zeta(a, 0.0), 1.0);
        for x in [2.0, 3.5, 10.0, -17.0] {
            assert!((zeta(a, x) - (-x.abs() / a).exp()).abs() < 1e-15);
        }
        assert_eq!(phi_a(a, 0.5), 0.5);
        for x in [0.3, 1.4, 1.99, 2.5, 30.0] {
            assert!((phi_a(a, -x) + phi_a(a, x)).abs() < 1e-14);
            let e = 1e-5;
            let fd = (phi_a(a, x + e) - phi_a(a, x - e)) / (2.0 * e);
            assert!((fd - zeta(a, x).powi(2)).abs() < 1e-8, "{x}");
        }
        let xs: Vec<f64> = (0..200).map(|i| -20.0 + 0.2 * i as f64).collect();
        for w in xs.windows(2) {
            assert!(phi_a(a, w[1]) > phi_a(a, w[0]));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = grid(101);
        for p in [
            WeightParams { a_virial: 3.0, ..Default::default() },
            WeightParams { b_cutoff: 1.0, ..Default::default() },
            WeightParams { kappa: 1.0, ..Default::default() },
            WeightParams { a: 0.0, ..Default::default() },
        ] {
            assert!(WeightFamily::build(p, &g).is_err());
        }
    }

    #[test]
    fn norms_vanish_on_zero_and_scale() {
        let g = grid(801);
        let wf = WeightFamily::build(WeightParams::default(), &g).unwrap();
        let zero = ComplexField::zeros(&g);
        let n0 = norm_suite(&zero, &wf, 2.0).unwrap();
        assert_eq!(n0.sigma_a + n0.sigma_tilde + n0.l2s + n0.exp_h1 + n0.virial.abs(), 0.0);
        let eta = ComplexField::from_fn(&g, |x| Complex64::new((-x * x / 8.0).exp(), 0.3 * x * (-x * x / 4.0).exp()) * (I * x).exp());
        let n1 = norm_suite(&eta, &wf, 2.0).unwrap();
        let c = Complex64::new(-0.7, 1.9);
        let n2 = norm_suite(&eta.scale(c), &wf, 2.0).unwrap();
        let m = c.norm();
        for (a, b) in [
            (n1.sigma_a, n2.sigma_a),
            (n1.sigma_tilde, n2.sigma_tilde),
            (n1.l2s, n2.l2s),
            (n1.exp_h1, n2.exp_h1),
        ] {
            assert!((b - m * a).abs() <= 1e-14 * b.max(1.0));
        }
        assert!((n2.virial - m * m * n1.virial).abs() < 1e-13);
    }

    #[test]
    fn sigma_tilde_of_eigenfunction_converges() {
        // φ = sech/√2 for V = -2sech²; κ = 0.5
        let value = |n: usize| {
            let g = grid(n);
            let p = WeightParams { kappa: 0.5, ..Default::default() };
            let wf = WeightFamily::build(p, &g).unwrap();
            let phi = ComplexField::from_fn(&g, |x| Complex64::new(1.0 / (x.cosh() * 2f64.sqrt()), 0.0));
            wf.sigma_tilde(&phi)
        };
        assert!((value(4001) - value(8001)).abs() < 1e-8);
    }
}
