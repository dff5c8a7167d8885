//! The discrete eigenpair `(-λ, φ)` and the projections `P`, `P_c`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::ComplexField;
use crate::grid::{Boundary, Grid};
use crate::linalg::SymBand;
use crate::operator::{Hamiltonian, Stencil};

#[derive(Debug, Clone)]
pub struct SpectralData {
    /// `λ > 0`; the eigenvalue is `-λ`.
    pub lambda: f64,
    /// Eigenvalue on the once-refined grid (`h/2`).
    pub lambda_refined: f64,
    /// Richardson extrapolation of `λ` from the two resolutions.
    pub lambda_extrapolated: f64,
    pub phi: ComplexField,
    /// `(r^p φ_fine - φ)/(r^p - 1)` sampled on this grid; closer to the continuum
    /// profile than `φ` but not an exact eigenvector of the discrete operator.
    pub phi_extrapolated: ComplexField,
    pub negative_count: usize,
    /// `‖Hφ + λφ‖`.
    pub residual: f64,
    pub stencil: Stencil,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub lambda: f64,
    pub lambda_refined: f64,
    pub extrapolated_lambda: f64,
    pub n_negative: usize,
    pub multiple_eigenvalues: bool,
    pub residual: f64,
}

type CacheKey = (u64, usize, Boundary, Stencil, u64);

fn cache() -> &'static RwLock<HashMap<CacheKey, Arc<SpectralData>>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<SpectralData>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn key(h: &Hamiltonian) -> CacheKey {
    let g = h.grid();
    (
        g.half_width().to_bits(),
        g.len(),
        g.boundary(),
        h.stencil(),
        h.potential().fingerprint(),
    )
}

/// Lowest eigenvalue and eigenvector of a symmetric band matrix.
fn lowest_pair(a: &SymBand) -> (f64, Vec<f64>, usize) {
    let negative = a.count_below(0.0);
    let mu = a.eigenvalue_by_bisection(0);
    let shift = mu - 1e-7 * mu.abs().max(1.0);
    let ldl = a.ldl(shift);
    let n = a.dim();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..6 {
        let w = ldl.solve(&v);
        let norm = w.iter().map(|t| t * t).sum::<f64>().sqrt();
        v = w.into_iter().map(|t| t / norm).collect();
    }
    let av = a.matvec(&v);
    let rq = av.iter().zip(&v).map(|(p, q)| p * q).sum::<f64>();
    (rq, v, negative)
}

impl SpectralData {
    /// Lowest eigenpair of `h`; requires a Dirichlet grid.
    pub fn compute(h: &Hamiltonian) -> Result<Self> {
        let grid = h.grid();
        let band = h.band()?;
        let (mu, v, negative) = lowest_pair(&band);
        if negative == 0 || mu >= 0.0 {
            return Err(LabError::NoBoundState);
        }
        let hstep = grid.spacing();
        let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        let norm = (v.iter().map(|t| t * t).sum::<f64>() * hstep).sqrt();
        let phi_vals: Vec<f64> = v.iter().map(|t| sign * t / norm).collect();
        let phi = ComplexField::from_real(grid, &phi_vals)?;
        let lambda = -mu;

        let hphi = h.apply(&phi)?;
        let residual = (&hphi + &phi.scale_real(lambda)).norm();

        let fine_grid = Arc::new(grid.refined(2)?);
        let fine = Hamiltonian::new(&fine_grid, h.potential(), h.stencil());
        let (mu_fine, v_fine, _) = lowest_pair(&fine.band()?);
        let r = hstep / fine_grid.spacing();
        let rp = r.powi(h.stencil().order() as i32);
        let lambda_refined = -mu_fine;
        let lambda_extrapolated = lambda_refined + (lambda_refined - lambda) / (rp - 1.0);

        let sign_f = if v_fine.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        let norm_f = (v_fine.iter().map(|t| t * t).sum::<f64>() * fine_grid.spacing()).sqrt();
        let ext: Vec<f64> = phi_vals
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let f = sign_f * v_fine[2 * j] / norm_f;
                f + (f - c) / (rp - 1.0)
            })
            .collect();
        let phi_extrapolated = ComplexField::from_real(grid, &ext)?;

        Ok(SpectralData {
            lambda,
            lambda_refined,
            lambda_extrapolated,
            phi,
            phi_extrapolated,
            negative_count: negative,
            residual,
            stencil: h.stencil(),
        })
    }

    /// As [`SpectralData::compute`], memoized per `(grid, stencil, potential)`.
    /// Concurrent callers may compute the same entry twice; the result is identical.
    pub fn cached(h: &Hamiltonian) -> Result<Arc<Self>> {
        let k = key(h);
        if let Some(hit) = cache().read().expect("spectral cache poisoned").get(&k) {
            return Ok(hit.clone());
        }
        let data = Arc::new(Self::compute(h)?);
        cache()
            .write()
            .expect("spectral cache poisoned")
            .entry(k)
            .or_insert_with(|| data.clone());
        Ok(data)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.phi.grid()
    }

    pub fn multiple_eigenvalues(&self) -> bool {
        self.negative_count > 1
    }

    pub fn summary(&self) -> SpectrumSummary {
        SpectrumSummary {
            lambda: self.lambda,
            lambda_refined: self.lambda_refined,
            extrapolated_lambda: self.lambda_extrapolated,
            n_negative: self.negative_count,
            multiple_eigenvalues: self.multiple_eigenvalues(),
            residual: self.residual,
        }
    }

    /// `(⟨ψ, φ⟩, ⟨ψ, iφ⟩)` packed as one complex number; `φ` is real so this
    /// equals the complex pairing `(ψ, φ)`.
    pub fn coordinate(&self, psi: &ComplexField) -> Complex64 {
        psi.inner(&self.phi)
    }

    /// `Pψ = ⟨ψ, φ⟩φ + ⟨ψ, iφ⟩iφ`.
    pub fn project_p(&self, psi: &ComplexField) -> Result<ComplexField> {
        psi.check_grid(&self.phi)?;
        Ok(self.phi.scale(self.coordinate(psi)))
    }

    /// `P_c ψ = ψ - Pψ`.
    pub fn project_pc(&self, psi: &ComplexField) -> Result<ComplexField> {
        Ok(psi - &self.project_p(psi)?)
    }

    /// `min(√λ, κ)/2`, the exponential weight used for branch norms.
    pub fn branch_weight(&self, kappa: f64) -> f64 {
        0.5 * self.lambda.sqrt().min(kappa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    fn spectral(depth: f64, n: usize) -> SpectralData {
        let g = Arc::new(Grid::dirichlet(40.0, n).unwrap());
        let h = Hamiltonian::new(&g, &Potential::sech2(depth, 1.0).unwrap(), Stencil::Second);
        SpectralData::compute(&h).unwrap()
    }

    #[test]
    fn reflectionless_well_has_unit_eigenvalue() {
        let s = spectral(2.0, 4096);
        assert!((s.lambda_extrapolated - 1.0).abs() < 1e-6, "{}", s.lambda_extrapolated);
        assert_eq!(s.negative_count, 1);
        assert!(s.residual < 1e-9, "{}", s.residual);
        let err = ComplexField::from_fn(s.grid(), |x| {
            Complex64::new(1.0 / (x.cosh() * 2f64.sqrt()), 0.0)
        });
        let d = (&err - &s.phi_extrapolated).norm();
        assert!(d < 1e-5, "{d}");
    }

    #[test]
    fn eigenfunction_is_positive_and_normalized() {
        let s = spectral(1.0, 2048);
        assert!((s.phi.norm() - 1.0).abs() < 1e-12);
        assert!(s.phi.values().iter().all(|v| v.re > 0.0 && v.im == 0.0));
    }

    #[test]
    fn free_operator_has_no_bound_state() {
        let g = Arc::new(Grid::dirichlet(40.0, 512).unwrap());
        let h = Hamiltonian::new(&g, &Potential::zero(), Stencil::Second);
        assert!(matches!(SpectralData::compute(&h), Err(LabError::NoBoundState)));
    }

    #[test]
    fn periodic_grids_are_rejected() {
        let g = Arc::new(Grid::periodic(40.0, 512).unwrap());
        let h = Hamiltonian::new(&g, &Potential::sech2(1.0, 1.0).unwrap(), Stencil::Second);
        assert!(matches!(
            SpectralData::compute(&h),
            Err(LabError::UnsupportedBoundary { .. })
        ));
    }

    #[test]
    fn projections_of_phi() {
        let s = spectral(1.0, 1024);
        let phi = s.phi.clone();
        assert!(s.project_pc(&phi).unwrap().norm() < 1e-14);
        let iphi = phi.scale(crate::field::I);
        assert!(s.project_pc(&iphi).unwrap().norm() < 1e-14);
        assert!((&s.project_p(&phi).unwrap() - &phi).norm() < 1e-14);
    }
}
