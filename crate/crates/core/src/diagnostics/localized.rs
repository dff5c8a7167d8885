//! Localized component `w = P_c(χ_B η)` and its reconstruction bound.

use serde::Serialize;

use super::weights::{WeightFamily, WeightParams};
use crate::error::Result;
use crate::evolution::Trajectory;
use crate::field::ComplexField;
use crate::modulation::l2_in_time;
use crate::spectrum::SpectralData;

#[derive(Debug, Clone, Serialize)]
pub struct LocalizedReport {
    pub b: f64,
    pub a_virial: f64,
    pub times: Vec<f64>,
    /// `‖w(t)‖_{L^{2,-s}}`.
    pub w_series: Vec<f64>,
    /// `‖w‖_{L²(I, L^{2,-s})}`.
    pub w_norm: f64,
    /// `max_t ‖η‖_Σ̃ / (‖χ_Bη‖_Σ̃ + A⁻¹‖η‖_{Σ_A})`.
    pub reconstruction_constant: f64,
}

pub fn localized_component_series(
    traj: &Trajectory,
    spectral: &SpectralData,
    wf: &WeightFamily,
    s: f64,
) -> Result<LocalizedReport> {
    let snaps = traj.trusted();
    let mut times = Vec::with_capacity(snaps.len());
    let mut w_series = Vec::with_capacity(snaps.len());
    let mut reconstruction_constant: f64 = 0.0;
    for snap in snaps {
        let eta = &snap.state.eta;
        let v = eta.weighted(&wf.chi_b);
        let w = spectral.project_pc(&v)?;
        times.push(snap.t);
        w_series.push(wf.l2s(&w, -s));
        let num = wf.sigma_tilde(eta);
        let den = wf.sigma_tilde(&v) + wf.sigma_a(eta) / wf.params.a_virial;
        if den > 0.0 {
            reconstruction_constant = reconstruction_constant.max(num / den);
        }
    }
    Ok(LocalizedReport {
        b: wf.params.b_cutoff,
        a_virial: wf.params.a_virial,
        w_norm: l2_in_time(&times, &w_series),
        times,
        w_series,
        reconstruction_constant,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffSweep {
    pub reports: Vec<LocalizedReport>,
    pub w_norms: Vec<f64>,
    /// `‖w‖` strictly decreasing along the sweep.
    pub monotone_decreasing: bool,
}

/// Repeats the localized series for each `B` with `A = B³`.
pub fn cutoff_sweep(
    traj: &Trajectory,
    spectral: &SpectralData,
    base: WeightParams,
    bs: &[f64],
) -> Result<CutoffSweep> {
    let mut reports = Vec::with_capacity(bs.len());
    for &b in bs {
        let params = WeightParams {
            a_virial: b * b * b,
            b_cutoff: b,
            ..base
        };
        let wf = WeightFamily::build(params, traj.grid())?;
        reports.push(localized_component_series(traj, spectral, &wf, base.s)?);
    }
    let w_norms: Vec<f64> = reports.iter().map(|r| r.w_norm).collect();
    let monotone_decreasing = w_norms.windows(2).all(|p| p[1] < p[0]);
    Ok(CutoffSweep {
        reports,
        w_norms,
        monotone_decreasing,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionDefect {
    pub bs: Vec<f64>,
    /// `|(χ_Bη, φ)| / ‖η‖_Σ̃` for `Pη = 0`.
    pub defects: Vec<f64>,
    /// `max_B defect · e^{√λ B}`.
    pub fitted_c: f64,
}

/// Size of the discrete component that the cutoff reintroduces into `η ∈ P_c`.
pub fn projection_defect_sweep(
    eta: &ComplexField,
    spectral: &SpectralData,
    kappa: f64,
    bs: &[f64],
) -> Result<ProjectionDefect> {
    let eta = spectral.project_pc(eta)?;
    let grid = eta.grid().clone();
    let mut defects = Vec::with_capacity(bs.len());
    let mut fitted_c: f64 = 0.0;
    for &b in bs {
        let wf = WeightFamily::build(
            WeightParams {
                a_virial: (b * b * b).max(4.0),
                b_cutoff: b,
                kappa,
                ..Default::default()
            },
            &grid,
        )?;
        let st = wf.sigma_tilde(&eta);
        let d = if st > 0.0 {
            spectral.coordinate(&eta.weighted(&wf.chi_b)).norm() / st
        } else {
            0.0
        };
        fitted_c = fitted_c.max(d * (spectral.lambda.sqrt() * b).exp());
        defects.push(d);
    }
    Ok(ProjectionDefect {
        bs: bs.to_vec(),
        defects,
        fitted_c,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::Grid;
    use crate::operator::{Hamiltonian, Stencil};
    use crate::potential::Potential;
    use num_complex::Complex64;

    #[test]
    fn projection_defect_decays_with_b() {
        let g = Arc::new(Grid::dirichlet(40.0, 2001).unwrap());
        let h = Hamiltonian::new(&g, &Potential::sech2(1.0, 1.0).unwrap(), Stencil::Second);
        let sp = SpectralData::cached(&h).unwrap();
        let eta = ComplexField::from_fn(&g, |x| Complex64::new(1.0 / (0.5 * x).cosh(), 0.0));
        let rep = projection_defect_sweep(&eta, &sp, 0.3, &[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert!(rep.fitted_c.is_finite());
        assert!(rep.defects.windows(2).all(|p| p[1] < p[0]));
        let zero = ComplexField::zeros(&g);
        let rep0 = projection_defect_sweep(&zero, &sp, 0.3, &[2.0]).unwrap();
        assert_eq!(rep0.defects[0], 0.0);
    }
}
