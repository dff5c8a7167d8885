//! Decomposition `u = Q[z] + η` with `Pη = 0` and the modulation residual
//! `ż + iE(|z|²)z`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::branch::{BoundStatePoint, BranchSolver};
use crate::error::{LabError, Result};
use crate::evolution::Trajectory;
use crate::field::{ComplexField, I};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModulationSettings {
    /// Small-data radius `c₀` for `‖u‖_{H¹}`.
    pub small_data_radius: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ModulationSettings {
    fn default() -> Self {
        ModulationSettings {
            small_data_radius: 0.2,
            tolerance: 1e-13,
            max_iterations: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModulationState {
    pub t: f64,
    pub z: Complex64,
    pub eta: ComplexField,
    /// `|(u - Q[z], φ)|` at the accepted `z`.
    pub residual_norm: f64,
    pub iterations: usize,
    /// `(|z| + ‖η‖_{H¹}) / ‖u‖_{H¹}`, zero for `u = 0`.
    pub bound_ratio: f64,
}

/// `(⟨v, φ⟩, ⟨v, iφ⟩)` packed as a complex number.
fn coordinates(v: &ComplexField, phi: &ComplexField) -> Complex64 {
    v.inner(phi)
}

/// Gram matrix `M[k][j] = ⟨D_jQ, i^{k-1}φ⟩`.
pub fn gram_matrix(point: &BoundStatePoint, phi: &ComplexField) -> [[f64; 2]; 2] {
    let c1 = coordinates(&point.d1q, phi);
    let c2 = coordinates(&point.d2q, phi);
    [[c1.re, c2.re], [c1.im, c2.im]]
}

fn solve2(m: [[f64; 2]; 2], b: [f64; 2]) -> Result<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return Err(LabError::Singular);
    }
    Ok([
        (b[0] * m[1][1] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}

/// 2-norm condition number of a 2×2 matrix.
pub fn condition2(m: [[f64; 2]; 2]) -> f64 {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let s = a * a + b * b + c * c + d * d;
    let det = (a * d - b * c).abs();
    let root = (s * s - 4.0 * det * det).max(0.0).sqrt();
    let smax = (0.5 * (s + root)).sqrt();
    let smin = (0.5 * (s - root)).max(0.0).sqrt();
    smax / smin
}

#[derive(Debug, Clone)]
pub struct Decomposer {
    branch: BranchSolver,
    settings: ModulationSettings,
}

impl Decomposer {
    pub fn new(branch: BranchSolver, settings: ModulationSettings) -> Self {
        Decomposer { branch, settings }
    }

    pub fn branch(&self) -> &BranchSolver {
        &self.branch
    }

    pub fn settings(&self) -> &ModulationSettings {
        &self.settings
    }

    /// Newton on `⟨u - Q[z], φ⟩ = ⟨u - Q[z], iφ⟩ = 0` from `z₀ = (u, φ)`.
    pub fn decompose(&self, u: &ComplexField, t: f64) -> Result<(ModulationState, BoundStatePoint)> {
        let phi = &self.branch.spectral().phi;
        u.check_grid(phi)?;
        let norm = u.h1_norm();
        if !(norm < self.settings.small_data_radius) {
            return Err(LabError::OutsideSmallDataRadius {
                norm,
                radius: self.settings.small_data_radius,
            });
        }
        let mut z = coordinates(u, phi);
        let mut last = f64::INFINITY;
        for it in 0..=self.settings.max_iterations {
            let point = self.branch.solve(z)?;
            let eta = u - &point.q;
            let f = coordinates(&eta, phi);
            last = f.norm();
            if last <= self.settings.tolerance * norm.max(1e-300) || last == 0.0 {
                let bound_ratio = if norm > 0.0 {
                    (z.norm() + eta.h1_norm()) / norm
                } else {
                    0.0
                };
                return Ok((
                    ModulationState {
                        t,
                        z,
                        eta,
                        residual_norm: last,
                        iterations: it,
                        bound_ratio,
                    },
                    point,
                ));
            }
            if it == self.settings.max_iterations {
                break;
            }
            let m = gram_matrix(&point, phi);
            let d = solve2(m, [f.re, f.im])?;
            z += Complex64::new(d[0], d[1]);
        }
        Err(LabError::NewtonDivergence {
            iterations: self.settings.max_iterations,
            residual: last,
        })
    }

    /// Projection estimator of `ż + iEz`: pairing the η-equation with `φ`
    /// and `iφ` leaves `M ζ = (⟨-iN - Wu, φ⟩, ⟨-iN - Wu, iφ⟩)` with
    /// `N = f(u) - f(Q[z])` and `W` the sponge profile.
    pub fn projected_residual(
        &self,
        u: &ComplexField,
        point: &BoundStatePoint,
        absorption: Option<&[f64]>,
    ) -> Result<(Complex64, f64)> {
        let phi = &self.branch.spectral().phi;
        let nl = self.branch.nonlinearity();
        let n_term: Vec<Complex64> = u
            .values()
            .iter()
            .zip(point.q.values())
            .enumerate()
            .map(|(i, (uv, qv))| {
                let w = absorption.map_or(0.0, |a| a[i]);
                -I * (nl.f(*uv) - nl.f(*qv)) - uv * w
            })
            .collect();
        let rhs = ComplexField::from_values(u.grid(), n_term)?;
        let b = coordinates(&rhs, phi);
        let m = gram_matrix(point, phi);
        let zeta = solve2(m, [b.re, b.im])?;
        Ok((Complex64::new(zeta[0], zeta[1]), condition2(m)))
    }
}

/// Per-snapshot modulation data derived from a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct ModulationRecord {
    pub t: f64,
    pub z: Complex64,
    pub energy_level: f64,
    /// Centered difference of the stored `z` series plus `iEz`.
    pub residual_fd: Complex64,
    /// Projection estimator.
    pub residual_projected: Complex64,
    pub gram_condition: f64,
    pub eta_h1: f64,
    pub eta_sigma_tilde: f64,
}

/// `ż` at step `k` of an equispaced series, second order everywhere.
pub fn series_derivative(z: &[Complex64], k: usize, dt: f64) -> Complex64 {
    let n = z.len();
    if k == 0 {
        (z[1] * 4.0 - z[0] * 3.0 - z[2]) / (2.0 * dt)
    } else if k + 1 == n {
        (z[n - 1] * 3.0 - z[n - 2] * 4.0 + z[n - 3]) / (2.0 * dt)
    } else {
        (z[k + 1] - z[k - 1]) / (2.0 * dt)
    }
}

/// `‖sech(κx) η‖`.
pub fn sigma_tilde_norm(eta: &ComplexField, kappa: f64) -> f64 {
    let w: Vec<f64> = eta
        .grid()
        .points()
        .iter()
        .map(|x| 1.0 / (kappa * x).cosh())
        .collect();
    eta.weighted_norm(&w)
}

/// Both residual estimators at every snapshot.
pub fn residual_series(
    traj: &Trajectory,
    decomposer: &Decomposer,
    kappa: f64,
) -> Result<Vec<ModulationRecord>> {
    if traj.z_series.len() < 5 {
        return Err(LabError::InsufficientSamples {
            needed: 5,
            got: traj.z_series.len(),
        });
    }
    let absorption = traj.absorption();
    traj.snapshots
        .iter()
        .map(|snap| {
            let point = decomposer
                .branch()
                .solve(snap.state.z)?;
            let zdot = series_derivative(&traj.z_series, snap.step, traj.config.dt);
            let z = snap.state.z;
            let (proj, cond) =
                decomposer.projected_residual(&snap.u, &point, absorption.as_deref())?;
            Ok(ModulationRecord {
                t: snap.t,
                z,
                energy_level: point.e,
                residual_fd: zdot + I * point.e * z,
                residual_projected: proj,
                gram_condition: cond,
                eta_h1: snap.state.eta.h1_norm(),
                eta_sigma_tilde: sigma_tilde_norm(&snap.state.eta, kappa),
            })
        })
        .collect()
}

/// Trapezoid `L²` norm of a sampled series.
pub fn l2_in_time(ts: &[f64], values: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 1..ts.len() {
        s += 0.5 * (ts[i] - ts[i - 1]) * (values[i] * values[i] + values[i - 1] * values[i - 1]);
    }
    s.sqrt()
}

/// `‖a - b‖_{L²(I)} / ‖b‖_{L²(I)}` between the two estimators; zero when both vanish.
pub fn estimator_disagreement(records: &[ModulationRecord]) -> f64 {
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let diff: Vec<f64> = records
        .iter()
        .map(|r| (r.residual_fd - r.residual_projected).norm())
        .collect();
    let base: Vec<f64> = records.iter().map(|r| r.residual_projected.norm()).collect();
    let d = l2_in_time(&ts, &diff);
    let b = l2_in_time(&ts, &base);
    if b == 0.0 {
        if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        d / b
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscreteEstimate {
    pub max: f64,
    pub median: f64,
    pub p90: f64,
    pub used: usize,
    /// Samples dropped because `δ^{p-1}‖η‖_Σ̃ < 1e-14`.
    pub dropped: usize,
    pub ratios: Vec<f64>,
}

/// `|ż + iEz| / (δ^{p-1} ‖η‖_Σ̃)` using the projection estimator.
pub fn check_discrete_estimate(records: &[ModulationRecord], delta: f64, p: f64) -> DiscreteEstimate {
    let scale = delta.powf(p - 1.0);
    let mut ratios = Vec::new();
    let mut dropped = 0;
    for r in records {
        let den = scale * r.eta_sigma_tilde;
        if den < 1e-14 {
            dropped += 1;
        } else {
            ratios.push(r.residual_projected.norm() / den);
        }
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |f: f64| -> f64 {
        if sorted.is_empty() {
            0.0
        } else {
            sorted[((sorted.len() - 1) as f64 * f).round() as usize]
        }
    };
    DiscreteEstimate {
        max: sorted.last().copied().unwrap_or(0.0),
        median: q(0.5),
        p90: q(0.9),
        used: sorted.len(),
        dropped,
        ratios,
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::branch::BranchSettings;
    use crate::grid::Grid;
    use crate::nonlinearity::Nonlinearity;
    use crate::operator::{Hamiltonian, Stencil};
    use crate::potential::Potential;
    use crate::random;
    use crate::spectrum::SpectralData;
    use proptest::prelude::*;

    fn decomposer() -> Decomposer {
        let g = Arc::new(Grid::dirichlet(40.0, 1025).unwrap());
        let h = Hamiltonian::new(&g, &Potential::sech2(1.0, 1.0).unwrap(), Stencil::Second);
        let sp = SpectralData::cached(&h).unwrap();
        let b = BranchSolver::new(&h, sp, Nonlinearity::focusing_cubic(), BranchSettings::default())
            .unwrap();
        Decomposer::new(b, ModulationSettings::default())
    }

    fn pc_field(d: &Decomposer, seed: u64, size: f64) -> ComplexField {
        let sp = d.branch().spectral();
        let raw = random::packet_field(sp.grid(), &mut random::rng(seed), 2, 6.0);
        let f = sp.project_pc(&raw).unwrap();
        f.scale_real(size / f.h1_norm())
    }

    #[test]
    fn zero_decomposes_to_zero() {
        let d = decomposer();
        let u = ComplexField::zeros(d.branch().spectral().grid());
        let (s, _) = d.decompose(&u, 0.0).unwrap();
        assert_eq!(s.z, Complex64::new(0.0, 0.0));
        assert_eq!(s.eta.norm(), 0.0);
    }

    #[test]
    fn small_multiple_of_phi() {
        let d = decomposer();
        let u = d.branch().spectral().phi.scale_real(0.02);
        let (s, _) = d.decompose(&u, 0.0).unwrap();
        assert!((s.z - 0.02).norm() <= 0.02f64.powi(2));
    }

    #[test]
    fn rejects_large_data() {
        let d = decomposer();
        let u = d.branch().spectral().phi.scale_real(1.0);
        assert!(matches!(
            d.decompose(&u, 0.0),
            Err(LabError::OutsideSmallDataRadius { .. })
        ));
    }

    #[test]
    fn stationary_residual_vanishes() {
        let d = decomposer();
        let pt = d.branch().solve(Complex64::new(0.03, 0.01)).unwrap();
        let (zeta, cond) = d.projected_residual(&pt.q, &pt, None).unwrap();
        assert!(zeta.norm() < 1e-15);
        assert!(cond < 1.0 + 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn roundtrip(zr in -0.07..0.07f64, zi in -0.07..0.07f64, seed in 0u64..1000, size in 0.0..0.05f64, th in 0.0..6.3f64) {
            let d = decomposer();
            let z0 = Complex64::new(zr, zi);
            let eta0 = pc_field(&d, seed, size);
            let q = d.branch().solve(z0).unwrap().q;
            let u = &q + &eta0;
            let (s, _) = d.decompose(&u, 0.0).unwrap();
            prop_assert!((s.z - z0).norm() < 1e-10);
            prop_assert!(s.eta.max_abs_diff(&eta0) < 1e-10);
            let rot = (I * th).exp();
            let (r, _) = d.decompose(&u.scale(rot), 0.0).unwrap();
            prop_assert!((r.z - s.z * rot).norm() < 1e-11);
            prop_assert!(r.eta.max_abs_diff(&s.eta.scale(rot)) < 1e-11);
        }
    }
}
