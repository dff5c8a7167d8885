//! Virial functional `I_A = ½⟨iη, S_Aη⟩`, its two rate estimators, the
//! integrated virial inequality and the ensemble probes behind it.

use num_complex::Complex64;
use serde::Serialize;

use super::weights::WeightFamily;
use crate::branch::BoundStatePoint;
use crate::error::{LabError, Result};
use crate::evolution::Trajectory;
use crate::field::{ComplexField, I};
use crate::modulation::{l2_in_time, Decomposer, ModulationRecord};
use crate::operator::{Hamiltonian, Stencil};
use crate::potential::Potential;

/// `S_Aη = φ_A η' + (φ_A η)'`, which equals `φ_A'η + 2φ_Aη'` and is exactly
/// skew-adjoint with the centered difference.
pub fn s_a(eta: &ComplexField, wf: &WeightFamily) -> ComplexField {
    let a = eta.weighted(&wf.phi_a).derivative();
    let b = eta.derivative().weighted(&wf.phi_a);
    &a + &b
}

pub fn virial_functional(eta: &ComplexField, wf: &WeightFamily) -> f64 {
    0.5 * eta.scale(I).pairing(&s_a(eta, wf))
}

/// `η̇ = -D_zQ ζ - iHη - iN - Wu` with `ζ = ż + iEz`.
pub fn eta_dot(
    decomposer: &Decomposer,
    u: &ComplexField,
    eta: &ComplexField,
    point: &BoundStatePoint,
    zeta: Complex64,
    absorption: Option<&[f64]>,
) -> Result<ComplexField> {
    let branch = decomposer.branch();
    let nl = branch.nonlinearity();
    let h_eta = branch.hamiltonian().apply(eta)?;
    let values = (0..u.len())
        .map(|j| {
            let w = absorption.map_or(0.0, |a| a[j]);
            let n = nl.f(u[j]) - nl.f(point.q[j]);
            -(point.d1q[j] * zeta.re + point.d2q[j] * zeta.im) - I * (h_eta[j] + n) - u[j] * w
        })
        .collect();
    ComplexField::from_values(u.grid(), values)
}

/// `dI_A/dt = -⟨η̇, iS_Aη⟩`.
pub fn virial_rate(eta: &ComplexField, eta_dot: &ComplexField, wf: &WeightFamily) -> f64 {
    -eta_dot.pairing(&s_a(eta, wf).scale(I))
}

#[derive(Debug, Clone, Serialize)]
pub struct VirialReport {
    pub times: Vec<f64>,
    pub virial: Vec<f64>,
    /// Centered difference of `I_A` over snapshots.
    pub rate_fd: Vec<f64>,
    /// `-⟨η̇, iS_Aη⟩`.
    pub rate_formula: Vec<f64>,
    pub sigma_a_sq: Vec<f64>,
    pub sigma_tilde_sq: Vec<f64>,
    pub residual_sq: Vec<f64>,
    /// `∫‖η‖²_{Σ_A}`.
    pub lhs: f64,
    /// `2 sup|I_A| + ∫(‖η‖²_Σ̃ + |ż + iEz|²)`.
    pub rhs: f64,
    /// `lhs / rhs`; `None` for `0/0`.
    pub c_emp: Option<f64>,
    /// `rhs = 0` with `lhs > 0`.
    pub anomaly: bool,
    /// `‖rate_fd - rate_formula‖ / ‖rate_formula‖` in `L²(I)`.
    pub rate_disagreement: f64,
}

fn integrate(ts: &[f64], v: &[f64]) -> f64 {
    (1..ts.len())
        .map(|i| 0.5 * (ts[i] - ts[i - 1]) * (v[i] + v[i - 1]))
        .sum()
}

/// Integrated virial inequality over the trusted window. `records` must
/// come from `residual_series` on the same trajectory.
pub fn virial_inequality_check(
    traj: &Trajectory,
    records: &[ModulationRecord],
    decomposer: &Decomposer,
    wf: &WeightFamily,
) -> Result<VirialReport> {
    let snaps = traj.trusted();
    if records.len() < snaps.len() {
        return Err(LabError::InsufficientSamples {
            needed: snaps.len(),
            got: records.len(),
        });
    }
    let absorption = traj.absorption();
    let mut times = Vec::new();
    let mut virial = Vec::new();
    let mut rate_formula = Vec::new();
    let mut sigma_a_sq = Vec::new();
    let mut sigma_tilde_sq = Vec::new();
    let mut residual_sq = Vec::new();
    for (s, r) in snaps.iter().zip(records) {
        let eta = &s.state.eta;
        let point = decomposer.branch().solve(s.state.z)?;
        let zeta = r.residual_projected;
        let dot = eta_dot(decomposer, &s.u, eta, &point, zeta, absorption.as_deref())?;
        times.push(s.t);
        virial.push(virial_functional(eta, wf));
        rate_formula.push(virial_rate(eta, &dot, wf));
        sigma_a_sq.push(wf.sigma_a(eta).powi(2));
        sigma_tilde_sq.push(wf.sigma_tilde(eta).powi(2));
        residual_sq.push(zeta.norm_sqr());
    }
    let m = times.len();
    let rate_fd: Vec<f64> = (0..m)
        .map(|k| {
            if m < 3 {
                0.0
            } else if k == 0 {
                (virial[1] - virial[0]) / (times[1] - times[0])
            } else if k + 1 == m {
                (virial[m - 1] - virial[m - 2]) / (times[m - 1] - times[m - 2])
            } else {
                (virial[k + 1] - virial[k - 1]) / (times[k + 1] - times[k - 1])
            }
        })
        .collect();
    let lhs = integrate(&times, &sigma_a_sq);
    let sup_i = virial.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rhs = 2.0 * sup_i + integrate(&times, &sigma_tilde_sq) + integrate(&times, &residual_sq);
    let (c_emp, anomaly) = if rhs > 0.0 {
        (Some(lhs / rhs), false)
    } else {
        (None, lhs > 0.0)
    };
    let diff: Vec<f64> = rate_fd.iter().zip(&rate_formula).map(|(a, b)| a - b).collect();
    let base = l2_in_time(&times, &rate_formula);
    let rate_disagreement = if base > 0.0 {
        l2_in_time(&times, &diff) / base
    } else {
        0.0
    };
    Ok(VirialReport {
        times,
        virial,
        rate_fd,
        rate_formula,
        sigma_a_sq,
        sigma_tilde_sq,
        residual_sq,
        lhs,
        rhs,
        c_emp,
        anomaly,
        rate_disagreement,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutatorReport {
    pub samples: usize,
    /// Smallest `C ≥ 0` with `-⟨η'', S_Aη⟩ - 2‖(ζ_Aη)'‖² ≥ -(C/A)‖η‖²_Σ̃` on the ensemble.
    pub fitted_c: f64,
    pub fitted_c_over_a: f64,
    /// Smallest normalized margin `(lhs - 2‖(ζ_Aη)'‖²)/‖η‖²_Σ̃`.
    pub min_margin: f64,
}

/// Positivity probe for the commutator `[-∂², S_A]`.
pub fn commutator_probe(ensemble: &[ComplexField], wf: &WeightFamily) -> Result<CommutatorReport> {
    let grid = wf.grid();
    let free = Hamiltonian::new(grid, &Potential::zero(), Stencil::Second);
    let a = wf.params.a_virial;
    let mut min_margin = f64::INFINITY;
    let mut samples = 0;
    for eta in ensemble {
        let st = wf.sigma_tilde(eta).powi(2);
        if st < 1e-300 {
            continue;
        }
        let lhs = free.apply(eta)?.pairing(&s_a(eta, wf));
        let grad = eta.weighted(&wf.zeta_a).derivative().norm_sqr();
        min_margin = min_margin.min((lhs - 2.0 * grad) / st);
        samples += 1;
    }
    if samples == 0 {
        return Err(LabError::InsufficientSamples { needed: 1, got: 0 });
    }
    let fitted_c = (-min_margin).max(0.0) * a;
    Ok(CommutatorReport {
        samples,
        fitted_c,
        fitted_c_over_a: fitted_c / a,
        min_margin,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PurePowerReport {
    pub ratios: Vec<f64>,
    pub max: f64,
    pub dropped: usize,
}

/// `∫|η|^{p+1}ζ_A² / (A² ‖η‖_∞^{p-1} ‖(ζ_Aη)'‖²)` per sample.
pub fn pure_power_estimate_check(ensemble: &[ComplexField], wf: &WeightFamily, p: f64) -> PurePowerReport {
    let a = wf.params.a_virial;
    let mut ratios = Vec::new();
    let mut dropped = 0;
    for eta in ensemble {
        let h = eta.grid().spacing();
        let num: f64 = eta
            .values()
            .iter()
            .zip(&wf.zeta_a)
            .map(|(v, z)| v.norm().powf(p + 1.0) * z * z)
            .sum::<f64>()
            * h;
        let den = a * a * eta.sup_norm().powf(p - 1.0) * eta.weighted(&wf.zeta_a).derivative().norm_sqr();
        if den > 1e-300 && den.is_finite() {
            ratios.push(num / den);
        } else {
            dropped += 1;
        }
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    PurePowerReport { ratios, max, dropped }
}

/// Largest `|I_A| / (A‖η‖²)` over an ensemble.
pub fn virial_bound_constant(ensemble: &[ComplexField], wf: &WeightFamily) -> f64 {
    ensemble
        .iter()
        .filter(|e| e.norm_sqr() > 0.0)
        .map(|e| virial_functional(e, wf).abs() / (wf.params.a_virial * e.norm_sqr()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::diagnostics::weights::WeightParams;
    use crate::grid::Grid;
    use crate::random;
    use proptest::prelude::*;

    fn family() -> WeightFamily {
        let g = Arc::new(Grid::dirichlet(40.0, 2001).unwrap());
        WeightFamily::build(WeightParams::default(), &g).unwrap()
    }

    fn ensemble(wf: &WeightFamily, count: usize, seed: u64) -> Vec<ComplexField> {
        let mut rng = random::rng(seed);
        (0..count).map(|_| random::packet_field(wf.grid(), &mut rng, 3, 10.0)).collect()
    }

    #[test]
    fn real_fields_have_zero_virial() {
        let wf = family();
        let eta = ComplexField::from_fn(wf.grid(), |x| Complex64::new((-(x - 1.0).powi(2)).exp() * x.sin(), 0.0));
        assert!(virial_functional(&eta, &wf).abs() < 1e-16);
    }

    #[test]
    fn s_a_is_skew() {
        let wf = family();
        let e = ensemble(&wf, 2, 3);
        let lhs = e[0].pairing(&s_a(&e[1], &wf));
        let rhs = -s_a(&e[0], &wf).pairing(&e[1]);
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn virial_bounded_by_a_mass() {
        let wf = family();
        let c = virial_bound_constant(&ensemble(&wf, 100, 11), &wf);
        assert!(c.is_finite() && c < 1.0);
    }

    #[test]
    fn commutator_probe_is_finite() {
        let wf = family();
        let rep = commutator_probe(&ensemble(&wf, 30, 5), &wf).unwrap();
        assert_eq!(rep.samples, 30);
        assert!(rep.fitted_c.is_finite());
    }

    #[test]
    fn pure_power_ratio_drops_zero_and_is_scale_free() {
        let wf = family();
        let mut rng = random::rng(9);
        let eta = random::compact_field(wf.grid(), &mut rng, 6.0);
        let zero = ComplexField::zeros(wf.grid());
        let rep = pure_power_estimate_check(&[zero, eta.clone(), eta.scale_real(0.01)], &wf, 2.0);
        assert_eq!(rep.dropped, 1);
        assert!((rep.ratios[0] - rep.ratios[1]).abs() < 1e-12 * rep.ratios[0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn virial_phase_invariant(seed in 0u64..10_000, th in 0.0..6.3f64) {
            let wf = family();
            let e = &ensemble(&wf, 1, seed)[0];
            let a = virial_functional(e, &wf);
            let b = virial_functional(&e.scale((I * th).exp()), &wf);
            prop_assert!((a - b).abs() < 1e-13 * a.abs().max(1.0));
        }
    }
}
