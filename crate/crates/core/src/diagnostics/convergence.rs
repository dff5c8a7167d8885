//! Late-time detectors: limiting modulus `r₊`, local decay of `η` and the
//! phase-profile check against `Q[r₊]`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::evolution::{local_decay_series, Trajectory};
use crate::modulation::Decomposer;

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub window_end: f64,
    /// Mean of `|z|` over the final quarter of the window.
    pub r_plus: f64,
    /// `max |(|z| - r₊)|` over the final quarter.
    pub deviation: f64,
    pub local_final_over_peak: f64,
    /// `sup_{|x| ≤ 5} |u e^{-iϑ} - Q[r₊]|` at the last trusted snapshot.
    pub phase_error: f64,
    /// `sup_t (|z| + ‖η‖_{H¹}) / ‖u₀‖_{H¹}`; zero for `u₀ = 0`.
    pub orbital_constant: f64,
    /// `∫‖e^{-a⟨x⟩}η‖²_{H¹}` share from the final quarter.
    pub h1_tail_fraction: f64,
}

pub fn convergence_detectors(traj: &Trajectory, decomposer: &Decomposer, a: f64) -> Result<ConvergenceReport> {
    let snaps = traj.trusted();
    if snaps.len() < 8 {
        return Err(LabError::InsufficientSamples {
            needed: 8,
            got: snaps.len(),
        });
    }
    let window_end = snaps[snaps.len() - 1].t;
    let dt = traj.config.dt;
    let last_step = snaps[snaps.len() - 1].step;
    let first_step = ((0.75 * window_end) / dt).round() as usize;
    let tail: Vec<f64> = traj.z_series[first_step.min(last_step)..=last_step]
        .iter()
        .map(|z| z.norm())
        .collect();
    let r_plus = tail.iter().sum::<f64>() / tail.len() as f64;
    let deviation = tail.iter().map(|r| (r - r_plus).abs()).fold(0.0, f64::max);

    let decay = local_decay_series(traj, a);

    let last = &snaps[snaps.len() - 1];
    let q = decomposer.branch().solve(Complex64::new(r_plus, 0.0))?.q;
    let theta = last.state.z.arg();
    let rot = Complex64::from_polar(1.0, -theta);
    let grid = last.u.grid();
    let phase_error = grid
        .points()
        .iter()
        .enumerate()
        .filter(|(_, x)| x.abs() <= 5.0)
        .map(|(j, _)| (last.u[j] * rot - q[j]).norm())
        .fold(0.0, f64::max);

    let u0 = snaps[0].u.h1_norm();
    let orbital_constant = if u0 > 0.0 {
        snaps
            .iter()
            .map(|s| s.state.z.norm() + s.state.eta.h1_norm())
            .fold(0.0, f64::max)
            / u0
    } else {
        0.0
    };
    Ok(ConvergenceReport {
        window_end,
        r_plus,
        deviation,
        local_final_over_peak: decay.final_over_peak,
        phase_error,
        orbital_constant,
        h1_tail_fraction: decay.h1_tail_fraction,
    })
}
