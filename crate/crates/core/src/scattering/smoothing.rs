//! Time-integrated local decay of `e^{-itH}P_c` and of its Duhamel integral.
//!
//! Both functionals are computed with Crank–Nicolson plus an absorbing sponge,
//! so the box behaves like the line for outgoing waves over long horizons.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::{japanese_weight, ComplexField};
use crate::grid::Grid;
use crate::operator::Hamiltonian;
use crate::parallel::par_map;
use crate::propagator::{CayleyStepper, Sponge};
use crate::random::{self, LabRng};
use crate::spectrum::SpectralData;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Gaussian time profile truncated at `CUTOFF` widths, so it is exactly zero
/// outside `[center - 8 width, center + 8 width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeEnvelope {
    pub center: f64,
    pub width: f64,
}

impl TimeEnvelope {
    pub const CUTOFF: f64 = 8.0;

    pub fn eval(&self, t: f64) -> f64 {
        let s = (t - self.center) / self.width;
        if s.abs() > Self::CUTOFF {
            0.0
        } else {
            (-0.5 * s * s).exp()
        }
    }

    pub fn start(&self) -> f64 {
        self.center - Self::CUTOFF * self.width
    }

    pub fn end(&self) -> f64 {
        self.center + Self::CUTOFF * self.width
    }
}

/// Source `g(t, x) = Σ θᵢ(t) Gᵢ(x)`.
#[derive(Debug, Clone)]
pub struct SeparableSource {
    grid: Arc<Grid>,
    terms: Vec<(TimeEnvelope, ComplexField)>,
}

impl SeparableSource {
    pub fn new(grid: &Arc<Grid>) -> Self {
        SeparableSource {
            grid: grid.clone(),
            terms: Vec::new(),
        }
    }

    pub fn single(envelope: TimeEnvelope, profile: ComplexField) -> Result<Self> {
        let mut s = SeparableSource::new(profile.grid());
        s.push(envelope, profile)?;
        Ok(s)
    }

    pub fn push(&mut self, envelope: TimeEnvelope, profile: ComplexField) -> Result<()> {
        if !(envelope.width > 0.0 && envelope.width.is_finite() && envelope.center.is_finite()) {
            return Err(LabError::InvalidParameter(format!(
                "time envelope needs a positive width, got {}",
                envelope.width
            )));
        }
        if **profile.grid() != *self.grid {
            return Err(LabError::GridMismatch);
        }
        self.terms.push((envelope, profile));
        Ok(())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn terms(&self) -> &[(TimeEnvelope, ComplexField)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms
            .iter()
            .all(|(_, g)| g.values().iter().all(|v| *v == ZERO))
    }

    /// Time interval outside which `g` vanishes identically.
    pub fn support(&self) -> Option<(f64, f64)> {
        if self.terms.is_empty() {
            return None;
        }
        let lo = self.terms.iter().map(|(e, _)| e.start()).fold(f64::INFINITY, f64::min);
        let hi = self.terms.iter().map(|(e, _)| e.end()).fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    }

    pub fn eval_into(&self, t: f64, out: &mut [Complex64]) {
        out.iter_mut().for_each(|v| *v = ZERO);
        for (env, g) in &self.terms {
            let a = env.eval(t);
            if a == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(g.values()) {
                *o += v * a;
            }
        }
    }

    pub fn shifted(&self, dt: f64) -> Self {
        SeparableSource {
            grid: self.grid.clone(),
            terms: self
                .terms
                .iter()
                .map(|(e, g)| {
                    (
                        TimeEnvelope {
                            center: e.center + dt,
                            width: e.width,
                        },
                        g.clone(),
                    )
                })
                .collect(),
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        SeparableSource {
            grid: self.grid.clone(),
            terms: self.terms.iter().map(|(e, g)| (*e, g.scale(c))).collect(),
        }
    }

    pub fn project_pc(&self, spectral: &SpectralData) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|(e, g)| Ok((*e, spectral.project_pc(g)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SeparableSource {
            grid: self.grid.clone(),
            terms,
        })
    }

    /// One or two spatially localized packets switched on inside `[t_lo, t_hi]`.
    pub fn random(grid: &Arc<Grid>, rng: &mut LabRng, t_lo: f64, t_hi: f64) -> Self {
        let mut s = SeparableSource::new(grid);
        let count = rng.gen_range(1..=2);
        for _ in 0..count {
            let width = rng.gen_range(0.5..2.0);
            let span = TimeEnvelope::CUTOFF * width;
            let center = if t_hi - t_lo > 2.0 * span {
                rng.gen_range(t_lo + span..t_hi - span)
            } else {
                0.5 * (t_lo + t_hi)
            };
            let profile = random::packet_field(grid, rng, 2, 4.0);
            s.terms.push((TimeEnvelope { center, width }, profile));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingSettings {
    /// Kato: total horizon `T`. Inhomogeneous: decay time added after the
    /// source switches off.
    pub horizon: f64,
    pub dt: f64,
    pub sponge: Sponge,
}

impl Default for SmoothingSettings {
    fn default() -> Self {
        SmoothingSettings {
            horizon: 200.0,
            dt: 0.05,
            // long and weak: low wavenumbers dominate the late-time integral
            // and are reflected by steep layers
            sponge: Sponge {
                start_fraction: 0.5,
                strength: 0.2,
            },
        }
    }
}

impl SmoothingSettings {
    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(LabError::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.dt > 0.0 && self.dt < self.horizon) {
            return Err(LabError::InvalidParameter(format!(
                "dt must lie in (0, horizon), got {}",
                self.dt
            )));
        }
        self.sponge.validate()
    }

    fn steps(&self, span: f64) -> usize {
        (span / self.dt).ceil().max(1.0) as usize
    }
}

/// Running `∫ q(t) dt` by the trapezoid rule with saturation bookkeeping.
#[derive(Debug, Clone, Default)]
struct TimeIntegral {
    dt: f64,
    samples: Vec<f64>,
}

impl TimeIntegral {
    fn new(dt: f64) -> Self {
        TimeIntegral {
            dt,
            samples: Vec::new(),
        }
    }

    fn push(&mut self, q: f64) {
        self.samples.push(q);
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.samples.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.samples.windows(2) {
            acc += 0.5 * self.dt * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    /// Returns `(total, first time after which less than 1% is added, tail
    /// fraction over the second half)`.
    fn summary(&self, t0: f64) -> (f64, f64, f64) {
        let cum = self.cumulative();
        let total = *cum.last().unwrap_or(&0.0);
        if total <= 0.0 {
            return (0.0, t0, 0.0);
        }
        let idx = cum
            .iter()
            .position(|&c| total - c < SATURATION_TOL * total)
            .unwrap_or(cum.len() - 1);
        let half = cum[(cum.len() - 1) / 2];
        (total, t0 + idx as f64 * self.dt, (total - half) / total)
    }
}

/// A time integral is saturated once its second half adds less than 1%.
pub const SATURATION_TOL: f64 = 0.01;

fn weighted_sqr(values: &[Complex64], weight: &[f64], h: f64) -> f64 {
    h * values
        .iter()
        .zip(weight)
        .map(|(v, w)| w * w * v.norm_sqr())
        .sum::<f64>()
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 1.5) {
        return Err(LabError::InvalidParameter(format!(
            "weight exponent s must exceed 3/2, got {s}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct KatoReport {
    pub ratio: f64,
    pub input_norm: f64,
    pub horizon: f64,
    pub saturated: bool,
    /// First time after which the integral grows by less than 1%.
    pub saturation_time: f64,
    pub tail_fraction: f64,
}

/// `‖e^{-itH}P_c f‖_{L²([0,T]; L^{2,-s})} / ‖f‖`.
pub fn kato_smoothing_ratio(
    ham: &Hamiltonian,
    spectral: &SpectralData,
    f: &ComplexField,
    s: f64,
    settings: &SmoothingSettings,
) -> Result<KatoReport> {
    check_s(s)?;
    settings.validate()?;
    let input_norm = f.norm();
    let grid = ham.grid();
    let stepper = CayleyStepper::new(ham, settings.dt, Some(&settings.sponge))?;
    let weight = japanese_weight(grid, -s);
    let h = grid.spacing();
    let mut u = spectral.project_pc(f)?.into_values();
    let steps = settings.steps(settings.horizon);
    let mut integral = TimeIntegral::new(settings.dt);
    integral.push(weighted_sqr(&u, &weight, h));
    for k in 0..steps {
        stepper.step_values(&mut u);
        let q = weighted_sqr(&u, &weight, h);
        if !q.is_finite() {
            return Err(LabError::NonFinite {
                t: (k + 1) as f64 * settings.dt,
            });
        }
        integral.push(q);
    }
    let (total, saturation_time, tail_fraction) = integral.summary(0.0);
    let ratio = if input_norm == 0.0 {
        0.0
    } else {
        total.sqrt() / input_norm
    };
    Ok(KatoReport {
        ratio,
        input_norm,
        horizon: steps as f64 * settings.dt,
        saturated: tail_fraction < SATURATION_TOL,
        saturation_time,
        tail_fraction,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// `max / min`.
    pub spread: f64,
    pub all_saturated: bool,
    pub all_finite: bool,
}

impl EnsembleReport {
    fn from_ratios(ratios: Vec<f64>, all_saturated: bool) -> Self {
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let all_finite = ratios.iter().all(|r| r.is_finite());
        EnsembleReport {
            spread: max / min,
            ratios,
            min,
            max,
            all_saturated,
            all_finite,
        }
    }
}

/// Kato ratios for `count` random unit-norm `P_c` fields; sample `i` uses the
/// stream seeded by `seed + i`.
pub fn kato_ensemble(
    ham: &Hamiltonian,
    spectral: &SpectralData,
    count: usize,
    seed: u64,
    s: f64,
    settings: &SmoothingSettings,
) -> Result<EnsembleReport> {
    if count == 0 {
        return Err(LabError::InsufficientSamples { needed: 1, got: 0 });
    }
    let grid = ham.grid();
    let reports = par_map((0..count as u64).collect(), |i| {
        let mut rng = random::rng(seed.wrapping_add(i));
        let f = spectral.project_pc(&random::packet_field(grid, &mut rng, 3, 8.0))?;
        let f = f.scale_real(1.0 / f.norm());
        kato_smoothing_ratio(ham, spectral, &f, s, settings)
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let all_saturated = reports.iter().all(|r| r.saturated);
    Ok(EnsembleReport::from_ratios(
        reports.into_iter().map(|r| r.ratio).collect(),
        all_saturated,
    ))
}

/// Crank–Nicolson for `w' = -i(H - iW) w + g`, i.e. the forced step
/// `w ← A⁻¹(B w + dt/2 (g_k + g_{k+1}))`. Time runs `t_k = t0 + dir·k·dt`;
/// with `conjugate` the source is conjugated, which turns the backward
/// half-line integral into a forward damped problem for `conj v`.
pub(crate) fn forced_cayley(
    stepper: &CayleyStepper,
    source: &SeparableSource,
    t0: f64,
    dir: f64,
    steps: usize,
    conjugate: bool,
    mut visit: impl FnMut(usize, &[Complex64]) -> Result<()>,
) -> Result<()> {
    let n = source.grid().len();
    let dt = stepper.dt();
    let mut w = vec![ZERO; n];
    let mut g_prev = vec![ZERO; n];
    let mut g_next = vec![ZERO; n];
    let mut rhs = vec![ZERO; n];
    let eval = |t: f64, out: &mut [Complex64]| {
        source.eval_into(t, out);
        if conjugate {
            out.iter_mut().for_each(|v| *v = v.conj());
        }
    };
    eval(t0, &mut g_prev);
    visit(0, &w)?;
    for k in 0..steps {
        let t = t0 + dir * (k + 1) as f64 * dt;
        eval(t, &mut g_next);
        stepper.explicit_half(&w, &mut rhs);
        for i in 0..n {
            rhs[i] += (g_prev[i] + g_next[i]) * (0.5 * dt);
        }
        stepper.solve_implicit(&mut rhs);
        std::mem::swap(&mut w, &mut rhs);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite { t });
        }
        visit(k + 1, &w)?;
        std::mem::swap(&mut g_prev, &mut g_next);
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct InhomogeneousReport {
    pub ratio: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// Set when `g ≡ 0`; the ratio is then 0 by convention.
    pub zero_source: bool,
    pub horizon: f64,
    pub saturated: bool,
    pub saturation_time: f64,
}

/// `‖∫₀ᵗ e^{-i(t-t')H} P_c g(t') dt'‖_{L²_t L^{2,-s}} / ‖g‖_{L²_t L^{2,τ}}`.
/// The time window is `[0, end of support + settings.horizon]`.
pub fn inhomogeneous_smoothing_ratio(
    ham: &Hamiltonian,
    spectral: &SpectralData,
    g: &SeparableSource,
    s: f64,
    tau: f64,
    settings: &SmoothingSettings,
) -> Result<InhomogeneousReport> {
    check_s(s)?;
    if !(tau > 0.5) {
        return Err(LabError::InvalidParameter(format!(
            "weight exponent τ must exceed 1/2, got {tau}"
        )));
    }
    settings.validate()?;
    if **g.grid() != **ham.grid() {
        return Err(LabError::GridMismatch);
    }
    let empty = InhomogeneousReport {
        ratio: 0.0,
        numerator: 0.0,
        denominator: 0.0,
        zero_source: true,
        horizon: 0.0,
        saturated: true,
        saturation_time: 0.0,
    };
    let Some((_, end)) = g.support() else {
        return Ok(empty);
    };
    if g.is_zero() {
        return Ok(empty);
    }
    if end < 0.0 {
        return Err(LabError::InvalidParameter(
            "source must be switched on at positive times".into(),
        ));
    }
    let grid = ham.grid();
    let h = grid.spacing();
    let dt = settings.dt;
    let steps = settings.steps(end.max(0.0) + settings.horizon);
    let w_out = japanese_weight(grid, -s);
    let w_in = japanese_weight(grid, tau);

    let mut denom = TimeIntegral::new(dt);
    let mut buf = vec![ZERO; grid.len()];
    for k in 0..=steps {
        g.eval_into(k as f64 * dt, &mut buf);
        denom.push(weighted_sqr(&buf, &w_in, h));
    }
    let (denominator, _, _) = denom.summary(0.0);

    let projected = g.project_pc(spectral)?;
    let stepper = CayleyStepper::new(ham, dt, Some(&settings.sponge))?;
    let mut num = TimeIntegral::new(dt);
    forced_cayley(&stepper, &projected, 0.0, 1.0, steps, false, |_, w| {
        num.push(weighted_sqr(w, &w_out, h));
        Ok(())
    })?;
    let (numerator, saturation_time, _) = num.summary(0.0);
    let saturated = saturation_time <= end.max(0.0) + 0.5 * settings.horizon;
    Ok(InhomogeneousReport {
        ratio: numerator.sqrt() / denominator.sqrt(),
        numerator: numerator.sqrt(),
        denominator: denominator.sqrt(),
        zero_source: false,
        horizon: steps as f64 * dt,
        saturated,
        saturation_time,
    })
}

/// Inhomogeneous ratios for `count` random localized sources switched on
/// inside `[5, 25]`.
pub fn inhomogeneous_ensemble(
    ham: &Hamiltonian,
    spectral: &SpectralData,
    count: usize,
    seed: u64,
    s: f64,
    tau: f64,
    settings: &SmoothingSettings,
) -> Result<EnsembleReport> {
    if count == 0 {
        return Err(LabError::InsufficientSamples { needed: 1, got: 0 });
    }
    let grid = ham.grid();
    let reports = par_map((0..count as u64).collect(), |i| {
        let mut rng = random::rng(seed.wrapping_add(i));
        let g = SeparableSource::random(grid, &mut rng, 5.0, 25.0);
        inhomogeneous_smoothing_ratio(ham, spectral, &g, s, tau, settings)
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let all_saturated = reports.iter().all(|r| r.saturated);
    Ok(EnsembleReport::from_ratios(
        reports.into_iter().map(|r| r.ratio).collect(),
        all_saturated,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::I;
    use crate::operator::Stencil;
    use crate::potential::Potential;

    fn setup(n: usize) -> (Hamiltonian, SpectralData) {
        let g = Arc::new(Grid::dirichlet(60.0, n).unwrap());
        let h = Hamiltonian::new(&g, &Potential::sech2(1.0, 1.0).unwrap(), Stencil::Second);
        let sp = SpectralData::compute(&h).unwrap();
        (h, sp)
    }

    fn short() -> SmoothingSettings {
        SmoothingSettings {
            horizon: 40.0,
            dt: 0.05,
            sponge: Sponge::default(),
        }
    }

    #[test]
    fn bound_state_is_invisible() {
        let (h, sp) = setup(601);
        let r = kato_smoothing_ratio(&h, &sp, &sp.phi, 2.0, &short()).unwrap();
        assert!(r.ratio < 1e-10, "{}", r.ratio);
    }

    #[test]
    fn kato_ratio_is_homogeneous() {
        let (h, sp) = setup(601);
        let f = random::packet_field(h.grid(), &mut random::rng(3), 2, 5.0);
        let base = kato_smoothing_ratio(&h, &sp, &f, 2.0, &short()).unwrap().ratio;
        for c in [Complex64::new(2.0, 0.0), (I * 0.7).exp(), Complex64::new(0.3, 0.0)] {
            let r = kato_smoothing_ratio(&h, &sp, &f.scale(c), 2.0, &short()).unwrap().ratio;
            assert!((r - base).abs() <= 1e-12 * base, "{c}: {r} vs {base}");
        }
    }

    #[test]
    fn kato_integral_grows_with_horizon() {
        let (h, sp) = setup(601);
        let f = random::packet_field(h.grid(), &mut random::rng(9), 2, 5.0);
        let mut prev = 0.0;
        for horizon in [5.0, 10.0, 20.0] {
            let st = SmoothingSettings { horizon, ..short() };
            let r = kato_smoothing_ratio(&h, &sp, &f, 2.0, &st).unwrap().ratio;
            assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn rejects_small_weight() {
        let (h, sp) = setup(301);
        assert!(kato_smoothing_ratio(&h, &sp, &sp.phi, 1.5, &short()).is_err());
        let g = SeparableSource::new(h.grid());
        assert!(inhomogeneous_smoothing_ratio(&h, &sp, &g, 2.0, 0.5, &short()).is_err());
    }

    #[test]
    fn zero_source_returns_flagged_zero() {
        let (h, sp) = setup(301);
        let g = SeparableSource::single(
            TimeEnvelope {
                center: 10.0,
                width: 1.0,
            },
            ComplexField::zeros(h.grid()),
        )
        .unwrap();
        let r = inhomogeneous_smoothing_ratio(&h, &sp, &g, 2.0, 0.6, &short()).unwrap();
        assert!(r.zero_source);
        assert_eq!(r.ratio, 0.0);
    }

    #[test]
    fn inhomogeneous_ratio_is_translation_covariant() {
        let (h, sp) = setup(601);
        let g = SeparableSource::random(h.grid(), &mut random::rng(4), 10.0, 20.0);
        let a = inhomogeneous_smoothing_ratio(&h, &sp, &g, 2.0, 0.6, &short()).unwrap();
        let b = inhomogeneous_smoothing_ratio(&h, &sp, &g.shifted(30.0), 2.0, 0.6, &short())
            .unwrap();
        assert!((a.ratio - b.ratio).abs() < 1e-6 * a.ratio, "{} {}", a.ratio, b.ratio);
        assert!(b.horizon > a.horizon);
    }

    #[test]
    fn forced_step_matches_quadrature_for_free_phase() {
        // g(t) = θ(t)φ with Hφ = -λφ gives w = φ ∫ θ(t') e^{iλ(t-t')} dt'
        let (h, sp) = setup(601);
        let env = TimeEnvelope {
            center: 4.0,
            width: 0.5,
        };
        let g = SeparableSource::single(env, sp.phi.clone()).unwrap();
        let dt = 0.005;
        let stepper = CayleyStepper::new(&h, dt, None).unwrap();
        let steps = 1600;
        let mut last = Vec::new();
        forced_cayley(&stepper, &g, 0.0, 1.0, steps, false, |k, w| {
            if k == steps {
                last = w.to_vec();
            }
            Ok(())
        })
        .unwrap();
        let t = steps as f64 * dt;
        let lam = sp.lambda;
        // truncation at 8 widths is invisible at this tolerance
        let amp = (std::f64::consts::TAU).sqrt()
            * env.width
            * (-0.5 * lam * lam * env.width * env.width).exp()
            * (I * lam * (t - env.center)).exp();
        let w = ComplexField::from_values(h.grid(), last).unwrap();
        let c = sp.coordinate(&w);
        assert!((c - amp).norm() < 1e-4 * amp.norm(), "{c} vs {amp}");
    }
}
