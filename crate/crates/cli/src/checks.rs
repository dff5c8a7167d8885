//! Measurements behind each acceptance criterion. Each routine returns a
//! plain record; `report` turns records into pass/fail lines.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use nlslab::branch::loglog_slope;
use nlslab::diagnostics::{
    commutator_probe, convergence_detectors, cutoff_sweep, pure_power_estimate_check,
    virial_inequality_check, WeightFamily,
};
use nlslab::evolution::{self, local_decay_series, EvolutionConfig, Scheme, SpongeConfig, Trajectory};
use nlslab::field::I;
use nlslab::modulation::{check_discrete_estimate, estimator_disagreement, residual_series, Decomposer};
use nlslab::random;
use nlslab::scattering::duhamel::{duhamel_identity_check, gaussian_source, DuhamelSettings};
use nlslab::scattering::smoothing::{kato_ensemble, kato_smoothing_ratio};
use nlslab::scattering::{
    compute_jost, limiting_absorption_norm, resonance_indicator, transmission, JostPair, ResolventKernel,
    ResolventSign, ResonanceClass, Side,
};
use nlslab::{ComplexField, Grid, Hamiltonian, LabError, Potential, SpectralData, Stencil};

use crate::config::{GridConfig, RunConfig};
use crate::error::CliError;

type Res<T> = std::result::Result<T, CliError>;

fn dirichlet(l: f64, n: usize) -> Res<Arc<Grid>> {
    Ok(Arc::new(Grid::dirichlet(l, n)?))
}

fn deep() -> Potential {
    Potential::sech2(2.0, 1.0).expect("valid depth")
}

fn shallow() -> Potential {
    Potential::sech2(1.0, 1.0).expect("valid depth")
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenCheck {
    pub deep_lambda: f64,
    pub shallow_lambda: f64,
    pub zero_no_bound_state: bool,
}

pub fn eigen_check(grid: &GridConfig) -> Res<EigenCheck> {
    let g = dirichlet(grid.half_width, grid.n)?;
    let lam = |v: &Potential| -> Res<f64> {
        let h = Hamiltonian::new(&g, v, Stencil::Second);
        Ok(SpectralData::cached(&h)?.summary().extrapolated_lambda)
    };
    let zero = Hamiltonian::new(&g, &Potential::zero(), Stencil::Second);
    Ok(EigenCheck {
        deep_lambda: lam(&deep())?,
        shallow_lambda: lam(&shallow())?,
        zero_no_bound_state: matches!(SpectralData::compute(&zero), Err(LabError::NoBoundState)),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WronskianSample {
    pub potential: String,
    pub k: f64,
    pub variation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JostCheck {
    /// `sup_x |m₊(x,1) - (1 + i tanh x)/(1 + i)|`.
    pub m_plus_error: f64,
    pub t1_error: f64,
    pub wronskian: Vec<WronskianSample>,
}

pub fn jost_check(l: f64, n: usize) -> Res<JostCheck> {
    let g = dirichlet(l, n)?;
    let v = deep();
    let s = compute_jost(&v, &g, Complex64::new(1.0, 0.0), Side::Plus)?;
    let m_plus_error = (0..g.len())
        .map(|j| {
            let want = Complex64::new(1.0, g.x(j).tanh()) / Complex64::new(1.0, 1.0);
            (s.m()[j] - want).norm()
        })
        .fold(0.0, f64::max);
    let t1 = JostPair::compute(&v, &g, Complex64::new(1.0, 0.0))?.transmission()?;
    let mut wronskian = Vec::new();
    for pot in [Potential::zero(), deep(), shallow()] {
        for k in [0.5, 1.0, 2.0] {
            wronskian.push(WronskianSample {
                potential: pot.describe(),
                k,
                variation: transmission(&pot, &g, k)?.wronskian_variation,
            });
        }
    }
    Ok(JostCheck {
        m_plus_error,
        t1_error: (t1 - I).norm(),
        wronskian,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceCheck {
    pub zero: ResonanceClass,
    pub deep: ResonanceClass,
    pub shallow: ResonanceClass,
    pub shallow_score: f64,
    pub shallow_probe_transmission: f64,
}

pub fn resonance_check(l: f64, n: usize) -> Res<ResonanceCheck> {
    let g = dirichlet(l, n)?;
    let sh = resonance_indicator(&shallow(), &g)?;
    Ok(ResonanceCheck {
        zero: resonance_indicator(&Potential::zero(), &g)?.class,
        deep: resonance_indicator(&deep(), &g)?.class,
        shallow: sh.class,
        shallow_score: sh.score,
        shallow_probe_transmission: sh.probe_transmission,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LapRow {
    pub lambda: f64,
    /// Norms at `a = 0, 0.01, 0.1`.
    pub norms: [f64; 3],
    /// `|N(0.01) - N(0)| / N(0)`.
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventCheck {
    pub columns: usize,
    pub max_column_defect: f64,
    /// `h²`, the second-order stencil scale.
    pub stencil_scale: f64,
    pub conjugation_error: f64,
    pub lap: Vec<LapRow>,
    pub lap_sup: f64,
}

pub const LAP_LAMBDAS: [f64; 4] = [0.0, 0.25, 1.0, 4.0];

pub fn resolvent_check(l: f64, n: usize, lap_n: usize) -> Res<ResolventCheck> {
    let g = dirichlet(l, n)?;
    let v = shallow();
    let ham = Hamiltonian::new(&g, &v, Stencil::Second);
    let cols: Vec<usize> = (1..=24).map(|i| i * (n - 1) / 25).collect();
    let mut max_column_defect: f64 = 0.0;
    let mut conjugation_error: f64 = 0.0;
    for lambda in [0.25, 1.0] {
        let plus = ResolventKernel::new(&v, &g, lambda, ResolventSign::Plus)?;
        let minus = ResolventKernel::new(&v, &g, lambda, ResolventSign::Minus)?;
        for &j in &cols {
            max_column_defect = max_column_defect.max(plus.column_defect(&ham, j)?);
            for i in (0..n).step_by(7) {
                conjugation_error = conjugation_error.max((minus.entry(i, j) - plus.entry(i, j).conj()).norm());
            }
        }
    }
    let gl = dirichlet(l, lap_n)?;
    let mut lap = Vec::new();
    for lambda in LAP_LAMBDAS {
        let mut norms = [0.0; 3];
        for (slot, a) in norms.iter_mut().zip([0.0, 0.01, 0.1]) {
            *slot = limiting_absorption_norm(&v, &gl, lambda, a, 2.0, 2.0)?;
        }
        lap.push(LapRow {
            lambda,
            gap: rel_gap(norms[1], norms[0]),
            norms,
        });
    }
    let lap_sup = lap.iter().flat_map(|r| r.norms).fold(0.0, f64::max);
    Ok(ResolventCheck {
        columns: 2 * cols.len(),
        max_column_defect,
        stencil_scale: g.spacing() * g.spacing(),
        conjugation_error,
        lap,
        lap_sup,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KatoCheck {
    pub samples: usize,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    pub all_finite: bool,
    pub all_saturated: bool,
    pub homogeneity_error: f64,
    pub phase_error: f64,
}

pub fn kato_check(cfg: &RunConfig) -> Res<KatoCheck> {
    let sm = &cfg.smoothing;
    let g = dirichlet(sm.half_width, sm.n)?;
    let ham = Hamiltonian::new(&g, &shallow(), Stencil::Second);
    let sp = SpectralData::cached(&ham)?;
    let settings = sm.settings();
    let s = cfg.weights.s;
    let ens = kato_ensemble(&ham, &sp, sm.samples, cfg.seed, s, &settings)?;
    let f = random::packet_field(&g, &mut random::rng(cfg.seed), 3, 8.0);
    let base = kato_smoothing_ratio(&ham, &sp, &f, s, &settings)?.ratio;
    let scaled = kato_smoothing_ratio(&ham, &sp, &f.scale_real(2.0), s, &settings)?.ratio;
    let rotated = kato_smoothing_ratio(&ham, &sp, &f.scale((I * 0.7).exp()), s, &settings)?.ratio;
    Ok(KatoCheck {
        samples: ens.ratios.len(),
        min: ens.min,
        max: ens.max,
        spread: ens.spread,
        all_finite: ens.all_finite,
        all_saturated: ens.all_saturated,
        homogeneity_error: rel_gap(scaled, base),
        phase_error: rel_gap(rotated, base),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DuhamelCheck {
    pub base: f64,
    pub refined: f64,
    pub base_lambda_nodes: usize,
    pub refined_lambda_nodes: usize,
}

/// The refined run halves `dt` and doubles the λ intervals; it also doubles
/// the box at fixed `h`, since the discrepancy floor is set by sponge
/// reflections.
pub fn duhamel_check() -> Res<DuhamelCheck> {
    let run = |l: f64, n: usize, dt: f64, intervals: usize| -> Res<(f64, usize)> {
        let g = dirichlet(l, n)?;
        let ham = Hamiltonian::new(&g, &shallow(), Stencil::Second);
        let sp = SpectralData::cached(&ham)?;
        let st = DuhamelSettings {
            dt,
            lambda_intervals: intervals,
            decay: 10.0,
            ..DuhamelSettings::default()
        };
        let r = duhamel_identity_check(&ham, &gaussian_source(&sp, 10.0)?, &st)?;
        Ok((r.discrepancy, r.lambda_nodes))
    };
    let (base, base_lambda_nodes) = run(30.0, 513, 0.04, 400)?;
    let (refined, refined_lambda_nodes) = run(60.0, 1025, 0.02, 800)?;
    Ok(DuhamelCheck {
        base,
        refined,
        base_lambda_nodes,
        refined_lambda_nodes,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchCheck {
    pub p: f64,
    pub radii: Vec<f64>,
    pub max_residual: f64,
    pub gauge_error: f64,
    pub deviation_slope: f64,
    pub d1_slope: f64,
    pub d2_slope: f64,
    /// Slope of `|E(|z|²) + λ|` against `|z|`.
    pub energy_slope: f64,
    pub energy_gap: Vec<f64>,
}

pub fn branch_check(cfg: &RunConfig) -> Res<BranchCheck> {
    let model = cfg.model()?;
    let branch = model.decomposer.branch();
    let radii: Vec<f64> = (0..9).map(|i| 1e-3 * 10f64.powf(i as f64 / 4.0)).collect();
    let rows = branch.table(&radii)?;
    let lambda = model.spectral.lambda;
    let col = |f: fn(&nlslab::branch::BranchRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let energy_gap: Vec<f64> = rows.iter().map(|r| (r.e + lambda).abs()).collect();
    let z = Complex64::new(0.05, 0.0);
    let rot = (I * std::f64::consts::FRAC_PI_3).exp();
    let a = branch.solve(z)?;
    let b = branch.solve(z * rot)?;
    Ok(BranchCheck {
        p: cfg.nonlinearity.p,
        max_residual: rows.iter().map(|r| r.residual).fold(0.0, f64::max),
        gauge_error: b.q.max_abs_diff(&a.q.scale(rot)),
        deviation_slope: loglog_slope(&radii, &col(|r| r.deviation)),
        d1_slope: loglog_slope(&radii, &col(|r| r.d1_deviation)),
        d2_slope: loglog_slope(&radii, &col(|r| r.d2_deviation)),
        energy_slope: loglog_slope(&radii, &energy_gap),
        energy_gap,
        radii,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundtripCheck {
    pub samples: usize,
    pub max_z_error: f64,
    pub max_eta_error: f64,
    pub gauge_error: f64,
}

/// Random `(z, η)` with `|z| ≤ 0.1`, `Pη = 0`, `‖η‖_{H¹} ≤ 0.05`.
pub fn roundtrip_check(decomposer: &Decomposer, samples: usize, seed: u64) -> Res<RoundtripCheck> {
    let sp = decomposer.branch().spectral();
    let grid = sp.grid();
    let mut rng = random::rng(seed);
    let mut out = RoundtripCheck {
        samples,
        max_z_error: 0.0,
        max_eta_error: 0.0,
        gauge_error: 0.0,
    };
    for _ in 0..samples {
        let z0 = Complex64::from_polar(0.1 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU));
        let size = rng.gen_range(0.0..0.05);
        let raw = random::packet_field(grid, &mut rng, 2, 6.0);
        let pc = sp.project_pc(&raw)?;
        let eta0 = pc.scale_real(size / pc.h1_norm());
        let u = &decomposer.branch().solve(z0)?.q + &eta0;
        let (s, _) = decomposer.decompose(&u, 0.0)?;
        out.max_z_error = out.max_z_error.max((s.z - z0).norm());
        out.max_eta_error = out.max_eta_error.max(s.eta.max_abs_diff(&eta0));
        let rot = (I * rng.gen_range(0.0..std::f64::consts::TAU)).exp();
        let (r, _) = decomposer.decompose(&u.scale(rot), 0.0)?;
        out.gauge_error = out
            .gauge_error
            .max((r.z - s.z * rot).norm())
            .max(r.eta.max_abs_diff(&s.eta.scale(rot)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionCheck {
    pub scheme: Scheme,
    /// `sup_t ‖u(t) - e^{-iEt}Q[z₀]‖` over `[0, 10]`.
    pub stationary_error: f64,
    /// `‖u_{dt} - u_{dt/2}‖ / ‖u_{dt/2} - u_{dt/4}‖`.
    pub order_ratio: f64,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub conservation_horizon: f64,
}

pub fn evolution_check(cfg: &RunConfig, conservation_horizon: f64) -> Res<EvolutionCheck> {
    let model = cfg.model()?;
    let d = &model.decomposer;
    let scheme = cfg.evolution.scheme;
    let base = EvolutionConfig {
        sponge: SpongeConfig::default(),
        ..cfg.evolution
    };
    let pt = d.branch().solve(Complex64::new(0.05, 0.0))?;
    let tr = evolution::run(
        d,
        &pt.q,
        &EvolutionConfig {
            t_final: 10.0,
            snapshot_stride: (0.5 / base.dt).round().max(1.0) as usize,
            ..base
        },
    )?;
    let stationary_error = tr
        .snapshots
        .iter()
        .map(|s| (&s.u - &pt.q.scale((-I * pt.e * s.t).exp())).norm())
        .fold(0.0, f64::max);

    let u0 = model.initial_field(&cfg.initial)?;
    let tr = evolution::run(
        d,
        &u0,
        &EvolutionConfig {
            t_final: conservation_horizon,
            snapshot_stride: (1.0 / base.dt).round().max(1.0) as usize,
            ..base
        },
    )?;
    let (mass_drift, energy_drift) = tr.conservation_drift();
    Ok(EvolutionCheck {
        scheme,
        stationary_error,
        order_ratio: order_ratio(scheme)?,
        mass_drift,
        energy_drift,
        conservation_horizon,
    })
}

/// Three-level self-convergence on a moderately nonlinear state, where the
/// splitting error dominates rounding.
fn order_ratio(scheme: Scheme) -> Res<f64> {
    let cfg = RunConfig {
        grid: GridConfig {
            half_width: 30.0,
            n: 801,
            ..GridConfig::default()
        },
        ..RunConfig::default()
    };
    let model = cfg.model()?;
    let sp = &model.spectral;
    let raw = ComplexField::from_fn(model.grid(), |x| (-(x - 2.0) * (x - 2.0) / 2.0).exp() * (I * x).exp());
    let pc = sp.project_pc(&raw)?;
    let u0 = &pc.scale_real(0.15 / pc.h1_norm()) + &sp.phi.scale_real(0.1);
    let fin = |dt: f64| -> Res<ComplexField> {
        let c = EvolutionConfig {
            t_final: 1.0,
            dt,
            snapshot_stride: 1_000_000,
            scheme,
            ..EvolutionConfig::default()
        };
        Ok(evolution::run(&model.decomposer, &u0, &c)?.snapshots.pop().expect("final snapshot").u)
    };
    let (a, b, c) = (fin(0.02)?, fin(0.01)?, fin(0.005)?);
    Ok((&a - &b).norm() / (&b - &c).norm())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulationRun {
    pub dt: f64,
    pub discrete_max: f64,
    pub discrete_median: f64,
    pub dropped: usize,
    pub estimator_disagreement: f64,
    pub c_emp: Option<f64>,
    pub rate_disagreement: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommutatorSummary {
    pub samples: usize,
    pub fitted_c: f64,
    pub fitted_c_over_a: f64,
    pub min_margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementCheck {
    pub delta: f64,
    pub horizon: f64,
    pub coarse: ModulationRun,
    pub fine: ModulationRun,
    pub commutator: CommutatorSummary,
    pub pure_power_samples: usize,
    pub pure_power_max: f64,
}

fn snapshot_config(cfg: &RunConfig, dt: f64, horizon: f64) -> EvolutionConfig {
    EvolutionConfig {
        dt,
        t_final: horizon,
        snapshot_stride: (0.5 / dt).round().max(1.0) as usize,
        ..cfg.evolution
    }
}

pub fn modulation_run(cfg: &RunConfig, d: &Decomposer, u0: &ComplexField, ev: &EvolutionConfig) -> Res<ModulationRun> {
    let tr = evolution::run(d, u0, ev)?;
    modulation_summary(cfg, d, &tr)
}

pub fn modulation_summary(cfg: &RunConfig, d: &Decomposer, tr: &Trajectory) -> Res<ModulationRun> {
    let recs = residual_series(tr, d, cfg.weights.kappa)?;
    let est = check_discrete_estimate(&recs, cfg.diagnose.delta, cfg.nonlinearity.p);
    let wf = WeightFamily::build(cfg.weights, tr.grid())?;
    let vr = virial_inequality_check(tr, &recs, d, &wf)?;
    Ok(ModulationRun {
        dt: tr.config.dt,
        discrete_max: est.max,
        discrete_median: est.median,
        dropped: est.dropped,
        estimator_disagreement: estimator_disagreement(&recs),
        c_emp: vr.c_emp,
        rate_disagreement: vr.rate_disagreement,
    })
}

pub fn refinement_check(cfg: &RunConfig) -> Res<RefinementCheck> {
    let model = cfg.model()?;
    let u0 = model.initial_field(&cfg.initial)?;
    let horizon = cfg.diagnose.refine_horizon;
    let dt = cfg.evolution.dt;
    let coarse = modulation_run(cfg, &model.decomposer, &u0, &snapshot_config(cfg, dt, horizon))?;
    let fine = modulation_run(cfg, &model.decomposer, &u0, &snapshot_config(cfg, 0.5 * dt, horizon))?;

    let grid = model.grid();
    let wf = WeightFamily::build(cfg.weights, grid)?;
    let mut rng = random::rng(cfg.seed);
    let ens: Vec<ComplexField> = (0..cfg.diagnose.commutator_samples)
        .map(|_| random::packet_field(grid, &mut rng, 3, 10.0))
        .collect();
    let cp = commutator_probe(&ens, &wf)?;
    let ens: Vec<ComplexField> = (0..cfg.diagnose.pure_power_samples)
        .map(|_| random::compact_field(grid, &mut rng, 6.0))
        .collect();
    let pp = pure_power_estimate_check(&ens, &wf, cfg.nonlinearity.p);
    Ok(RefinementCheck {
        delta: cfg.diagnose.delta,
        horizon,
        coarse,
        fine,
        commutator: CommutatorSummary {
            samples: cp.samples,
            fitted_c: cp.fitted_c,
            fitted_c_over_a: cp.fitted_c_over_a,
            min_margin: cp.min_margin,
        },
        pure_power_samples: pp.ratios.len(),
        pure_power_max: pp.max,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub window_end: f64,
    pub u0_h1: f64,
    pub orbital_constant: f64,
    pub local_final_over_peak: f64,
    pub r_plus: f64,
    pub deviation: f64,
    pub phase_error: f64,
    pub h1_tail_fraction: f64,
    pub b_sweep: Vec<f64>,
    pub w_norms: Vec<f64>,
    pub w_monotone_decreasing: bool,
}

pub fn theorem_check(cfg: &RunConfig, d: &Decomposer, tr: &Trajectory) -> Res<TheoremCheck> {
    let cv = convergence_detectors(tr, d, cfg.weights.a)?;
    let decay = local_decay_series(tr, cfg.weights.a);
    let sweep = cutoff_sweep(tr, d.branch().spectral(), cfg.weights, &cfg.diagnose.b_sweep)?;
    Ok(TheoremCheck {
        window_end: cv.window_end,
        u0_h1: tr.snapshots[0].u.h1_norm(),
        orbital_constant: cv.orbital_constant,
        local_final_over_peak: decay.final_over_peak,
        r_plus: cv.r_plus,
        deviation: cv.deviation,
        phase_error: cv.phase_error,
        h1_tail_fraction: decay.h1_tail_fraction,
        b_sweep: cfg.diagnose.b_sweep.clone(),
        w_norms: sweep.w_norms,
        w_monotone_decreasing: sweep.monotone_decreasing,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeterminismCheck {
    pub files: Vec<String>,
    pub mismatched: Vec<String>,
    pub identical: bool,
}

/// Compares every regular file under `a` with its counterpart under `b`.
pub fn compare_dirs(a: &Path, b: &Path) -> Res<DeterminismCheck> {
    let mut files = Vec::new();
    collect(a, a, &mut files)?;
    files.sort();
    let mut mismatched = Vec::new();
    for f in &files {
        let x = std::fs::read(a.join(f))?;
        let same = std::fs::read(b.join(f)).map(|y| y == x).unwrap_or(false);
        if !same {
            mismatched.push(f.clone());
        }
    }
    let mut other = Vec::new();
    collect(b, b, &mut other)?;
    for f in other {
        if !files.contains(&f) {
            mismatched.push(f);
        }
    }
    Ok(DeterminismCheck {
        identical: mismatched.is_empty() && !files.is_empty(),
        files,
        mismatched,
    })
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<String>) -> Res<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("under root");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}
