//! Subcommand bodies. Every command writes into its own output directory.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nlslab::branch::{loglog_slope, BranchRow};
use nlslab::diagnostics::{virial_inequality_check, WeightFamily};
use nlslab::evolution::{self, local_decay_series, mass_equipartition_check};
use nlslab::io::{load_trajectory, save_trajectory, ModulationRow};
use nlslab::modulation::residual_series;
use nlslab::scattering::resolvent::SIGN_CONVENTION;
use nlslab::scattering::smoothing::{inhomogeneous_ensemble, kato_ensemble, EnsembleReport};
use nlslab::scattering::{resonance_indicator, transmission, ResonanceClass, ResonanceReport};
use nlslab::SpectralData;

use crate::checks::{self, ModulationRun, TheoremCheck};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{read_json, write_json, write_rows, Stamp};
use crate::report::{self, Report, CHECK_DIR, CHECK_FILES};

type Res<T> = std::result::Result<T, CliError>;

pub const SPECTRUM_FILE: &str = "spectrum.json";
pub const SCATTER_CSV: &str = "scatter.csv";
pub const SCATTER_FILE: &str = "scatter.json";
pub const BRANCH_CSV: &str = "branch.csv";
pub const BRANCH_FILE: &str = "branch.json";
pub const SMOOTHING_FILE: &str = "smoothing.json";
pub const EVOLVE_FILE: &str = "evolve.json";
pub const DIAGNOSE_FILE: &str = "diagnose.json";
pub const MODULATION_CSV: &str = "modulation.csv";
pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub lambda: f64,
    pub lambda_refined: f64,
    pub extrapolated_lambda: f64,
    pub n_negative: usize,
    pub multiple_eigenvalues: bool,
    pub residual: f64,
    pub resonance_class: ResonanceClass,
    pub resonance_score: f64,
    pub resolvent_sign_convention: f64,
}

pub fn spectrum(cfg: &RunConfig, out: &Path) -> Res<SpectrumResult> {
    let ham = cfg.hamiltonian()?;
    let sp = SpectralData::cached(&ham)?;
    let s = sp.summary();
    let res = resonance_indicator(ham.potential(), ham.grid())?;
    let result = SpectrumResult {
        lambda: s.lambda,
        lambda_refined: s.lambda_refined,
        extrapolated_lambda: s.extrapolated_lambda,
        n_negative: s.n_negative,
        multiple_eigenvalues: s.multiple_eigenvalues,
        residual: s.residual,
        resonance_class: res.class,
        resonance_score: res.score,
        resolvent_sign_convention: SIGN_CONVENTION,
    };
    write_json(out, SPECTRUM_FILE, cfg, &result)?;
    Ok(result)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatterRow {
    pub k: f64,
    pub t_re: f64,
    pub t_im: f64,
    pub t_abs: f64,
    pub r_abs: Option<f64>,
    pub wronskian_re: f64,
    pub wronskian_im: f64,
    pub wronskian_variation: f64,
}

pub fn scatter(cfg: &RunConfig, out: &Path) -> Res<Vec<ScatterRow>> {
    let grid = cfg.grid()?;
    let v = cfg.potential()?;
    let sc = cfg.scatter;
    let ks: Vec<f64> = (0..sc.count)
        .map(|i| sc.k_min + (sc.k_max - sc.k_min) * i as f64 / (sc.count - 1) as f64)
        .collect();
    let rows = ks
        .iter()
        .map(|&k| {
            let s = transmission(&v, &grid, k)?;
            Ok(ScatterRow {
                k,
                t_re: s.transmission[0],
                t_im: s.transmission[1],
                t_abs: s.transmission_modulus,
                r_abs: s.reflection_modulus,
                wronskian_re: s.wronskian[0],
                wronskian_im: s.wronskian[1],
                wronskian_variation: s.wronskian_variation,
            })
        })
        .collect::<Res<Vec<_>>>()?;
    write_rows(out, SCATTER_CSV, cfg, &rows)?;
    let res: ResonanceReport = resonance_indicator(&v, &grid)?;
    write_json(out, SCATTER_FILE, cfg, &res)?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSummary {
    pub lambda: f64,
    pub a0: f64,
    pub p: f64,
    pub deviation_slope: f64,
    pub d1_slope: f64,
    pub d2_slope: f64,
    pub energy_slope: f64,
    pub max_residual: f64,
}

pub fn branch(cfg: &RunConfig, out: &Path) -> Res<BranchSummary> {
    let model = cfg.model()?;
    let b = model.decomposer.branch();
    let radii = &cfg.branch.radii;
    if radii.len() < 2 || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(CliError::Validation("branch.radii needs at least two positive radii".into()));
    }
    let rows: Vec<BranchRow> = b.table(radii)?;
    write_rows(out, BRANCH_CSV, cfg, &rows)?;
    let lambda = model.spectral.lambda;
    let col = |f: fn(&BranchRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let summary = BranchSummary {
        lambda,
        a0: b.a0(),
        p: cfg.nonlinearity.p,
        deviation_slope: loglog_slope(radii, &col(|r| r.deviation)),
        d1_slope: loglog_slope(radii, &col(|r| r.d1_deviation)),
        d2_slope: loglog_slope(radii, &col(|r| r.d2_deviation)),
        energy_slope: loglog_slope(radii, &rows.iter().map(|r| (r.e + lambda).abs()).collect::<Vec<_>>()),
        max_residual: rows.iter().map(|r| r.residual).fold(0.0, f64::max),
    };
    write_json(out, BRANCH_FILE, cfg, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingResult {
    pub s: f64,
    pub tau: f64,
    pub kato: EnsembleReport,
    pub inhomogeneous: EnsembleReport,
}

/// Kato and inhomogeneous smoothing ensembles on the configured potential,
/// using the dedicated smoothing box.
pub fn smoothing(cfg: &RunConfig, out: &Path) -> Res<SmoothingResult> {
    let sm = &cfg.smoothing;
    let grid = std::sync::Arc::new(nlslab::Grid::dirichlet(sm.half_width, sm.n)?);
    let ham = nlslab::Hamiltonian::new(&grid, &cfg.potential()?, cfg.grid.stencil);
    let sp = SpectralData::cached(&ham)?;
    let settings = sm.settings();
    let w = cfg.weights;
    let result = SmoothingResult {
        s: w.s,
        tau: w.tau,
        kato: kato_ensemble(&ham, &sp, sm.samples, cfg.seed, w.s, &settings)?,
        inhomogeneous: inhomogeneous_ensemble(&ham, &sp, sm.inhomogeneous_samples, cfg.seed, w.s, w.tau, &settings)?,
    };
    write_json(out, SMOOTHING_FILE, cfg, &result)?;
    Ok(result)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolveSummary {
    pub steps: usize,
    pub snapshots: usize,
    pub t_end: f64,
    pub trust_end: f64,
    pub wavefront_time: Option<f64>,
    pub truncated: Option<String>,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub absorbed: f64,
    pub z_final: [f64; 2],
}

pub fn evolve(cfg: &RunConfig, out: &Path) -> Res<EvolveSummary> {
    let model = cfg.model()?;
    let u0 = model.initial_field(&cfg.initial)?;
    let traj = evolution::run(&model.decomposer, &u0, &cfg.evolution)?;
    save_trajectory(out, &traj, &Stamp::new(cfg).provenance())?;
    let last = traj.snapshots.last().expect("initial snapshot");
    let (mass_drift, energy_drift) = traj.conservation_drift();
    let z: Complex64 = *traj.z_series.last().expect("initial z");
    let summary = EvolveSummary {
        steps: traj.z_series.len() - 1,
        snapshots: traj.snapshots.len(),
        t_end: last.t,
        trust_end: traj.trust_end(),
        wavefront_time: traj.wavefront_time,
        truncated: traj.truncated.clone(),
        mass_drift,
        energy_drift,
        absorbed: last.absorbed,
        z_final: [z.re, z.im],
    };
    write_json(out, EVOLVE_FILE, cfg, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub z_abs: f64,
    pub eta_h1: f64,
    pub sigma_a_sq: f64,
    pub sigma_tilde_sq: f64,
    pub virial: f64,
    pub virial_rate_fd: f64,
    pub virial_rate_formula: f64,
    pub local_mass: f64,
    pub equipartition_drift: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnoseResult {
    pub modulation: ModulationRun,
    pub theorem: TheoremCheck,
    pub virial_lhs: f64,
    pub virial_rhs: f64,
    pub virial_anomaly: bool,
    pub equipartition_late_ratio: f64,
    pub local_decreasing_fraction: f64,
}

/// Reads the run's own config from `evolve.json` and re-decomposes the saved
/// fields.
pub fn diagnose(run: &Path, out: &Path) -> Res<DiagnoseResult> {
    let env = read_json::<EvolveSummary>(&run.join(EVOLVE_FILE))?;
    let cfg = env.config;
    let model = cfg.model()?;
    let d = &model.decomposer;
    let traj = load_trajectory(run, d)?;
    let recs = residual_series(&traj, d, cfg.weights.kappa)?;
    let rows: Vec<ModulationRow> = recs.iter().map(ModulationRow::from).collect();
    write_rows(out, MODULATION_CSV, &cfg, &rows)?;

    let modulation = checks::modulation_summary(&cfg, d, &traj)?;
    let theorem = checks::theorem_check(&cfg, d, &traj)?;
    let wf = WeightFamily::build(cfg.weights, traj.grid())?;
    let vr = virial_inequality_check(&traj, &recs, d, &wf)?;
    let eq = mass_equipartition_check(&traj);
    let ld = local_decay_series(&traj, cfg.weights.a);

    let trusted = traj.trusted();
    let diag: Vec<DiagnosticsRow> = trusted
        .iter()
        .enumerate()
        .map(|(i, s)| DiagnosticsRow {
            t: s.t,
            z_abs: s.state.z.norm(),
            eta_h1: s.state.eta.h1_norm(),
            sigma_a_sq: vr.sigma_a_sq.get(i).copied().unwrap_or(f64::NAN),
            sigma_tilde_sq: vr.sigma_tilde_sq.get(i).copied().unwrap_or(f64::NAN),
            virial: vr.virial.get(i).copied().unwrap_or(f64::NAN),
            virial_rate_fd: vr.rate_fd.get(i).copied().unwrap_or(f64::NAN),
            virial_rate_formula: vr.rate_formula.get(i).copied().unwrap_or(f64::NAN),
            local_mass: ld.local_mass.get(i).copied().unwrap_or(f64::NAN),
            equipartition_drift: eq.drift.get(i).copied().unwrap_or(f64::NAN),
        })
        .collect();
    write_rows(out, DIAGNOSTICS_CSV, &cfg, &diag)?;

    let result = DiagnoseResult {
        modulation,
        theorem,
        virial_lhs: vr.lhs,
        virial_rhs: vr.rhs,
        virial_anomaly: vr.anomaly,
        equipartition_late_ratio: eq.late_ratio,
        local_decreasing_fraction: ld.decreasing_fraction,
    };
    write_json(out, DIAGNOSE_FILE, &cfg, &result)?;
    Ok(result)
}

pub fn report(run: &Path, out: &Path) -> Res<Report> {
    let rep = report::evaluate_dir(run)?;
    std::fs::create_dir_all(out)?;
    let text = serde_json::to_string_pretty(&rep)?;
    std::fs::write(out.join(REPORT_FILE), text + "\n")?;
    Ok(rep)
}

fn write_check<T: Serialize>(out: &Path, id: usize, cfg: &RunConfig, value: &T) -> Res<()> {
    write_json(&out.join(CHECK_DIR), CHECK_FILES[id - 1], cfg, value)
}

/// The cheap subset rerun by the determinism check: spectrum, scattering,
/// branch table and a short evolution with its diagnosis.
pub fn determinism_probe(cfg: &RunConfig, out: &Path) -> Res<()> {
    spectrum(cfg, out)?;
    scatter(cfg, out)?;
    branch(cfg, out)?;
    let mut short = cfg.clone();
    short.evolution.t_final = cfg.evolution.t_final.min(5.0);
    short.evolution.snapshot_stride = ((0.25 / short.evolution.dt).round() as usize).max(1);
    let run = out.join("run");
    evolve(&short, &run)?;
    diagnose(&run, &run)?;
    Ok(())
}

/// Runs every command and check, then writes `report.json`.
pub fn suite(cfg: &RunConfig, out: &Path, progress: &mut dyn FnMut(&str)) -> Res<Report> {
    std::fs::create_dir_all(out)?;
    progress("spectrum");
    spectrum(cfg, out)?;
    progress("scatter");
    scatter(cfg, out)?;
    progress("branch");
    branch(cfg, out)?;
    progress("smoothing");
    smoothing(cfg, out)?;

    let (l, n) = (cfg.grid.half_width, cfg.grid.n);
    progress("check: eigenvalues");
    write_check(out, 1, cfg, &checks::eigen_check(&cfg.grid)?)?;
    progress("check: jost");
    write_check(out, 2, cfg, &checks::jost_check(l, n)?)?;
    progress("check: resonance");
    write_check(out, 3, cfg, &checks::resonance_check(l, n)?)?;
    progress("check: resolvent");
    write_check(out, 4, cfg, &checks::resolvent_check(l, n, n.min(1025))?)?;
    progress("check: kato");
    write_check(out, 5, cfg, &checks::kato_check(cfg)?)?;
    progress("check: duhamel");
    write_check(out, 6, cfg, &checks::duhamel_check()?)?;
    progress("check: branch");
    write_check(out, 7, cfg, &checks::branch_check(cfg)?)?;
    progress("check: roundtrip");
    let model = cfg.model()?;
    write_check(out, 8, cfg, &checks::roundtrip_check(&model.decomposer, 100, cfg.seed)?)?;
    progress("check: evolution");
    write_check(out, 9, cfg, &checks::evolution_check(cfg, 50.0)?)?;
    progress("check: refinement");
    write_check(out, 10, cfg, &checks::refinement_check(cfg)?)?;

    progress("evolve");
    let run = out.join("run");
    evolve(cfg, &run)?;
    progress("diagnose");
    let diag = diagnose(&run, &run)?;
    write_check(out, 12, cfg, &diag.theorem)?;

    progress("determinism");
    let det = out.join("determinism");
    let (a, b) = (det.join("a"), det.join("b"));
    for d in [&a, &b] {
        if d.exists() {
            std::fs::remove_dir_all(d)?;
        }
        determinism_probe(cfg, d)?;
    }
    write_check(out, 13, cfg, &checks::compare_dirs(&a, &b)?)?;

    progress("report");
    report(out, out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub config: PathBuf,
    pub out: PathBuf,
    pub error: Option<String>,
}

/// Evolves and diagnoses each config on the worker pool, one directory per
/// config named after its file stem.
pub fn sweep(configs: &[PathBuf], overrides: &[String], seed: Option<u64>, out: &Path) -> Res<Vec<SweepEntry>> {
    let mut stems = std::collections::HashSet::new();
    for c in configs {
        let stem = c.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if stem.is_empty() || !stems.insert(stem.clone()) {
            return Err(CliError::Validation(format!("sweep configs need distinct file stems, got `{stem}`")));
        }
    }
    let loaded = configs
        .iter()
        .map(|p| {
            let mut cfg = RunConfig::load(Some(p), overrides)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            Ok((p.clone(), cfg))
        })
        .collect::<Res<Vec<_>>>()?;
    let entries: Vec<SweepEntry> = loaded
        .into_par_iter()
        .map(|(path, cfg)| {
            let dir = out.join(path.file_stem().expect("checked above"));
            let error = evolve(&cfg, &dir)
                .and_then(|_| diagnose(&dir, &dir))
                .err()
                .map(|e| e.to_string());
            SweepEntry {
                config: path,
                out: dir,
                error,
            }
        })
        .collect();
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&entries)? + "\n")?;
    Ok(entries)
}
