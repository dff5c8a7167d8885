//! Pass/fail evaluation of the acceptance criteria at pinned tolerances.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use nlslab::scattering::ResonanceClass;

use crate::checks::*;
use crate::error::CliError;
use crate::output::read_json;

pub const EIGEN_TOL: f64 = 1e-6;
pub const M_PLUS_TOL: f64 = 1e-6;
pub const T1_TOL: f64 = 1e-5;
pub const WRONSKIAN_TOL: f64 = 1e-6;
pub const PROBE_T_MAX: f64 = 0.1;
pub const CONJ_TOL: f64 = 1e-12;
pub const MIN_COLUMNS: usize = 20;
pub const LAP_GAP: f64 = 0.02;
pub const KATO_SAMPLES: usize = 50;
pub const KATO_SPREAD: f64 = 50.0;
pub const HOMOGENEITY_TOL: f64 = 1e-12;
pub const DUHAMEL_TOL: f64 = 0.05;
pub const NEWTON_TOL: f64 = 1e-10;
pub const GAUGE_TOL: f64 = 1e-14;
pub const SLOPE_TOL: f64 = 0.1;
pub const ROUNDTRIP_SAMPLES: usize = 100;
pub const ROUNDTRIP_TOL: f64 = 1e-10;
pub const ROUNDTRIP_GAUGE_TOL: f64 = 1e-11;
pub const STATIONARY_TOL: f64 = 1e-6;
pub const ORDER_TARGET: f64 = 4.0;
pub const ORDER_TOL: f64 = 0.5;
pub const MASS_TOL: f64 = 1e-8;
pub const ENERGY_TOL: f64 = 1e-7;
pub const REFINE_STABILITY: f64 = 0.1;
pub const ESTIMATOR_AGREEMENT: f64 = 0.05;
pub const COMMUTATOR_SAMPLES: usize = 100;
pub const PURE_POWER_SAMPLES: usize = 200;
pub const ORBITAL_FACTOR: f64 = 3.0;
pub const LOCAL_DECAY_RATIO: f64 = 0.1;
pub const MODULUS_DEVIATION: f64 = 1e-3;
pub const PHASE_PROFILE_TOL: f64 = 5e-3;
pub const SATURATION_TAIL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Missing,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Missing => "MISSING",
        })
    }
}

/// One named sub-check with its measured value and bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Part {
    pub name: String,
    pub measured: f64,
    pub bound: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u8,
    pub name: String,
    pub status: Status,
    pub parts: Vec<Part>,
}

impl Criterion {
    fn new(id: u8, name: &str, parts: Vec<Part>) -> Self {
        let status = if parts.iter().all(|p| p.pass) {
            Status::Pass
        } else {
            Status::Fail
        };
        Criterion {
            id,
            name: name.into(),
            status,
            parts,
        }
    }

    pub fn missing(id: u8, name: &str) -> Self {
        Criterion {
            id,
            name: name.into(),
            status: Status::Missing,
            parts: Vec::new(),
        }
    }

    pub fn failing_parts(&self) -> Vec<&str> {
        self.parts.iter().filter(|p| !p.pass).map(|p| p.name.as_str()).collect()
    }

    /// `criterion  4 resolvent            FAIL  lap_gap[λ=0]=2.75e-2 (< 2e-2)`
    pub fn line(&self) -> String {
        let mut s = format!("criterion {:>2} {:<22} {}", self.id, self.name, self.status);
        let shown: Vec<&Part> = match self.status {
            Status::Fail => self.parts.iter().filter(|p| !p.pass).collect(),
            _ => self.parts.iter().collect(),
        };
        for p in shown {
            s.push_str(&format!("  {}={:.3e} ({})", p.name, p.measured, p.bound));
        }
        s
    }
}

fn below(name: impl Into<String>, measured: f64, bound: f64) -> Part {
    Part {
        name: name.into(),
        measured,
        bound: format!("< {bound:e}"),
        pass: measured < bound,
    }
}

fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Part {
    Part {
        name: name.into(),
        measured,
        bound: format!("<= {bound:e}"),
        pass: measured <= bound,
    }
}

fn at_least(name: impl Into<String>, measured: f64, bound: f64) -> Part {
    Part {
        name: name.into(),
        measured,
        bound: format!(">= {bound:e}"),
        pass: measured >= bound,
    }
}

fn near(name: impl Into<String>, measured: f64, target: f64, tol: f64) -> Part {
    Part {
        name: name.into(),
        measured,
        bound: format!("{target} ± {tol:e}"),
        pass: (measured - target).abs() < tol,
    }
}

fn flag(name: impl Into<String>, ok: bool) -> Part {
    Part {
        name: name.into(),
        measured: if ok { 1.0 } else { 0.0 },
        bound: "= 1".into(),
        pass: ok,
    }
}

fn finite(name: impl Into<String>, measured: f64) -> Part {
    Part {
        name: name.into(),
        measured,
        bound: "finite".into(),
        pass: measured.is_finite(),
    }
}

fn stability(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn eigen(c: &EigenCheck) -> Criterion {
    Criterion::new(
        1,
        "eigenvalue oracle",
        vec![
            near("lambda_deep", c.deep_lambda, 1.0, EIGEN_TOL),
            near("lambda_shallow", c.shallow_lambda, (3.0 - 5f64.sqrt()) / 2.0, EIGEN_TOL),
            flag("zero_no_bound_state", c.zero_no_bound_state),
        ],
    )
}

pub fn jost(c: &JostCheck) -> Criterion {
    let mut parts = vec![
        below("m_plus_error", c.m_plus_error, M_PLUS_TOL),
        below("t1_error", c.t1_error, T1_TOL),
    ];
    let worst = c.wronskian.iter().map(|w| w.variation).fold(0.0, f64::max);
    parts.push(below("wronskian_variation", worst, WRONSKIAN_TOL));
    Criterion::new(2, "jost/transmission", parts)
}

pub fn resonance(c: &ResonanceCheck) -> Criterion {
    Criterion::new(
        3,
        "resonance class",
        vec![
            flag("zero_resonant", c.zero == ResonanceClass::Resonant),
            flag("deep_resonant", c.deep == ResonanceClass::Resonant),
            flag("shallow_generic", c.shallow == ResonanceClass::Generic),
            below("shallow_T(0.01)", c.shallow_probe_transmission, PROBE_T_MAX),
        ],
    )
}

pub fn resolvent(c: &ResolventCheck) -> Criterion {
    let mut parts = vec![
        at_least("columns", c.columns as f64, MIN_COLUMNS as f64),
        below("column_defect", c.max_column_defect, c.stencil_scale),
        below("conjugation", c.conjugation_error, CONJ_TOL),
        finite("lap_sup", c.lap_sup),
    ];
    for r in &c.lap {
        parts.push(below(format!("lap_gap[λ={}]", r.lambda), r.gap, LAP_GAP));
    }
    Criterion::new(4, "resolvent identity", parts)
}

pub fn kato(c: &KatoCheck) -> Criterion {
    Criterion::new(
        5,
        "kato smoothing",
        vec![
            at_least("samples", c.samples as f64, KATO_SAMPLES as f64),
            flag("all_finite", c.all_finite),
            below("max/min", c.spread, KATO_SPREAD),
            below("homogeneity", c.homogeneity_error, HOMOGENEITY_TOL),
            below("phase", c.phase_error, HOMOGENEITY_TOL),
        ],
    )
}

pub fn duhamel(c: &DuhamelCheck) -> Criterion {
    Criterion::new(
        6,
        "duhamel identity",
        vec![
            below("discrepancy", c.base, DUHAMEL_TOL),
            below("refined", c.refined, c.base),
        ],
    )
}

pub fn branch(c: &BranchCheck) -> Criterion {
    Criterion::new(
        7,
        "bound-state branch",
        vec![
            at_most("newton_residual", c.max_residual, NEWTON_TOL),
            below("gauge", c.gauge_error, GAUGE_TOL),
            near("slope_Q", c.deviation_slope, c.p, SLOPE_TOL),
            near("slope_D1Q", c.d1_slope, c.p - 1.0, SLOPE_TOL),
            near("slope_D2Q", c.d2_slope, c.p - 1.0, SLOPE_TOL),
            at_least("slope_E", c.energy_slope, c.p - 1.0 - SLOPE_TOL),
        ],
    )
}

pub fn roundtrip(c: &RoundtripCheck) -> Criterion {
    Criterion::new(
        8,
        "decomposition roundtrip",
        vec![
            at_least("samples", c.samples as f64, ROUNDTRIP_SAMPLES as f64),
            below("z_error", c.max_z_error, ROUNDTRIP_TOL),
            below("eta_error", c.max_eta_error, ROUNDTRIP_TOL),
            below("gauge", c.gauge_error, ROUNDTRIP_GAUGE_TOL),
        ],
    )
}

pub fn evolution(c: &EvolutionCheck) -> Criterion {
    Criterion::new(
        9,
        "evolution fidelity",
        vec![
            below("stationary", c.stationary_error, STATIONARY_TOL),
            near("order_ratio", c.order_ratio, ORDER_TARGET, ORDER_TOL),
            below("mass_drift", c.mass_drift, MASS_TOL),
            below("energy_drift", c.energy_drift, ENERGY_TOL),
        ],
    )
}

pub fn modulation(c: &RefinementCheck) -> Criterion {
    Criterion::new(
        10,
        "modulation estimate",
        vec![
            finite("ratio_max", c.coarse.discrete_max),
            finite("ratio_max_fine", c.fine.discrete_max),
            below(
                "ratio_stability",
                stability(c.coarse.discrete_max, c.fine.discrete_max),
                REFINE_STABILITY,
            ),
            below("estimators", c.coarse.estimator_disagreement, ESTIMATOR_AGREEMENT),
            below("estimators_fine", c.fine.estimator_disagreement, ESTIMATOR_AGREEMENT),
        ],
    )
}

pub fn virial(c: &RefinementCheck) -> Criterion {
    let (a, b) = (c.coarse.c_emp.unwrap_or(f64::NAN), c.fine.c_emp.unwrap_or(f64::NAN));
    let st = if a.is_finite() && b.is_finite() { stability(a, b) } else { f64::INFINITY };
    Criterion::new(
        11,
        "virial inequality",
        vec![
            finite("c_emp", a),
            finite("c_emp_fine", b),
            below("c_emp_stability", st, REFINE_STABILITY),
            at_least("commutator_samples", c.commutator.samples as f64, COMMUTATOR_SAMPLES as f64),
            finite("commutator_C/A", c.commutator.fitted_c_over_a),
            at_least("pure_power_samples", c.pure_power_samples as f64, PURE_POWER_SAMPLES as f64),
            finite("pure_power_max", c.pure_power_max),
        ],
    )
}

pub fn theorem(c: &TheoremCheck) -> Criterion {
    let w_ratio = match c.w_norms.as_slice() {
        [first, .., last] if *first > 0.0 => last / first,
        _ => f64::NAN,
    };
    Criterion::new(
        12,
        "theorem trends",
        vec![
            at_most("(i) orbital", c.orbital_constant, ORBITAL_FACTOR),
            below("(ii) a_final/peak", c.local_final_over_peak, LOCAL_DECAY_RATIO),
            below("(iii) |z| deviation", c.deviation, MODULUS_DEVIATION),
            below("(iv) phase profile", c.phase_error, PHASE_PROFILE_TOL),
            below("(v) H1 tail", c.h1_tail_fraction, SATURATION_TAIL),
            Part {
                name: "(vi) w decreasing in B".into(),
                measured: w_ratio,
                bound: "strictly decreasing".into(),
                pass: c.w_monotone_decreasing,
            },
        ],
    )
}

pub fn determinism(c: &DeterminismCheck) -> Criterion {
    Criterion::new(
        13,
        "determinism",
        vec![
            at_least("files", c.files.len() as f64, 1.0),
            flag("byte_identical", c.identical),
        ],
    )
}

pub const NAMES: [&str; 13] = [
    "eigenvalue oracle",
    "jost/transmission",
    "resonance class",
    "resolvent identity",
    "kato smoothing",
    "duhamel identity",
    "bound-state branch",
    "decomposition roundtrip",
    "evolution fidelity",
    "modulation estimate",
    "virial inequality",
    "theorem trends",
    "determinism",
];

/// File under `checks/` holding the measurement for each criterion.
pub const CHECK_FILES: [&str; 13] = [
    "eigen.json",
    "jost.json",
    "resonance.json",
    "resolvent.json",
    "kato.json",
    "duhamel.json",
    "branch.json",
    "roundtrip.json",
    "evolution.json",
    "refinement.json",
    "refinement.json",
    "theorem.json",
    "determinism.json",
];

pub const CHECK_DIR: &str = "checks";

fn load<T: for<'de> Deserialize<'de>>(dir: &Path, id: usize) -> Option<T> {
    let path = dir.join(CHECK_DIR).join(CHECK_FILES[id - 1]);
    if !path.exists() {
        return None;
    }
    read_json::<T>(&path).ok().map(|e| e.result)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub criteria: Vec<Criterion>,
    pub passed: usize,
    pub failed: usize,
    pub missing: usize,
}

impl Report {
    pub fn new(criteria: Vec<Criterion>) -> Self {
        let count = |s| criteria.iter().filter(|c| c.status == s).count();
        Report {
            passed: count(Status::Pass),
            failed: count(Status::Fail),
            missing: count(Status::Missing),
            criteria,
        }
    }
}

/// Evaluates every criterion whose measurement file exists under `dir`.
pub fn evaluate_dir(dir: &Path) -> Result<Report, CliError> {
    if !dir.is_dir() {
        return Err(CliError::MissingInput(format!("{} is not a directory", dir.display())));
    }
    let mut out = Vec::with_capacity(13);
    for id in 1..=13usize {
        let c = match id {
            1 => load(dir, id).map(|c| eigen(&c)),
            2 => load(dir, id).map(|c| jost(&c)),
            3 => load(dir, id).map(|c| resonance(&c)),
            4 => load(dir, id).map(|c| resolvent(&c)),
            5 => load(dir, id).map(|c| kato(&c)),
            6 => load(dir, id).map(|c| duhamel(&c)),
            7 => load(dir, id).map(|c| branch(&c)),
            8 => load(dir, id).map(|c| roundtrip(&c)),
            9 => load(dir, id).map(|c| evolution(&c)),
            10 => load(dir, id).map(|c| modulation(&c)),
            11 => load(dir, id).map(|c| virial(&c)),
            12 => load(dir, id).map(|c| theorem(&c)),
            _ => load(dir, id).map(|c| determinism(&c)),
        };
        out.push(c.unwrap_or_else(|| Criterion::missing(id as u8, NAMES[id - 1])));
    }
    Ok(Report::new(out))
}
