//! Run configuration: a TOML file with two-level nesting, unknown keys rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nlslab::branch::BranchSettings;
use nlslab::diagnostics::WeightParams;
use nlslab::evolution::EvolutionConfig;
use nlslab::field::I;
use nlslab::modulation::{Decomposer, ModulationSettings};
use nlslab::scattering::smoothing::SmoothingSettings;
use nlslab::propagator::Sponge;
use nlslab::{
    Boundary, BranchSolver, ComplexField, Grid, Hamiltonian, Nonlinearity, Potential, SpectralData,
    Stencil,
};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialChoice {
    #[default]
    Sech2,
    Zero,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    pub kind: PotentialChoice,
    pub depth: f64,
    pub width: f64,
    /// Two-column `x V` table, used when `kind = "table"`.
    pub path: Option<PathBuf>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            kind: PotentialChoice::Sech2,
            depth: 1.0,
            width: 1.0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearityConfig {
    pub p: f64,
    pub sigma: f64,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        NonlinearityConfig { p: 2.0, sigma: -1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
    pub boundary: Boundary,
    pub stencil: Stencil,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            half_width: 40.0,
            n: 4096,
            boundary: Boundary::Dirichlet,
            stencil: Stencil::Second,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// `zφ + amplitude · P_c(packet)`.
    #[default]
    Mixed,
    /// `Q[z]` on the bound-state branch.
    Branch,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub kind: InitialKind,
    pub z_re: f64,
    pub z_im: f64,
    pub packet_amplitude: f64,
    pub packet_center: f64,
    pub packet_width: f64,
    pub packet_wavenumber: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            kind: InitialKind::Mixed,
            z_re: 0.01,
            z_im: 0.0,
            packet_amplitude: 0.005,
            packet_center: 0.0,
            packet_width: 1.0,
            packet_wavenumber: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BranchConfig {
    pub z_max: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub kappa: f64,
    /// Radii tabulated by `branch`.
    pub radii: Vec<f64>,
}

impl Default for BranchConfig {
    fn default() -> Self {
        let s = BranchSettings::default();
        BranchConfig {
            z_max: s.z_max,
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            kappa: s.kappa,
            radii: (0..9).map(|i| 1e-3 * 10f64.powf(i as f64 / 4.0)).collect(),
        }
    }
}

impl BranchConfig {
    pub fn settings(&self) -> BranchSettings {
        BranchSettings {
            z_max: self.z_max,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            kappa: self.kappa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterConfig {
    pub k_min: f64,
    pub k_max: f64,
    pub count: usize,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        ScatterConfig {
            k_min: 0.05,
            k_max: 4.0,
            count: 80,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingConfig {
    pub samples: usize,
    pub inhomogeneous_samples: usize,
    pub horizon: f64,
    pub dt: f64,
    pub sponge_start_fraction: f64,
    pub sponge_strength: f64,
    /// Box used for the smoothing runs; longer than the evolution box.
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        let s = SmoothingSettings::default();
        SmoothingConfig {
            samples: 50,
            inhomogeneous_samples: 20,
            horizon: s.horizon,
            dt: s.dt,
            sponge_start_fraction: s.sponge.start_fraction,
            sponge_strength: s.sponge.strength,
            half_width: 60.0,
            n: 1201,
        }
    }
}

impl SmoothingConfig {
    pub fn settings(&self) -> SmoothingSettings {
        SmoothingSettings {
            horizon: self.horizon,
            dt: self.dt,
            sponge: Sponge {
                start_fraction: self.sponge_start_fraction,
                strength: self.sponge_strength,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseConfig {
    /// Size parameter `δ` in the discrete modulation estimate.
    pub delta: f64,
    pub b_sweep: Vec<f64>,
    /// Horizon of the two runs compared under `dt → dt/2`.
    pub refine_horizon: f64,
    pub commutator_samples: usize,
    pub pure_power_samples: usize,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig {
            delta: 0.01,
            b_sweep: vec![3.0, 4.0, 6.0],
            refine_horizon: 20.0,
            commutator_samples: 100,
            pure_power_samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub potential: PotentialConfig,
    pub nonlinearity: NonlinearityConfig,
    pub grid: GridConfig,
    pub weights: WeightParams,
    pub evolution: EvolutionConfig,
    pub initial: InitialConfig,
    pub branch: BranchConfig,
    pub modulation: ModulationSettings,
    pub scatter: ScatterConfig,
    pub smoothing: SmoothingConfig,
    pub diagnose: DiagnoseConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            potential: PotentialConfig::default(),
            nonlinearity: NonlinearityConfig::default(),
            grid: GridConfig::default(),
            weights: WeightParams::default(),
            evolution: EvolutionConfig {
                t_final: 100.0,
                snapshot_stride: 500,
                sponge: nlslab::evolution::SpongeConfig {
                    enabled: true,
                    ..Default::default()
                },
                ..Default::default()
            },
            initial: InitialConfig::default(),
            branch: BranchConfig::default(),
            modulation: ModulationSettings::default(),
            scatter: ScatterConfig::default(),
            smoothing: SmoothingConfig::default(),
            diagnose: DiagnoseConfig::default(),
        }
    }
}

/// Parses `value` as a TOML scalar or array, falling back to a bare string.
fn parse_override_value(value: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {value}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.into()),
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("override `{spec}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Validation(format!("override key `{key}` is malformed")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Validation(format!("override key `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_override_value(value.trim()));
    Ok(())
}

impl RunConfig {
    /// Parses TOML text, applies `key=value` overrides, then validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::MissingInput(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid.n < 16 {
            return Err(CliError::Validation(format!("grid.n must be at least 16, got {}", self.grid.n)));
        }
        self.evolution.validate()?;
        self.nonlinearity()?;
        if self.potential.kind == PotentialChoice::Table && self.potential.path.is_none() {
            return Err(CliError::Validation("potential.kind = \"table\" needs potential.path".into()));
        }
        if !(self.scatter.k_min > 0.0 && self.scatter.k_max > self.scatter.k_min && self.scatter.count >= 2) {
            return Err(CliError::Validation("scatter needs 0 < k_min < k_max and count ≥ 2".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn grid(&self) -> Result<Arc<Grid>, CliError> {
        Ok(Arc::new(Grid::new(self.grid.half_width, self.grid.n, self.grid.boundary)?))
    }

    pub fn potential(&self) -> Result<Potential, CliError> {
        Ok(match self.potential.kind {
            PotentialChoice::Zero => Potential::zero(),
            PotentialChoice::Sech2 => Potential::sech2(self.potential.depth, self.potential.width)?,
            PotentialChoice::Table => {
                let path = self.potential.path.as_ref().expect("validated");
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
                Potential::parse_table(&text)?
            }
        })
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity, CliError> {
        Ok(Nonlinearity::new(self.nonlinearity.p, self.nonlinearity.sigma)?)
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian, CliError> {
        Ok(Hamiltonian::new(&self.grid()?, &self.potential()?, self.grid.stencil))
    }

    pub fn model(&self) -> Result<Model, CliError> {
        let ham = self.hamiltonian()?;
        let spectral = SpectralData::cached(&ham)?;
        let branch = BranchSolver::new(&ham, spectral.clone(), self.nonlinearity()?, self.branch.settings())?;
        Ok(Model {
            ham,
            spectral,
            decomposer: Decomposer::new(branch, self.modulation),
        })
    }
}

/// Operator, eigenpair and branch for one configuration.
pub struct Model {
    pub ham: Hamiltonian,
    pub spectral: Arc<SpectralData>,
    pub decomposer: Decomposer,
}

impl Model {
    pub fn grid(&self) -> &Arc<Grid> {
        self.ham.grid()
    }

    pub fn initial_field(&self, init: &InitialConfig) -> Result<ComplexField, CliError> {
        let z = Complex64::new(init.z_re, init.z_im);
        Ok(match init.kind {
            InitialKind::Zero => ComplexField::zeros(self.grid()),
            InitialKind::Branch => self.decomposer.branch().solve(z)?.q,
            InitialKind::Mixed => {
                let w = init.packet_width;
                let packet = ComplexField::from_fn(self.grid(), |x| {
                    let d = (x - init.packet_center) / w;
                    (-0.5 * d * d).exp() * (I * init.packet_wavenumber * x).exp()
                });
                let pc = self.spectral.project_pc(&packet)?;
                &self.spectral.phi.scale(z) + &pc.scale_real(init.packet_amplitude)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c = RunConfig::from_toml("", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[grid]\nnn = 3\n", &[]).is_err());
        assert!(RunConfig::from_toml("[gird]\nn = 3\n", &[]).is_err());
        assert!(RunConfig::from_toml("", &["evolution.dtt=0.1".into()]).is_err());
    }

    #[test]
    fn overrides_apply() {
        let c = RunConfig::from_toml(
            "[grid]\nn = 1025\n",
            &["grid.L=30".into(), "evolution.scheme=crank_nicolson".into(), "potential.kind=\"zero\"".into()],
        )
        .unwrap();
        assert_eq!(c.grid.n, 1025);
        assert_eq!(c.grid.half_width, 30.0);
        assert_eq!(c.evolution.scheme, nlslab::evolution::Scheme::CrankNicolson);
        assert_eq!(c.potential.kind, PotentialChoice::Zero);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
