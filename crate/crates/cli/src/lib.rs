//! Config-driven experiment runner: one subcommand per laboratory module,
//! reproducible CSV/JSON artifacts and the acceptance report.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "nlslab", version, about = "Small-solution NLS laboratory")]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// `section.key=value`, parsed as a TOML value. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lowest eigenpair and resonance class.
    Spectrum,
    /// Transmission table over the configured k range.
    Scatter,
    /// Bound-state branch table and log-log slopes.
    Branch,
    /// Kato and inhomogeneous smoothing ensembles.
    Smoothing,
    /// Evolve the configured initial datum and save the trajectory.
    Evolve,
    /// Modulation, virial and late-time diagnostics of a saved run.
    Diagnose {
        #[arg(long)]
        run: PathBuf,
    },
    /// Evaluate every acceptance criterion with measurements under `run`.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
    /// Every command and check, followed by the report.
    Suite,
    /// Evolve and diagnose several configs in parallel.
    Sweep {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
    },
}

impl Cli {
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref(), &self.overrides)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

/// Executes one invocation; the returned lines go to stdout.
pub fn execute(cli: &Cli) -> Result<Vec<String>, CliError> {
    let out = &cli.out;
    let lines = match &cli.command {
        Command::Spectrum => {
            let r = commands::spectrum(&cli.run_config()?, out)?;
            vec![format!(
                "lambda = {:.12} (extrapolated {:.12}), {} negative, {:?}",
                r.lambda, r.extrapolated_lambda, r.n_negative, r.resonance_class
            )]
        }
        Command::Scatter => {
            let rows = commands::scatter(&cli.run_config()?, out)?;
            vec![format!("{} wavenumbers written", rows.len())]
        }
        Command::Branch => {
            let s = commands::branch(&cli.run_config()?, out)?;
            vec![format!(
                "slopes: Q {:.3}, D1Q {:.3}, D2Q {:.3}, E {:.3}",
                s.deviation_slope, s.d1_slope, s.d2_slope, s.energy_slope
            )]
        }
        Command::Smoothing => {
            let r = commands::smoothing(&cli.run_config()?, out)?;
            vec![format!(
                "kato spread {:.3}, inhomogeneous spread {:.3}",
                r.kato.spread, r.inhomogeneous.spread
            )]
        }
        Command::Evolve => {
            let s = commands::evolve(&cli.run_config()?, out)?;
            let mut v = vec![format!(
                "{} steps, {} snapshots, trust window ends at {}",
                s.steps, s.snapshots, s.trust_end
            )];
            if let Some(t) = &s.truncated {
                v.push(format!("truncated: {t}"));
            }
            v
        }
        Command::Diagnose { run } => {
            let r = commands::diagnose(run, out)?;
            vec![format!(
                "r+ = {:.9}, deviation {:.3e}, C_emp {:?}",
                r.theorem.r_plus, r.theorem.deviation, r.modulation.c_emp
            )]
        }
        Command::Report { run } => commands::report(run, out)?.criteria.iter().map(|c| c.line()).collect(),
        Command::Suite => {
            let cfg = cli.run_config()?;
            commands::suite(&cfg, out, &mut |stage| eprintln!("[suite] {stage}"))?
                .criteria
                .iter()
                .map(|c| c.line())
                .collect()
        }
        Command::Sweep { configs } => commands::sweep(configs, &cli.overrides, cli.seed, out)?
            .iter()
            .map(|e| match &e.error {
                None => format!("{}: ok", e.out.display()),
                Some(err) => format!("{}: {err}", e.out.display()),
            })
            .collect(),
    };
    Ok(lines)
}
