//! `gblim` — run Gauss–Bonnet limit-measure scenarios.
//!
//! Exit codes: 0 on success, 2 for scenario parse/validation problems,
//! 3 for numerical failures (tagged with the failing stage).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gblim_cli::errors::CliError;
use gblim_cli::runner::StageSet;
use gblim_cli::{emit, load_scenario, run};

use gblim_core::contact::DEFAULT_VALIDATION_SEED;

#[derive(Parser)]
#[command(
    name = "gblim",
    about = "Curvature limit measures on surfaces in 3D contact sub-Riemannian manifolds",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a scenario file and emit its artifacts.
    Run {
        /// Scenario file (JSON, conventionally *.scn).
        scenario: PathBuf,
        /// Output directory (overrides the scenario's `outputs.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated stage list: classify,converge,invariants.
        #[arg(long)]
        stages: Option<String>,
        /// Comma-separated ε list replacing the scenario sweep.
        #[arg(long, value_name = "LIST")]
        eps_override: Option<String>,
        /// Locator grid resolution per axis (overrides `options.grid`).
        #[arg(long)]
        grid: Option<usize>,
        /// Seed for validation sampling.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_eps_override(text: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for token in text.split(',') {
        let token = token.trim();
        let e: f64 = token.parse().map_err(|_| {
            CliError::validation(
                "--eps-override",
                format!("cannot parse '{token}' as a number"),
            )
        })?;
        if !(e > 0.0) {
            return Err(CliError::validation(
                "--eps-override",
                "epsilon must be positive",
            ));
        }
        if e > 1.0 {
            return Err(CliError::validation(
                "--eps-override",
                "epsilon must be at most 1",
            ));
        }
        out.push(e);
    }
    if out.is_empty() {
        return Err(CliError::validation(
            "--eps-override",
            "at least one epsilon is required",
        ));
    }
    Ok(out)
}

fn run_cmd(
    scenario_path: &PathBuf,
    out: Option<PathBuf>,
    stages: Option<String>,
    eps_override: Option<String>,
    grid: Option<usize>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut scenario = load_scenario(scenario_path)?;

    if let Some(text) = &eps_override {
        if scenario.is_fixture() {
            return Err(CliError::validation(
                "--eps-override",
                "not applicable in fixture mode",
            ));
        }
        scenario.epsilons = parse_eps_override(text)?;
    }
    if let Some(g) = grid {
        if !(8..=512).contains(&g) {
            return Err(CliError::validation("--grid", "must be between 8 and 512"));
        }
        scenario.options.grid = g;
    }
    if let Some(dir) = out {
        scenario.outputs.dir = dir;
    }

    let stage_set = match &stages {
        Some(text) => StageSet::parse(text, &scenario)?,
        None => StageSet::defaults_for(&scenario),
    };
    let seed = seed.unwrap_or(DEFAULT_VALIDATION_SEED);

    let report = run(&scenario, stage_set, seed)?;
    let written = emit(&report, &scenario.outputs.dir, &scenario.outputs.formats)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    let failed: Vec<&str> = report
        .invariants
        .iter()
        .filter(|e| !e.pass)
        .map(|e| e.name.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(CliError::stage(
            "invariants",
            "atlas",
            gblim_core::Error::Domain {
                what: format!("invariant checks failed: {}", failed.join(", ")),
            },
        ));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run {
            scenario,
            out,
            stages,
            eps_override,
            grid,
            seed,
        } => run_cmd(&scenario, out, stages, eps_override, grid, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            // Exit codes are part of the CLI contract; clamp into u8 range.
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
