//! Command-line front end: checks, solves, synthesizes and simulates from JSON problem files.

mod commands;
mod error;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use aacontrol::riccati::Variant;
use aacontrol::simulator::SimulationSettings;
use aacontrol::Tolerances;
use clap::{Parser, Subcommand};

use commands::{ExampleArgs, ExampleForcing, Sink};
use error::{CliError, Stage};
use spec::ProblemSpec;

#[derive(Parser)]
#[command(name = "aacontrol", version, about = "Averaged-cost optimal feedback for forced linear systems")]
struct Cli {
    /// Directory for report.json, law.json and trajectory.csv. Overrides `options.output_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Print the JSON report instead of the text summary.
    #[arg(long, global = true)]
    json: bool,

    /// Override one tolerance, e.g. `--tolerance newton_rtol=1e-10`. Repeatable.
    #[arg(long = "tolerance", global = true, value_name = "KEY=VALUE")]
    tolerances: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test stability of -A and controllability of (A, B); report the Gramian bound.
    Check { spec: PathBuf },
    /// Solve for the controllability Gramian.
    Gramian { spec: PathBuf },
    /// Solve the Riccati equation.
    Solve {
        spec: PathBuf,
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Build the optimal feedback law and its closed-form cost.
    Synthesize {
        spec: PathBuf,
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Evaluate the cost of a stored law.
    Cost {
        spec: PathBuf,
        #[arg(long, value_name = "LAW.json")]
        law: PathBuf,
    },
    /// Integrate the closed loop under the synthesized law.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Run the scalar reference problem end to end and compare with known values.
    Example {
        #[arg(long, default_value = "standard")]
        variant: Variant,
        #[arg(long, value_enum, default_value = "sin")]
        forcing: ExampleForcing,
        #[arg(long, default_value_t = 2000.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1000)]
        record_stride: usize,
    },
}

fn apply_overrides(base: &Tolerances, overrides: &[String]) -> Result<Tolerances, CliError> {
    if overrides.is_empty() {
        return Ok(*base);
    }
    let input = |msg: String| CliError::new(Stage::Input, msg);
    let mut value = serde_json::to_value(base).map_err(|e| input(e.to_string()))?;
    let map = value.as_object_mut().expect("tolerances serialize to an object");
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| input(format!("tolerance override `{item}` is not KEY=VALUE")))?;
        let parsed: serde_json::Value =
            serde_json::from_str(raw.trim()).map_err(|_| input(format!("tolerance `{key}`: `{raw}` is not a number")))?;
        map.insert(key.trim().to_string(), parsed);
    }
    let tol: Tolerances = serde_json::from_value(value).map_err(|e| input(format!("tolerance override: {e}")))?;
    tol.validate().map_err(|e| input(e.to_string()))?;
    Ok(tol)
}

fn simulation_settings(
    spec: &ProblemSpec,
    t_end: Option<f64>,
    dt: Option<f64>,
) -> Result<SimulationSettings, CliError> {
    let base = spec.options.simulation.as_ref().map(|s| s.settings());
    let t_end = t_end.or(base.map(|s| s.t_end));
    let dt = dt.or(base.map(|s| s.dt));
    match (t_end, dt) {
        (Some(t_end), Some(dt)) => {
            let stride = base.map_or(1, |s| s.record_stride);
            Ok(SimulationSettings::new(t_end, dt).with_stride(stride))
        }
        _ => Err(CliError::new(
            Stage::Input,
            "simulation needs `t_end` and `dt`, from options.simulation or --t-end/--dt",
        )),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let sink_for = |spec: Option<&ProblemSpec>| Sink {
        dir: cli.out.clone().or_else(|| spec.and_then(|s| s.options.output_dir.clone())),
        json: cli.json,
    };
    let load = |path: &PathBuf| -> Result<(ProblemSpec, Tolerances), CliError> {
        let spec = ProblemSpec::load(path)?;
        let tol = apply_overrides(&spec.options.tolerances, &cli.tolerances)?;
        Ok((spec, tol))
    };
    let variant_of = |spec: &ProblemSpec, flag: Option<Variant>| flag.or(spec.options.variant).unwrap_or_default();

    match &cli.command {
        Command::Check { spec } => {
            let (spec, tol) = load(spec)?;
            commands::check(&spec, &tol, &sink_for(Some(&spec)))
        }
        Command::Gramian { spec } => {
            let (spec, tol) = load(spec)?;
            commands::gramian(&spec, &tol, &sink_for(Some(&spec)))
        }
        Command::Solve { spec, variant } => {
            let (spec, tol) = load(spec)?;
            commands::solve(&spec, variant_of(&spec, *variant), &tol, &sink_for(Some(&spec)))
        }
        Command::Synthesize { spec, variant } => {
            let (spec, tol) = load(spec)?;
            commands::synthesize(&spec, variant_of(&spec, *variant), &tol, &sink_for(Some(&spec)))
        }
        Command::Cost { spec, law } => {
            let (spec, tol) = load(spec)?;
            commands::cost(&spec, law, &tol, &sink_for(Some(&spec)))
        }
        Command::Simulate {
            spec,
            variant,
            t_end,
            dt,
        } => {
            let (spec, tol) = load(spec)?;
            let settings = simulation_settings(&spec, *t_end, *dt)?;
            commands::simulate(&spec, variant_of(&spec, *variant), &settings, &tol, &sink_for(Some(&spec)))
        }
        Command::Example {
            variant,
            forcing,
            t_end,
            dt,
            record_stride,
        } => {
            let tol = apply_overrides(&Tolerances::default(), &cli.tolerances)?;
            let args = ExampleArgs {
                variant: *variant,
                forcing: *forcing,
                settings: SimulationSettings::new(*t_end, *dt).with_stride(*record_stride),
            };
            commands::example(&args, &tol, &sink_for(None))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
