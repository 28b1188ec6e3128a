use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use regdual::GeneratorSpec;
use regdual_cli::{
    run, CliError, Command, InstanceSource, ObjectiveKind, ObjectiveSpec, Perturbation, RunConfig, SweepSpec,
    EXIT_CONFIG,
};

/// Regularized MDP solvers with adversarial-reward duality checks.
#[derive(Debug, Parser)]
#[command(name = "regdual", version)]
struct Args {
    /// Command to run; ignored when --config is given.
    #[arg(value_enum)]
    command: Option<Command>,

    /// Read the whole run configuration from a JSON file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Instance file in JSON.
    #[arg(long, conflicts_with = "generator")]
    instance: Option<PathBuf>,

    /// Generator spec, e.g. `random:seed=7,n_states=3,n_actions=2,alpha=1.0`.
    #[arg(long)]
    generator: Option<GeneratorSpec>,

    #[arg(long, value_enum, default_value = "linear")]
    objective: ObjectiveKind,

    #[arg(long)]
    epsilon: Option<f64>,

    /// Expert occupancy (or buffer weights for `buffer`) in JSON.
    #[arg(long)]
    expert: Option<PathBuf>,

    /// Ground metric in JSON for `ipm`.
    #[arg(long)]
    metric: Option<PathBuf>,

    /// Lipschitz constant of the default product metric for `ipm`.
    #[arg(long)]
    lipschitz: Option<f64>,

    /// Comma-separated temperatures for `sweep`.
    #[arg(long, value_delimiter = ',')]
    epsilon_grid: Vec<f64>,

    #[arg(long, default_value_t = 0.0)]
    threshold: f64,

    #[arg(long, default_value_t = 0.0)]
    delta_mean: f64,

    #[arg(long, default_value_t = 0.0)]
    delta_std: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    #[arg(long)]
    tol: Option<f64>,

    /// Stored report for `verify` to re-check.
    #[arg(long)]
    report: Option<PathBuf>,

    /// Write 0 for wall-clock times so that outputs are reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

impl Args {
    fn into_config(self) -> Result<RunConfig, CliError> {
        if let Some(path) = &self.config {
            return RunConfig::load(path);
        }
        let command = self
            .command
            .ok_or_else(|| CliError::Config("a command or --config is required".into()))?;
        let instance = match (self.instance, self.generator) {
            (Some(path), None) => InstanceSource::Path(path),
            (None, Some(spec)) => InstanceSource::Generator(spec),
            _ => {
                return Err(CliError::Config(
                    "exactly one of --instance and --generator is required".into(),
                ))
            }
        };
        let sweep = if command == Command::Sweep && !self.epsilon_grid.is_empty() {
            Some(SweepSpec {
                epsilon_grid: self.epsilon_grid,
                perturbation: Perturbation {
                    threshold: self.threshold,
                    delta_mean: self.delta_mean,
                    delta_std: self.delta_std,
                    seed: self.seed,
                },
            })
        } else {
            None
        };
        Ok(RunConfig {
            command,
            instance,
            objective: ObjectiveSpec {
                kind: self.objective,
                epsilon: self.epsilon,
                expert: self.expert,
                metric: self.metric,
                lipschitz: self.lipschitz,
            },
            sweep,
            output: self.out,
            seed: self.seed,
            tol: self.tol,
            report: self.report,
            timing: !self.no_timing,
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REGDUAL_LOG", "warn")).init();
    let args = Args::parse();
    let outcome = args.into_config().and_then(|config| run(&config));
    let code = match outcome {
        Ok(outcome) => {
            for v in &outcome.verdicts {
                println!("{v}");
            }
            println!("status {}", outcome.status);
            outcome.status
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(EXIT_CONFIG as u8))
}
