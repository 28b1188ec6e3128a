//! Run configuration and its validation.

use std::path::{Path, PathBuf};

use regdual::metric::MetricSpec;
use regdual::{generate, GeneratorSpec, Instance, Objective, OccupancyMeasure};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Generate,
    Solve,
    Dual,
    Verify,
    Qlearn,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Linear,
    Sac,
    Tsallis,
    Buffer,
    KlImitation,
    EntropyExplore,
    Ipm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Path(PathBuf),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub epsilon: Option<f64>,
    /// Expert occupancy for the imitation objectives; buffer weights for `buffer`.
    pub expert: Option<PathBuf>,
    pub metric: Option<PathBuf>,
    pub lipschitz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub threshold: f64,
    pub delta_mean: f64,
    pub delta_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Positive, strictly increasing. `eps = 0` (the linear objective) is
    /// always evaluated in addition.
    pub epsilon_grid: Vec<f64>,
    pub perturbation: Perturbation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub instance: InstanceSource,
    pub objective: ObjectiveSpec,
    pub sweep: Option<SweepSpec>,
    pub output: PathBuf,
    pub seed: u64,
    pub tol: Option<f64>,
    /// A stored report for `verify` to re-check instead of solving.
    pub report: Option<PathBuf>,
    /// Record wall-clock times; disabled runs write 0 so outputs are byte-stable.
    pub timing: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if let Some(eps) = self.objective.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return bad(format!("--epsilon {eps} must be positive"));
            }
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                return bad(format!("--tol {tol} must be positive"));
            }
        }
        let needs_epsilon = matches!(
            self.objective.kind,
            ObjectiveKind::Sac | ObjectiveKind::Tsallis | ObjectiveKind::Buffer
        );
        if needs_epsilon && self.objective.epsilon.is_none() && self.command != Command::Sweep {
            return bad(format!("objective {:?} needs --epsilon", self.objective.kind));
        }
        let needs_expert = matches!(self.objective.kind, ObjectiveKind::KlImitation | ObjectiveKind::Ipm);
        if needs_expert && self.objective.expert.is_none() && self.command != Command::Generate {
            return bad(format!("objective {:?} needs --expert", self.objective.kind));
        }
        if self.command == Command::Sweep {
            let Some(sweep) = &self.sweep else {
                return bad("sweep needs --epsilon-grid".into());
            };
            let grid = &sweep.epsilon_grid;
            if grid.is_empty() || grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return bad("epsilon grid must be non-empty and strictly positive".into());
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return bad("epsilon grid must be strictly increasing".into());
            }
            if !(sweep.perturbation.delta_std >= 0.0) {
                return bad("--delta-std must be nonnegative".into());
            }
        }
        Ok(())
    }

    pub fn load_instance(&self) -> CliResult<Instance> {
        match &self.instance {
            InstanceSource::Path(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Instance::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
            }
            InstanceSource::Generator(spec) => generate(spec).map_err(|e| CliError::Config(e.to_string())),
        }
    }

    /// The objective of `solve`, `dual`, `verify` and `qlearn` on `inst`.
    pub fn build_objective(&self, inst: &Instance) -> CliResult<Objective> {
        let spec = &self.objective;
        let (n_states, n_actions) = inst.mdp.shape();
        let eps = || spec.epsilon.expect("checked by validate");
        let config = |e: regdual::Error| CliError::Config(e.to_string());
        let expert = || -> CliResult<OccupancyMeasure> {
            let path = spec.expert.as_ref().expect("checked by validate");
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        };
        let r = inst.reward.clone();
        Ok(match spec.kind {
            ObjectiveKind::Linear => Objective::linear(r),
            ObjectiveKind::Sac => Objective::entropy_sac(r, eps()).map_err(config)?,
            ObjectiveKind::Tsallis => Objective::tsallis2(r, eps()).map_err(config)?,
            ObjectiveKind::Buffer => {
                let nu = match &spec.expert {
                    Some(_) => expert()?,
                    None => uniform(n_states, n_actions),
                };
                Objective::buffer(r, eps(), nu).map_err(config)?
            }
            ObjectiveKind::KlImitation => Objective::kl_imitation(&expert()?),
            ObjectiveKind::EntropyExplore => Objective::entropy_exploration(n_states, n_actions),
            ObjectiveKind::Ipm => {
                let metric = match &spec.metric {
                    Some(path) => {
                        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                        MetricSpec::from_json(&text)
                            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
                    }
                    None => MetricSpec::product_discrete(n_states, n_actions, 1.0, 1.0, spec.lipschitz.unwrap_or(1.0))
                        .map_err(config)?,
                };
                Objective::lipschitz_ipm(expert()?, metric).map_err(config)?
            }
        })
    }
}

fn uniform(n_states: usize, n_actions: usize) -> OccupancyMeasure {
    let n = (n_states * n_actions) as f64;
    OccupancyMeasure::new(n_states, n_actions, vec![1.0 / n; n_states * n_actions]).expect("uniform is a distribution")
}
