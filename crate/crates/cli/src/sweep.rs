//! Train on a perturbed reward, evaluate on the true one, across temperatures.

use std::path::Path;
use std::time::Instant;

use regdual::duality::{duality_gap_report, solve_primal};
use regdual::solvers::policy_iteration;
use regdual::{expected_return, perturb_reward, Instance, Objective, RewardTable};
use serde::{Deserialize, Serialize};

use crate::config::SweepSpec;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainedOn {
    TrueReward,
    PerturbedReward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub epsilon: f64,
    pub trained_on: TrainedOn,
    /// Return under the true reward of the occupancy trained on the
    /// (possibly perturbed) reward.
    pub eval_return: f64,
    /// Duality gap of the training problem.
    pub gap: f64,
    pub wall_ms: f64,
}

/// One record for `eps = 0` (the linear objective) and one per grid point.
pub fn robustness_sweep(inst: &Instance, spec: &SweepSpec, timing: bool) -> CliResult<Vec<SweepRecord>> {
    let p = &spec.perturbation;
    let trained = perturb_reward(&inst.reward, p.threshold, p.delta_mean, p.delta_std, p.seed)?;
    let trained_on = if trained == inst.reward {
        TrainedOn::TrueReward
    } else {
        TrainedOn::PerturbedReward
    };
    std::iter::once(0.0)
        .chain(spec.epsilon_grid.iter().copied())
        .map(|epsilon| {
            let obj = if epsilon == 0.0 {
                Objective::linear(trained.clone())
            } else {
                Objective::entropy_sac(trained.clone(), epsilon)?
            };
            let start = Instant::now();
            let solution = solve_primal(&inst.mdp, &obj)?;
            let wall_ms = if timing {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            let report = duality_gap_report(&inst.mdp, &obj)?;
            log::info!("sweep eps={epsilon}: gap {:.3e}", report.gap);
            Ok(SweepRecord {
                epsilon,
                trained_on,
                eval_return: expected_return(&solution.mu, &inst.reward)?,
                gap: report.gap,
                wall_ms,
            })
        })
        .collect()
}

/// Best and worst achievable true return, `(-RL(-r), RL(r))`.
pub fn return_range(inst: &Instance) -> CliResult<(f64, f64)> {
    let best = policy_iteration(&inst.mdp, &inst.reward)?.value;
    let negated = RewardTable::new(
        inst.reward.n_states(),
        inst.reward.n_actions(),
        inst.reward.as_slice().iter().map(|v| -v).collect(),
    )?;
    let worst = -policy_iteration(&inst.mdp, &negated)?.value;
    Ok((worst, best))
}

#[derive(Serialize)]
struct PlotRow {
    epsilon: f64,
    eval_return: f64,
    gap: f64,
    wall_ms: f64,
}

/// Writes `epsilon,eval_return,gap,wall_ms` rows sorted by epsilon.
pub fn emit_plot_data(records: &[SweepRecord], path: &Path) -> CliResult<()> {
    if records.is_empty() {
        return Err(CliError::Config("no sweep records to write".into()));
    }
    let mut sorted: Vec<&SweepRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in sorted {
        writer
            .serialize(PlotRow {
                epsilon: r.epsilon,
                eval_return: r.eval_return,
                gap: r.gap,
                wall_ms: r.wall_ms,
            })
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(epsilon: f64) -> SweepRecord {
        SweepRecord {
            epsilon,
            trained_on: TrainedOn::PerturbedReward,
            eval_return: 0.5,
            gap: 0.0,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn single_record_is_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        emit_plot_data(&[record(0.1)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next(), Some("epsilon,eval_return,gap,wall_ms"));
    }

    #[test]
    fn rows_are_sorted_by_epsilon() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        emit_plot_data(&[record(0.5), record(0.0), record(0.1)], &path).unwrap();
        let eps: Vec<String> = std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().to_string())
            .collect();
        assert_eq!(eps, ["0.0", "0.1", "0.5"]);
    }

    #[test]
    fn empty_input_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plot_data(&[], &dir.path().join("plot.csv")).is_err());
    }
}
