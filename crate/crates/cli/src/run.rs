//! Command dispatch and artifact writing.

use std::path::{Path, PathBuf};

use regdual::duality::{
    duality_gap_report, q_objective_minimize, solve_dual_value, solve_primal, verify_optimality, DualityReport,
    Verdict, DUAL_TOL, PRIMAL_FW_TOL,
};
use regdual::metric::LIPSCHITZ_TOL;
use regdual::solvers::SOFT_VI_TOL;
use regdual::{Instance, Mdp, Objective, OccupancyMeasure, QTable, ValueTable};
use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::error::{CliError, CliResult, EXIT_FAIL, EXIT_PASS};
use crate::sweep::{emit_plot_data, robustness_sweep};

/// Tolerance on flow residuals and transition row sums re-checked by `verify`.
pub const INVARIANT_TOL: f64 = 1e-9;
/// Agreement required between the Q-function minimum and the primal.
pub const Q_EQUALITY_TOL: f64 = 1e-3;
/// Slack allowed below the primal for non-increasing conjugates.
pub const Q_LOWER_TOL: f64 = 1e-6;
const Q_SOLVER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub command: Command,
    pub status: i32,
    pub verdicts: Vec<Verdict>,
    /// File names inside the output directory.
    pub artifacts: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.status == EXIT_PASS
    }
}

fn verdict(name: &str, pass: bool, value: f64, tolerance: f64) -> Verdict {
    Verdict {
        name: name.into(),
        pass,
        value,
        tolerance,
    }
}

struct Artifacts<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl Artifacts<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(name.into());
        self.dir.join(name)
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("artifacts serialize");
        self.text(name, &text)
    }

    fn text(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.path(name);
        std::fs::write(&path, format!("{text}\n")).map_err(|e| CliError::io(&path, e))
    }
}

/// Runs one command, writing its artifacts plus `config.json` and
/// `summary.json` into the output directory. The status is 0 iff every
/// verdict passes.
pub fn run(config: &RunConfig) -> CliResult<Outcome> {
    config.validate()?;
    let dir = config.output.as_path();
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = Artifacts { dir, names: Vec::new() };
    out.json("config.json", config)?;
    let inst = config.load_instance()?;
    let verdicts = match config.command {
        Command::Generate => {
            out.text("instance.json", &inst.to_json())?;
            Vec::new()
        }
        Command::Solve => solve(config, &inst, &mut out)?,
        Command::Dual => dual(config, &inst, &mut out)?,
        Command::Verify => verify(config, &inst, &mut out)?,
        Command::Qlearn => qlearn(config, &inst, &mut out)?,
        Command::Sweep => {
            let spec = config.sweep.as_ref().expect("checked by validate");
            let records = robustness_sweep(&inst, spec, config.timing)?;
            emit_plot_data(&records, &out.path("sweep.csv"))?;
            out.json("sweep.json", &records)?;
            Vec::new()
        }
    };
    let status = if verdicts.iter().all(|v| v.pass) {
        EXIT_PASS
    } else {
        EXIT_FAIL
    };
    let mut artifacts = out.names.clone();
    artifacts.push("summary.json".into());
    let outcome = Outcome {
        command: config.command,
        status,
        verdicts,
        artifacts,
    };
    out.json("summary.json", &outcome)?;
    Ok(outcome)
}

fn solve(config: &RunConfig, inst: &Instance, out: &mut Artifacts) -> CliResult<Vec<Verdict>> {
    let obj = config.build_objective(inst)?;
    let result = solve_primal(&inst.mdp, &obj)?;
    out.json("solution.json", &result)?;
    // Usable directly as `--expert` for the imitation objectives.
    out.json("occupancy.json", &result.mu)?;
    Ok(vec![verdict(
        "primal-certified",
        result.certified,
        result.certificate,
        primal_tolerance(&obj),
    )])
}

/// Suboptimality bound the primal solver stops at.
fn primal_tolerance(obj: &Objective) -> f64 {
    match obj {
        Objective::EntropySac { .. } => SOFT_VI_TOL,
        Objective::Linear { .. } | Objective::LipschitzIpm { .. } => 0.0,
        _ => PRIMAL_FW_TOL,
    }
}

#[derive(Serialize)]
struct DualArtifact<'a> {
    objective: &'static str,
    primal_value: f64,
    dual: &'a regdual::duality::DualSolution,
}

fn dual(config: &RunConfig, inst: &Instance, out: &mut Artifacts) -> CliResult<Vec<Verdict>> {
    let obj = config.build_objective(inst)?;
    let tol = config.tol.unwrap_or(DUAL_TOL);
    let sol = solve_dual_value(&inst.mdp, &obj, &ValueTable::zeros(inst.mdp.n_states()), tol)?;
    let primal = solve_primal(&inst.mdp, &obj)?;
    out.json(
        "dual.json",
        &DualArtifact {
            objective: obj.name(),
            primal_value: primal.value,
            dual: &sol,
        },
    )?;
    Ok(vec![
        verdict("dual-certified", sol.certified, sol.iterations as f64, tol),
        verdict(
            "weak-duality",
            sol.value >= primal.value - 1e-9,
            sol.value - primal.value,
            -1e-9,
        ),
    ])
}

fn invariant_verdicts(mdp: &Mdp, mu: &OccupancyMeasure) -> CliResult<Vec<Verdict>> {
    let (n_states, n_actions) = mdp.shape();
    let row_error = (0..n_states)
        .flat_map(|s| (0..n_actions).map(move |a| (s, a)))
        .map(|(s, a)| (mdp.transition_row(s, a).iter().sum::<f64>() - 1.0).abs())
        .fold((mdp.mu0().iter().sum::<f64>() - 1.0).abs(), f64::max);
    let flow = mdp.flow_residual(mu)?;
    Ok(vec![
        verdict("transition-rows", row_error <= INVARIANT_TOL, row_error, INVARIANT_TOL),
        verdict("flow-residual", flow <= INVARIANT_TOL, flow, INVARIANT_TOL),
    ])
}

fn verify(config: &RunConfig, inst: &Instance, out: &mut Artifacts) -> CliResult<Vec<Verdict>> {
    if let Some(path) = &config.report {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let report =
            DualityReport::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut verdicts = invariant_verdicts(&inst.mdp, &report.primal_occupancy)?;
        verdicts.push(verify_optimality(&inst.mdp, &report)?);
        out.json("verification.json", &verdicts)?;
        return Ok(verdicts);
    }
    let obj = config.build_objective(inst)?;
    let report = duality_gap_report(&inst.mdp, &obj)?;
    out.text("report.json", &report.to_json())?;
    let mut verdicts = invariant_verdicts(&inst.mdp, &report.primal_occupancy)?;
    verdicts.extend(report.verdicts.iter().cloned());
    let mut recomputed = verify_optimality(&inst.mdp, &report)?;
    recomputed.name = "recomputed-slack".into();
    verdicts.push(recomputed);
    verdicts.push(verdict(
        "primal-certified",
        report.metadata.primal_certified,
        report.metadata.primal_certificate,
        primal_tolerance(&obj),
    ));
    if let Some(certified) = report.metadata.dual_certified {
        let iterations = report.metadata.dual_iterations.unwrap_or(0) as f64;
        verdicts.push(verdict("dual-certified", certified, iterations, DUAL_TOL));
    }
    if let Objective::LipschitzIpm { metric, .. } = &obj {
        let violation = metric.lipschitz_violation(report.adversarial_reward.as_slice());
        verdicts.push(verdict(
            "witness-lipschitz",
            violation <= LIPSCHITZ_TOL,
            violation,
            LIPSCHITZ_TOL,
        ));
    }
    Ok(verdicts)
}

#[derive(Serialize)]
struct QArtifact<'a> {
    objective: &'static str,
    value: f64,
    primal_value: f64,
    q: &'a QTable,
    iterations: usize,
    certified: bool,
}

fn qlearn(config: &RunConfig, inst: &Instance, out: &mut Artifacts) -> CliResult<Vec<Verdict>> {
    let obj = config.build_objective(inst)?;
    let (n_states, n_actions) = inst.mdp.shape();
    let tol = config.tol.unwrap_or(Q_SOLVER_TOL);
    let min = q_objective_minimize(&inst.mdp, &obj, &QTable::zeros(n_states, n_actions), tol)?;
    let primal = solve_primal(&inst.mdp, &obj)?;
    out.json(
        "qlearn.json",
        &QArtifact {
            objective: obj.name(),
            value: min.value,
            primal_value: primal.value,
            q: &min.q,
            iterations: min.iterations,
            certified: min.certified,
        },
    )?;
    let diff = min.value - primal.value;
    let check = if obj.is_increasing_conjugate() {
        verdict("q-equality", diff.abs() <= Q_EQUALITY_TOL, diff, Q_EQUALITY_TOL)
    } else {
        verdict("q-upper-bound", diff >= -Q_LOWER_TOL, diff, -Q_LOWER_TOL)
    };
    Ok(vec![
        check,
        verdict("q-certified", min.certified, min.iterations as f64, tol),
    ])
}
