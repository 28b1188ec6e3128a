use std::fmt;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{expected_return, Mdp, OccupancyMeasure, RewardTable, ValueTable};
use crate::regularizers::Objective;
use crate::rng::seeded;
use crate::solvers::{policy_iteration, SolveResult};

use super::ipm::ipm_adversary;
use super::primal::solve_primal;
use super::value_dual::solve_dual_value;

/// Relative strong-duality tolerance, `gap <= GAP_TOL * max(1, |primal|)`.
pub const GAP_TOL: f64 = 1e-4;
/// Relative strong-duality tolerance for KL imitation and exploration.
pub const SMOOTH_GAP_TOL: f64 = 1e-3;
/// Relative tolerance on the optimality slack.
pub const THM2_TOL: f64 = 1e-6;
/// The slack may undershoot zero by this much through rounding.
pub const THM2_FLOOR: f64 = -1e-9;
/// Stopping tolerance handed to the value-dual solver.
pub const DUAL_TOL: f64 = 1e-12;

/// Where the adversarial reward of a report came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarySource {
    /// The task reward itself.
    Reward,
    /// `r_V` at the minimizer of the value-parametrized dual.
    ValueDual,
    /// The objective gradient at the primal optimum.
    Gradient,
    /// The c-transformed transport potential.
    Transport,
    /// A noisy copy of another report's adversary.
    Corrupted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    #[serde(with = "extended_f64")]
    pub value: f64,
    pub tolerance: f64,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.pass { "PASS" } else { "FAIL" };
        write!(
            f,
            "{} {status} value={:.3e} tol={:.3e}",
            self.name, self.value, self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub adversary: AdversarySource,
    pub primal_iterations: usize,
    pub primal_certificate: f64,
    pub primal_certified: bool,
    pub dual_iterations: Option<usize>,
    pub dual_certified: Option<bool>,
    pub gap_tolerance: f64,
    pub thm2_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub objective: String,
    pub primal_value: f64,
    /// `RL(r*) + (-R)*(-r*)`; `+inf` when `r*` leaves the conjugate's domain.
    #[serde(with = "extended_f64")]
    pub dual_value: f64,
    #[serde(with = "extended_f64")]
    pub gap: f64,
    pub adversarial_reward: RewardTable,
    pub dual_value_fn: Option<ValueTable>,
    /// `RL(r*) - <r*, mu*>`.
    pub thm2_slack: f64,
    pub notes: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub primal_occupancy: OccupancyMeasure,
    pub metadata: ReportMetadata,
}

impl DualityReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn gap_tolerance(obj: &Objective, primal_value: f64) -> f64 {
    let rel = match obj {
        Objective::KlImitation { .. } | Objective::EntropyExploration { .. } => SMOOTH_GAP_TOL,
        _ => GAP_TOL,
    };
    rel * primal_value.abs().max(1.0)
}

pub fn thm2_tolerance(primal_value: f64) -> f64 {
    THM2_TOL * primal_value.abs().max(1.0)
}

/// Solves the primal, extracts an adversarial reward `r*` and compares both
/// sides of the duality.
///
/// `r*` is the reward for the linear objective, `r_V` at the dual minimizer
/// for the other increasing conjugates, the gradient at the primal optimum for
/// the quadratic penalties, and the transport adversary for the IPM objective.
pub fn duality_gap_report(mdp: &Mdp, obj: &Objective) -> Result<DualityReport> {
    let primal = solve_primal(mdp, obj)?;
    let (adversary, value_fn, source, dual) = match obj {
        Objective::Linear { r } => (r.clone(), None, AdversarySource::Reward, None),
        Objective::EntropySac { .. } | Objective::KlImitation { .. } | Objective::EntropyExploration { .. } => {
            let sol = solve_dual_value(mdp, obj, &ValueTable::zeros(mdp.n_states()), DUAL_TOL)?;
            (
                sol.adversarial_reward,
                Some(sol.value_fn),
                AdversarySource::ValueDual,
                Some((sol.iterations, sol.certified)),
            )
        }
        Objective::Tsallis2 { .. } | Objective::Buffer { .. } => {
            (obj.grad(&primal.mu)?, None, AdversarySource::Gradient, None)
        }
        Objective::LipschitzIpm { mu_e, metric } => {
            let (adversary, v) = ipm_adversary(mdp, mu_e, metric)?;
            (adversary, Some(v), AdversarySource::Transport, None)
        }
    };
    assemble(mdp, obj, &primal, adversary, value_fn, source, dual)
}

fn assemble(
    mdp: &Mdp,
    obj: &Objective,
    primal: &SolveResult,
    adversary: RewardTable,
    dual_value_fn: Option<ValueTable>,
    source: AdversarySource,
    dual: Option<(usize, bool)>,
) -> Result<DualityReport> {
    let best = policy_iteration(mdp, &adversary)?.value;
    let conjugate = obj.conjugate(&adversary)?;
    let dual_value = if conjugate.feasible {
        best + conjugate.value
    } else {
        f64::INFINITY
    };
    let gap = (primal.value - dual_value).abs();
    let thm2_slack = best - expected_return(&primal.mu, &adversary)?;

    let gap_tol = gap_tolerance(obj, primal.value);
    let slack_tol = thm2_tolerance(primal.value);
    let verdicts = vec![
        Verdict {
            name: "strong-duality".into(),
            pass: gap <= gap_tol,
            value: gap,
            tolerance: gap_tol,
        },
        slack_verdict(thm2_slack, slack_tol),
    ];
    Ok(DualityReport {
        objective: obj.name().into(),
        primal_value: primal.value,
        dual_value,
        gap,
        adversarial_reward: adversary,
        dual_value_fn,
        thm2_slack,
        notes: verdicts.iter().map(Verdict::to_string).collect(),
        verdicts,
        primal_occupancy: primal.mu.clone(),
        metadata: ReportMetadata {
            adversary: source,
            primal_iterations: primal.iterations,
            primal_certificate: primal.certificate,
            primal_certified: primal.certified,
            dual_iterations: dual.map(|d| d.0),
            dual_certified: dual.map(|d| d.1),
            gap_tolerance: gap_tol,
            thm2_tolerance: slack_tol,
        },
    })
}

fn slack_verdict(slack: f64, tolerance: f64) -> Verdict {
    Verdict {
        name: "optimality-slack".into(),
        pass: (THM2_FLOOR..=tolerance).contains(&slack),
        value: slack,
        tolerance,
    }
}

/// Recomputes the optimality slack of the report's occupancy under its
/// adversarial reward and checks it against `max(1e-6, 1e-6 |primal|)`.
pub fn verify_optimality(mdp: &Mdp, report: &DualityReport) -> Result<Verdict> {
    mdp.check_occupancy(&report.primal_occupancy)?;
    let r = &report.adversarial_reward;
    let slack = policy_iteration(mdp, r)?.value - expected_return(&report.primal_occupancy, r)?;
    Ok(slack_verdict(slack, thm2_tolerance(report.primal_value)))
}

/// Rebuilds the dual side of `report` after adding `scale * N(0, 1)` noise,
/// drawn from `seed`, to every entry of the adversarial reward.
pub fn corrupt_adversary(
    mdp: &Mdp,
    obj: &Objective,
    report: &DualityReport,
    scale: f64,
    seed: u64,
) -> Result<DualityReport> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise scale {scale} must be nonnegative"
        )));
    }
    let mut rng = seeded(seed);
    let r = &report.adversarial_reward;
    let noisy: Vec<f64> = r
        .as_slice()
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + scale * z
        })
        .collect();
    let noisy = RewardTable::new(r.n_states(), r.n_actions(), noisy)?;
    let primal = SolveResult {
        value: report.primal_value,
        mu: report.primal_occupancy.clone(),
        aux: None,
        iterations: report.metadata.primal_iterations,
        certificate: report.metadata.primal_certificate,
        certified: report.metadata.primal_certified,
    };
    assemble(mdp, obj, &primal, noisy, None, AdversarySource::Corrupted, None)
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            serializer.serialize_f64(*v)
        } else {
            serializer.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        match Repr::deserialize(deserializer)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
