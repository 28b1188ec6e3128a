//! Concave objectives over occupancy measures and their conjugates.
//!
//! Every objective `R` exposes its value, a supergradient, and the conjugate
//! `(-R)*(-r') = sup_mu <-r', mu> + R(mu)`, which is the penalty paid by an
//! adversarial reward `r'` in the dual problem.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{dot, OccupancyMeasure, RewardTable};
use crate::metric::MetricSpec;
use crate::solvers::transport_distance;

/// Mixing weight toward uniform before taking logarithms of an occupancy.
pub const FLOOR_DELTA: f64 = 1e-10;

/// Mixing weight toward uniform applied to expert occupancies.
pub const EXPERT_FLOOR: f64 = 1e-8;

/// Pointwise slack when testing `r' >= r` for the linear objective.
pub const LINEAR_FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `<r, mu>`.
    Linear { r: RewardTable },
    /// `<r, mu> - eps sum_{s,a} mu(s,a) log(pi_mu(a|s) n_A)`.
    EntropySac { r: RewardTable, epsilon: f64 },
    /// `<r, mu> - eps sum mu^2`.
    Tsallis2 { r: RewardTable, epsilon: f64 },
    /// `<r, mu> - (eps/4) sum mu^2 / nu`.
    Buffer {
        r: RewardTable,
        epsilon: f64,
        nu: OccupancyMeasure,
    },
    /// `-KL(mu, mu_E)`.
    KlImitation { mu_e: OccupancyMeasure },
    /// `-KL(mu, uniform)`.
    EntropyExploration { n_states: usize, n_actions: usize },
    /// Minus the L-Lipschitz IPM (equivalently the transport cost) to `mu_E`.
    LipschitzIpm { mu_e: OccupancyMeasure, metric: MetricSpec },
}

/// `(-R)*(-r')`, possibly `+inf` for indicator-type conjugates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugateValue {
    pub value: f64,
    /// False when `r'` lies outside the domain of an indicator-type conjugate.
    pub feasible: bool,
}

impl ConjugateValue {
    fn finite(value: f64) -> Self {
        Self { value, feasible: true }
    }

    fn infeasible() -> Self {
        Self {
            value: f64::INFINITY,
            feasible: false,
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon {epsilon} must be positive")))
    }
}

fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

impl Objective {
    pub fn linear(r: RewardTable) -> Self {
        Objective::Linear { r }
    }

    pub fn entropy_sac(r: RewardTable, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Objective::EntropySac { r, epsilon })
    }

    pub fn tsallis2(r: RewardTable, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Objective::Tsallis2 { r, epsilon })
    }

    pub fn buffer(r: RewardTable, epsilon: f64, nu: OccupancyMeasure) -> Result<Self> {
        check_epsilon(epsilon)?;
        nu.check_shape("buffer distribution", r.shape())?;
        if nu.as_slice().iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidParameter(
                "buffer distribution must be strictly positive".into(),
            ));
        }
        Ok(Objective::Buffer { r, epsilon, nu })
    }

    /// The expert occupancy is mixed with `EXPERT_FLOOR` of the uniform
    /// distribution so the divergence stays finite on the whole polytope.
    pub fn kl_imitation(mu_e: &OccupancyMeasure) -> Self {
        Objective::KlImitation {
            mu_e: mu_e.floored(EXPERT_FLOOR),
        }
    }

    pub fn entropy_exploration(n_states: usize, n_actions: usize) -> Self {
        Objective::EntropyExploration { n_states, n_actions }
    }

    pub fn lipschitz_ipm(mu_e: OccupancyMeasure, metric: MetricSpec) -> Result<Self> {
        if metric.len() != mu_e.len() {
            return Err(Error::InvalidMetric(format!(
                "metric on {} points for an occupancy over {} pairs",
                metric.len(),
                mu_e.len()
            )));
        }
        Ok(Objective::LipschitzIpm { mu_e, metric })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Objective::Linear { .. } => "linear",
            Objective::EntropySac { .. } => "sac",
            Objective::Tsallis2 { .. } => "tsallis",
            Objective::Buffer { .. } => "buffer",
            Objective::KlImitation { .. } => "kl-imitation",
            Objective::EntropyExploration { .. } => "entropy-explore",
            Objective::LipschitzIpm { .. } => "ipm",
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Objective::Linear { r }
            | Objective::EntropySac { r, .. }
            | Objective::Tsallis2 { r, .. }
            | Objective::Buffer { r, .. } => r.shape(),
            Objective::KlImitation { mu_e } | Objective::LipschitzIpm { mu_e, .. } => mu_e.shape(),
            Objective::EntropyExploration { n_states, n_actions } => (*n_states, *n_actions),
        }
    }

    /// The task reward, for objectives that carry one.
    pub fn reward(&self) -> Option<&RewardTable> {
        match self {
            Objective::Linear { r }
            | Objective::EntropySac { r, .. }
            | Objective::Tsallis2 { r, .. }
            | Objective::Buffer { r, .. } => Some(r),
            _ => None,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self {
            Objective::EntropySac { epsilon, .. }
            | Objective::Tsallis2 { epsilon, .. }
            | Objective::Buffer { epsilon, .. } => Some(*epsilon),
            _ => None,
        }
    }

    /// Whether `r' -> (-R)*(-r')` is nonincreasing under the pointwise order,
    /// which is what lets the dual be searched over rewards of the form
    /// `r_V(s,a) = V(s) - gamma E[V(s')]`.
    pub fn is_increasing_conjugate(&self) -> bool {
        matches!(
            self,
            Objective::Linear { .. }
                | Objective::EntropySac { .. }
                | Objective::KlImitation { .. }
                | Objective::EntropyExploration { .. }
        )
    }

    /// Objectives of the form `<r, mu> - eps Omega(mu)`.
    pub fn is_penalty_form(&self) -> bool {
        matches!(
            self,
            Objective::EntropySac { .. } | Objective::Tsallis2 { .. } | Objective::Buffer { .. }
        )
    }

    /// Reference distribution for the divergence objectives.
    fn reference(&self) -> Option<Vec<f64>> {
        match self {
            Objective::KlImitation { mu_e } => Some(mu_e.as_slice().to_vec()),
            Objective::EntropyExploration { n_states, n_actions } => {
                let n = n_states * n_actions;
                Some(vec![1.0 / n as f64; n])
            }
            _ => None,
        }
    }

    pub fn eval(&self, mu: &OccupancyMeasure) -> Result<f64> {
        mu.check_shape(self.name(), self.shape())?;
        let m = mu.as_slice();
        Ok(match self {
            Objective::Linear { r } => dot(m, r.as_slice()),
            Objective::EntropySac { r, epsilon } => dot(m, r.as_slice()) - epsilon * sac_penalty(mu),
            Objective::Tsallis2 { r, epsilon } => dot(m, r.as_slice()) - epsilon * dot(m, m),
            Objective::Buffer { r, epsilon, nu } => {
                let quad: f64 = m.iter().zip(nu.as_slice()).map(|(x, v)| x * x / v).sum();
                dot(m, r.as_slice()) - 0.25 * epsilon * quad
            }
            Objective::KlImitation { .. } | Objective::EntropyExploration { .. } => {
                let reference = self.reference().expect("divergence objective");
                let floored = mu.floored(FLOOR_DELTA);
                -floored
                    .as_slice()
                    .iter()
                    .zip(&reference)
                    .map(|(&x, &y)| xlogy_ratio(x, y))
                    .sum::<f64>()
            }
            Objective::LipschitzIpm { mu_e, metric } => -transport_distance(mu, mu_e, metric)?.cost,
        })
    }

    /// A supergradient of `R` at `mu`. Logarithms are taken at the floored
    /// occupancy `(1 - FLOOR_DELTA) mu + FLOOR_DELTA uniform`.
    pub fn grad(&self, mu: &OccupancyMeasure) -> Result<RewardTable> {
        mu.check_shape(self.name(), self.shape())?;
        let (n_states, n_actions) = mu.shape();
        let m = mu.as_slice();
        let values: Vec<f64> = match self {
            Objective::Linear { r } => r.as_slice().to_vec(),
            Objective::EntropySac { r, epsilon } => {
                let floored = mu.floored(FLOOR_DELTA);
                let log_n = (n_actions as f64).ln();
                (0..n_states)
                    .flat_map(|s| {
                        let mass = floored.state_mass(s);
                        let row = floored.row(s).to_vec();
                        (0..n_actions).map(move |a| (row[a] / mass).ln() + log_n)
                    })
                    .zip(r.as_slice())
                    .map(|(l, x)| x - epsilon * l)
                    .collect()
            }
            Objective::Tsallis2 { r, epsilon } => {
                r.as_slice().iter().zip(m).map(|(x, y)| x - 2.0 * epsilon * y).collect()
            }
            Objective::Buffer { r, epsilon, nu } => r
                .as_slice()
                .iter()
                .zip(m)
                .zip(nu.as_slice())
                .map(|((x, y), v)| x - 0.5 * epsilon * y / v)
                .collect(),
            Objective::KlImitation { .. } | Objective::EntropyExploration { .. } => {
                let reference = self.reference().expect("divergence objective");
                mu.floored(FLOOR_DELTA)
                    .as_slice()
                    .iter()
                    .zip(&reference)
                    .map(|(x, y)| -((x / y).ln() + 1.0))
                    .collect()
            }
            Objective::LipschitzIpm { mu_e, metric } => transport_distance(mu, mu_e, metric)?
                .potential
                .into_iter()
                .map(|h| -h)
                .collect(),
        };
        RewardTable::new(n_states, n_actions, values)
    }

    /// `(-R)*(-r')`.
    pub fn conjugate(&self, r_prime: &RewardTable) -> Result<ConjugateValue> {
        r_prime.check_shape("conjugate", self.shape())?;
        let rp = r_prime.as_slice();
        Ok(match self {
            Objective::Linear { r } => {
                if r.as_slice()
                    .iter()
                    .zip(rp)
                    .all(|(x, y)| *y >= x - LINEAR_FEASIBILITY_TOL)
                {
                    ConjugateValue::finite(0.0)
                } else {
                    ConjugateValue::infeasible()
                }
            }
            Objective::EntropySac { r, .. } | Objective::Tsallis2 { r, .. } | Objective::Buffer { r, .. } => {
                let diff: Vec<f64> = r.as_slice().iter().zip(rp).map(|(x, y)| x - y).collect();
                ConjugateValue::finite(self.penalty_conjugate(&diff)?)
            }
            Objective::KlImitation { .. } | Objective::EntropyExploration { .. } => {
                let reference = self.reference().expect("divergence objective");
                ConjugateValue::finite(reference.iter().zip(rp).map(|(w, y)| w * (-y).exp()).sum::<f64>() - 1.0)
            }
            Objective::LipschitzIpm { mu_e, metric } => {
                if metric.is_lipschitz(rp) {
                    ConjugateValue::finite(-dot(rp, mu_e.as_slice()))
                } else {
                    ConjugateValue::infeasible()
                }
            }
        })
    }

    /// `eps Omega*(h / eps)` for the penalty-form objectives, with `h` laid
    /// out like a reward table.
    pub fn penalty_conjugate(&self, h: &[f64]) -> Result<f64> {
        let shape = self.shape();
        if h.len() != shape.0 * shape.1 {
            return Err(Error::shape("penalty conjugate", shape, (h.len(), 1)));
        }
        match self {
            Objective::EntropySac { epsilon, .. } => {
                let n_actions = shape.1;
                let worst = h
                    .chunks(n_actions)
                    .map(|row| row.iter().map(|x| (x / epsilon).exp()).sum::<f64>() / n_actions as f64)
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok(epsilon * (worst - 1.0))
            }
            Objective::Tsallis2 { epsilon, .. } => Ok(h.iter().map(|x| x * x).sum::<f64>() / (4.0 * epsilon)),
            Objective::Buffer { epsilon, nu, .. } => {
                Ok(h.iter().zip(nu.as_slice()).map(|(x, v)| v * x * x).sum::<f64>() / epsilon)
            }
            _ => Err(Error::Unsupported {
                objective: self.name(),
                operation: "penalty_conjugate",
            }),
        }
    }

    /// Gradient of `r' -> (-R)*(-r')` for the increasing smooth conjugates;
    /// for the entropy-regularized one, the gradient of the term belonging to
    /// the maximizing state (lowest index on ties).
    pub fn conjugate_grad(&self, r_prime: &RewardTable) -> Result<RewardTable> {
        r_prime.check_shape("conjugate gradient", self.shape())?;
        let (n_states, n_actions) = self.shape();
        let rp = r_prime.as_slice();
        let values = match self {
            Objective::EntropySac { r, epsilon } => {
                let weights: Vec<f64> = r
                    .as_slice()
                    .iter()
                    .zip(rp)
                    .map(|(x, y)| ((x - y) / epsilon).exp() / n_actions as f64)
                    .collect();
                let mut best = 0;
                let mut best_total = f64::NEG_INFINITY;
                for (s, row) in weights.chunks(n_actions).enumerate() {
                    let total: f64 = row.iter().sum();
                    if total > best_total {
                        best = s;
                        best_total = total;
                    }
                }
                let mut g = vec![0.0; rp.len()];
                for a in 0..n_actions {
                    g[best * n_actions + a] = -weights[best * n_actions + a];
                }
                g
            }
            Objective::KlImitation { .. } | Objective::EntropyExploration { .. } => {
                let reference = self.reference().expect("divergence objective");
                reference.iter().zip(rp).map(|(w, y)| -w * (-y).exp()).collect()
            }
            _ => {
                return Err(Error::Unsupported {
                    objective: self.name(),
                    operation: "conjugate_grad",
                })
            }
        };
        RewardTable::new(n_states, n_actions, values)
    }
}

/// `sum_{s,a} mu(s,a) log(pi_mu(a|s) n_A)`, with `0 log 0 = 0`.
pub fn sac_penalty(mu: &OccupancyMeasure) -> f64 {
    let (n_states, n_actions) = mu.shape();
    let log_n = (n_actions as f64).ln();
    (0..n_states)
        .map(|s| {
            let mass = mu.state_mass(s);
            mu.row(s)
                .iter()
                .filter(|&&m| m > 0.0)
                .map(|&m| m * ((m / mass).ln() + log_n))
                .sum::<f64>()
        })
        .sum()
}

pub fn objective_eval(obj: &Objective, mu: &OccupancyMeasure) -> Result<f64> {
    obj.eval(mu)
}

pub fn objective_grad(obj: &Objective, mu: &OccupancyMeasure) -> Result<RewardTable> {
    obj.grad(mu)
}

pub fn conjugate_eval(obj: &Objective, r_prime: &RewardTable) -> Result<ConjugateValue> {
    obj.conjugate(r_prime)
}

pub fn is_increasing_conjugate(obj: &Objective) -> bool {
    obj.is_increasing_conjugate()
}
