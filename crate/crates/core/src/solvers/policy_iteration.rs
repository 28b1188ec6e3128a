use super::SolveResult;
use crate::error::{Error, Result};
use crate::mdp::{evaluate_policy, expected_return, occupancy_from_policy, Mdp, Policy, RewardTable, ValueTable};

/// Keep the incumbent action unless another beats it by more than this
/// (relative) margin; prevents cycling between numerically tied actions.
const IMPROVEMENT_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100_000;

/// Exact maximizer of `<r, mu>` over the flow polytope.
///
/// Starts from the myopic greedy policy. Each sweep evaluates the current
/// deterministic policy by a dense solve and switches a state's action only
/// on strict improvement; ties go to the lowest action index.
pub fn policy_iteration(mdp: &Mdp, r: &RewardTable) -> Result<SolveResult> {
    r.check_shape("policy_iteration", mdp.shape())?;
    let actions: Vec<usize> = (0..mdp.n_states()).map(|s| argmax(r.row(s))).collect();
    policy_iteration_from(mdp, r, &actions)
}

/// [`policy_iteration`] warm-started from a deterministic policy.
pub fn policy_iteration_from(mdp: &Mdp, r: &RewardTable, init: &[usize]) -> Result<SolveResult> {
    let (actions, v, sweeps) = greedy_policy_iteration(mdp, r, init)?;
    let mu = occupancy_from_policy(mdp, &Policy::deterministic(mdp.n_actions(), &actions)?)?;
    Ok(SolveResult {
        value: expected_return(&mu, r)?,
        mu,
        aux: Some(v),
        iterations: sweeps,
        certificate: 0.0,
        certified: true,
    })
}

/// Returns the optimal actions, their value function and the sweep count.
pub(crate) fn greedy_policy_iteration(
    mdp: &Mdp,
    r: &RewardTable,
    init: &[usize],
) -> Result<(Vec<usize>, ValueTable, usize)> {
    r.check_shape("policy_iteration", mdp.shape())?;
    let (n_states, n_actions) = mdp.shape();
    if init.len() != n_states || init.iter().any(|&a| a >= n_actions) {
        return Err(Error::InvalidPolicy("initial actions do not match the MDP".into()));
    }
    let gamma = mdp.gamma();
    let mut actions = init.to_vec();
    for sweep in 1..=MAX_SWEEPS {
        let v = evaluate_policy(mdp, &Policy::deterministic(n_actions, &actions)?, r)?;
        let mut changed = false;
        for (s, current) in actions.iter_mut().enumerate() {
            let q = |a: usize| r.get(s, a) + gamma * mdp.expect_next(s, a, v.as_slice());
            let incumbent = q(*current);
            let margin = IMPROVEMENT_TOL * incumbent.abs().max(1.0);
            let (mut best_a, mut best_q) = (*current, incumbent + margin);
            for a in 0..n_actions {
                let qa = q(a);
                if qa > best_q {
                    best_a = a;
                    best_q = qa;
                }
            }
            if best_a != *current {
                *current = best_a;
                changed = true;
            }
        }
        if !changed {
            return Ok((actions, v, sweep));
        }
    }
    Err(Error::NotConverged {
        solver: "policy_iteration",
        iterations: MAX_SWEEPS,
        residual: f64::NAN,
    })
}

/// Index of the first maximal entry.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}
