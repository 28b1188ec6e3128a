//! The Lipschitz-IPM imitation objective as a pair of linear programs.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::Result;
use crate::mdp::{occupancy_from_policy, policy_from_occupancy, Mdp, OccupancyMeasure, RewardTable, ValueTable};
use crate::metric::MetricSpec;
use crate::regularizers::Objective;
use crate::solvers::{solve_lp, SolveResult};

const SUPPORT_TOL: f64 = 1e-15;

fn support(mu_e: &OccupancyMeasure) -> Vec<usize> {
    (0..mu_e.len()).filter(|&y| mu_e.as_slice()[y] > SUPPORT_TOL).collect()
}

/// `min_{mu in K} W_{L d}(mu, mu_E)` as one program over the occupancy and a
/// transport plan from it to the expert.
///
/// The program's occupancy is snapped back onto the polytope through its
/// policy, and the reported value is the exact transport cost from there.
pub(crate) fn ipm_primal(
    mdp: &Mdp,
    obj: &Objective,
    mu_e: &OccupancyMeasure,
    metric: &MetricSpec,
) -> Result<SolveResult> {
    let (n_states, n_actions) = mdp.shape();
    let n = n_states * n_actions;
    let sinks = support(mu_e);
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mu: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let plan: Vec<Vec<_>> = (0..n)
        .map(|x| {
            sinks
                .iter()
                .map(|&y| lp.add_var(metric.cost(x, y), (0.0, f64::INFINITY)))
                .collect()
        })
        .collect();
    let g = mdp.gamma();
    for s in 0..n_states {
        let mut coeffs = vec![0.0; n];
        for a in 0..n_actions {
            coeffs[s * n_actions + a] += 1.0;
        }
        for (x, c) in coeffs.iter_mut().enumerate() {
            *c -= g * mdp.transition_row(x / n_actions, x % n_actions)[s];
        }
        let expr: Vec<_> = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(x, c)| (mu[x], *c))
            .collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, (1.0 - g) * mdp.mu0()[s]);
    }
    for x in 0..n {
        let mut expr: Vec<_> = plan[x].iter().map(|&p| (p, 1.0)).collect();
        expr.push((mu[x], -1.0));
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, 0.0);
    }
    for (j, &y) in sinks.iter().enumerate() {
        let expr: Vec<_> = plan.iter().map(|row| (row[j], 1.0)).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, mu_e.as_slice()[y]);
    }
    let solution = solve_lp(&lp, "imitation program")?;
    let raw: Vec<f64> = mu.iter().map(|&v| solution.var_value(v).max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    let lp_mu = OccupancyMeasure::from_raw(n_states, n_actions, raw.into_iter().map(|v| v / total).collect());
    let polished = occupancy_from_policy(mdp, &policy_from_occupancy(&lp_mu))?;
    Ok(SolveResult {
        value: obj.eval(&polished)?,
        mu: polished,
        aux: None,
        iterations: 1,
        certificate: 0.0,
        certified: true,
    })
}

/// Optimal adversarial reward for the IPM objective.
///
/// Solves the dual program
/// `max (1 - gamma) <mu0, V> + <g, mu_E>` subject to `r_V(x) + g(y) <= L d(x, y)`,
/// then returns the c-transform `g~(y) = min_x L d(x, y) - r_V(x)` on all of
/// `X`, which is exactly L-Lipschitz, together with `V`.
pub(crate) fn ipm_adversary(
    mdp: &Mdp,
    mu_e: &OccupancyMeasure,
    metric: &MetricSpec,
) -> Result<(RewardTable, ValueTable)> {
    let (n_states, n_actions) = mdp.shape();
    let n = n_states * n_actions;
    let sinks = support(mu_e);
    let g = mdp.gamma();
    let free = (f64::NEG_INFINITY, f64::INFINITY);
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let v: Vec<_> = (0..n_states)
        .map(|s| lp.add_var((1.0 - g) * mdp.mu0()[s], free))
        .collect();
    // The program is invariant under V + c, g - (1 - gamma) c; pin one potential.
    let pot: Vec<_> = sinks
        .iter()
        .enumerate()
        .map(|(j, &y)| lp.add_var(mu_e.as_slice()[y], if j == 0 { (0.0, 0.0) } else { free }))
        .collect();
    for x in 0..n {
        let (s, a) = (x / n_actions, x % n_actions);
        let mut coeffs: Vec<f64> = mdp.transition_row(s, a).iter().map(|p| -g * p).collect();
        coeffs[s] += 1.0;
        let base: Vec<_> = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (v[i], *c))
            .collect();
        for (j, &y) in sinks.iter().enumerate() {
            let mut expr = base.clone();
            expr.push((pot[j], 1.0));
            lp.add_constraint(expr.as_slice(), ComparisonOp::Le, metric.cost(x, y));
        }
    }
    let solution = solve_lp(&lp, "imitation adversary")?;
    let value_fn = ValueTable::from_raw(v.iter().map(|&var| *solution.var_value(var)).collect());
    let r_v = super::adversarial_reward_from_value(mdp, &value_fn)?;
    let adversary = RewardTable::from_fn(n_states, n_actions, |s, a| {
        let y = s * n_actions + a;
        (0..n)
            .map(|x| metric.cost(x, y) - r_v.as_slice()[x])
            .fold(f64::INFINITY, f64::min)
    })?;
    Ok((adversary, value_fn))
}
