use super::SolveResult;
use crate::error::{Error, Result};
use crate::mdp::{occupancy_from_policy, Mdp, Policy, RewardTable, ValueTable};

/// Sup-norm fixed-point residual at which iteration stops.
pub const SOFT_VI_TOL: f64 = 1e-10;

/// Entropy-regularized control by iterating the soft Bellman operator
/// `V(s) <- eps log sum_a (1/n_A) exp((r(s,a) + gamma E[V(s') | s,a]) / eps)`.
///
/// Returns the soft-greedy policy's occupancy, `aux = V*` (unnormalized) and
/// `value = <r, mu> - eps sum mu log(pi n_A)`. The iteration cap is
/// `10 ln(1/tol) / (1 - gamma)`.
pub fn soft_value_iteration(mdp: &Mdp, r: &RewardTable, epsilon: f64) -> Result<SolveResult> {
    r.check_shape("soft_value_iteration", mdp.shape())?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be positive")));
    }
    let (n_states, n_actions) = mdp.shape();
    let gamma = mdp.gamma();
    let cap = (10.0 * (1.0 / SOFT_VI_TOL).ln() / (1.0 - gamma)).ceil() as usize;
    let log_n = (n_actions as f64).ln();

    let q_values = |v: &[f64], s: usize| -> Vec<f64> {
        (0..n_actions)
            .map(|a| r.get(s, a) + gamma * mdp.expect_next(s, a, v))
            .collect()
    };
    let backup = |v: &[f64], s: usize| -> f64 {
        let q = q_values(v, s);
        let top = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = q.iter().map(|x| ((x - top) / epsilon).exp()).sum();
        top + epsilon * (sum.ln() - log_n)
    };

    let mut v = vec![0.0; n_states];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cap {
        iterations += 1;
        let next: Vec<f64> = (0..n_states).map(|s| backup(&v, s)).collect();
        residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if residual <= SOFT_VI_TOL {
            break;
        }
    }
    if residual > SOFT_VI_TOL {
        return Err(Error::NotConverged {
            solver: "soft_value_iteration",
            iterations,
            residual,
        });
    }

    let mut probs = Vec::with_capacity(n_states * n_actions);
    for s in 0..n_states {
        let q = q_values(&v, s);
        let top = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = q.iter().map(|x| ((x - top) / epsilon).exp()).collect();
        let total: f64 = w.iter().sum();
        probs.extend(w.into_iter().map(|x| x / total));
    }
    let policy = Policy::from_raw(n_states, n_actions, probs);
    let mu = occupancy_from_policy(mdp, &policy)?;
    let penalty: f64 = mu
        .as_slice()
        .iter()
        .zip(policy.as_slice())
        .filter(|(m, p)| **m > 0.0 && **p > 0.0)
        .map(|(m, p)| m * (p.ln() + log_n))
        .sum();
    let ret: f64 = mu.as_slice().iter().zip(r.as_slice()).map(|(m, x)| m * x).sum();
    Ok(SolveResult {
        value: ret - epsilon * penalty,
        mu,
        aux: Some(ValueTable::from_raw(v)),
        iterations,
        certificate: residual,
        certified: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::bandit;

    #[test]
    fn single_state_closed_form() {
        let inst = bandit(&[1.0, 0.0], 0.9).unwrap();
        let res = soft_value_iteration(&inst.mdp, &inst.reward, 1.0).unwrap();
        let v_star = ((1f64.exp() + 1.0) / 2.0).ln() / 0.1;
        assert!((res.aux.as_ref().unwrap()[0] - v_star).abs() < 1e-8);
        assert!((res.value - 0.1 * v_star).abs() < 1e-9);
        assert!((res.value - 0.620115).abs() < 1e-6);
    }

    #[test]
    fn myopic_log_mean_exp() {
        let inst = bandit(&[1.0, 0.0], 0.0).unwrap();
        let res = soft_value_iteration(&inst.mdp, &inst.reward, 1.0).unwrap();
        assert!((res.aux.unwrap()[0] - ((1f64.exp() + 1.0) / 2.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_temperature_limit() {
        let inst = bandit(&[1.0, 0.0], 0.9).unwrap();
        let res = soft_value_iteration(&inst.mdp, &inst.reward, 1e-6).unwrap();
        assert!((res.value - 1.0).abs() < 1e-5);
    }

    #[test]
    fn rejects_nonpositive_temperature() {
        let inst = bandit(&[1.0, 0.0], 0.9).unwrap();
        assert!(soft_value_iteration(&inst.mdp, &inst.reward, 0.0).is_err());
    }
}
