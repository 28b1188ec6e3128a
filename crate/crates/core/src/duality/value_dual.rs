use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{dot, Mdp, RewardTable, ValueTable};
use crate::regularizers::Objective;
use crate::solvers::policy_iteration;

use super::barrier::Epigraph;

/// Iteration budget of the Newton solve for the smooth conjugates.
pub const NEWTON_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSolution {
    /// Best `J(V)` found.
    pub value: f64,
    pub value_fn: ValueTable,
    /// `r_V` at the returned `V`.
    pub adversarial_reward: RewardTable,
    pub iterations: usize,
    /// False when the iteration budget ran out before the stopping rule fired.
    pub certified: bool,
}

/// `r_V(s, a) = V(s) - gamma sum_{s'} P(s'|s,a) V(s')`.
pub fn adversarial_reward_from_value(mdp: &Mdp, v: &ValueTable) -> Result<RewardTable> {
    if v.n_states() != mdp.n_states() {
        return Err(Error::shape(
            "adversarial_reward_from_value",
            (mdp.n_states(), 1),
            (v.n_states(), 1),
        ));
    }
    let g = mdp.gamma();
    let vs = v.as_slice();
    RewardTable::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        vs[s] - g * mdp.expect_next(s, a, vs)
    })
}

/// `J(V) = (1 - gamma) <mu0, V> + (-R)*(-r_V)`; may be `+inf`.
pub fn dual_objective(mdp: &Mdp, obj: &Objective, v: &ValueTable) -> Result<f64> {
    check_dual(mdp, obj)?;
    let r_v = adversarial_reward_from_value(mdp, v)?;
    Ok((1.0 - mdp.gamma()) * dot(mdp.mu0(), v.as_slice()) + obj.conjugate(&r_v)?.value)
}

/// Gradient of `J` (a subgradient for the entropy-regularized objective):
/// `(1 - gamma) mu0 + A^T c'` where `A V = r_V` and `c'` is the gradient of
/// the conjugate at `r_V`.
pub fn dual_gradient(mdp: &Mdp, obj: &Objective, v: &ValueTable) -> Result<Vec<f64>> {
    check_dual(mdp, obj)?;
    let r_v = adversarial_reward_from_value(mdp, v)?;
    let c = obj.conjugate_grad(&r_v)?;
    let g = mdp.gamma();
    let mut grad: Vec<f64> = mdp.mu0().iter().map(|m| (1.0 - g) * m).collect();
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let w = c.get(s, a);
            if w == 0.0 {
                continue;
            }
            grad[s] += w;
            for (dst, p) in grad.iter_mut().zip(mdp.transition_row(s, a)) {
                *dst -= g * p * w;
            }
        }
    }
    Ok(grad)
}

fn check_dual(mdp: &Mdp, obj: &Objective) -> Result<()> {
    if obj.shape() != mdp.shape() {
        return Err(Error::shape("value dual", mdp.shape(), obj.shape()));
    }
    if !obj.is_increasing_conjugate() {
        return Err(Error::Unsupported {
            objective: obj.name(),
            operation: "the value-parametrized dual",
        });
    }
    Ok(())
}

/// Minimizes `J(V)` over value functions, starting from `init`.
///
/// - Entropy-regularized: the epigraph form
///   `min (1 - gamma) <mu0, V> + t` subject to
///   `eps (sum_a U exp((r - r_V)(s,a)/eps) - 1) <= t` for every state, by a
///   log-barrier method with Newton centering, until the barrier bound is
///   below `tol`.
/// - KL imitation and exploration (smooth, strictly convex in `V`): damped
///   Newton with backtracking, until half the squared Newton decrement (an
///   estimate of `J(V) - min J`) is below `tol`.
/// - Linear: `J` is an indicator-constrained program whose minimizer is the
///   optimal value function, which is returned directly.
///
/// The returned `V` is never worse than `init`.
pub fn solve_dual_value(mdp: &Mdp, obj: &Objective, init: &ValueTable, tol: f64) -> Result<DualSolution> {
    check_dual(mdp, obj)?;
    if init.n_states() != mdp.n_states() {
        return Err(Error::shape(
            "solve_dual_value",
            (mdp.n_states(), 1),
            (init.n_states(), 1),
        ));
    }
    if let Objective::Linear { r } = obj {
        let exact = policy_iteration(mdp, r)?;
        let v = exact.aux.expect("policy iteration returns its value function");
        return Ok(DualSolution {
            value: dual_objective(mdp, obj, &v)?,
            adversarial_reward: adversarial_reward_from_value(mdp, &v)?,
            value_fn: v,
            iterations: exact.iterations,
            certified: true,
        });
    }

    if matches!(
        obj,
        Objective::KlImitation { .. } | Objective::EntropyExploration { .. }
    ) {
        return newton(mdp, obj, init, tol);
    }

    let (n_states, n_actions) = mdp.shape();
    let g = mdp.gamma();
    let rows = (0..n_states * n_actions)
        .map(|x| {
            let mut coeffs: Vec<f64> = mdp
                .transition_row(x / n_actions, x % n_actions)
                .iter()
                .map(|p| g * p)
                .collect();
            coeffs[x / n_actions] -= 1.0;
            coeffs.into_iter().enumerate().filter(|(_, c)| *c != 0.0).collect()
        })
        .collect();
    let cost = mdp.mu0().iter().map(|m| (1.0 - g) * m).collect();
    let solution = Epigraph::new(obj, cost, rows, Vec::new()).solve(init.as_slice(), tol)?;
    if !solution.certified {
        log::warn!("solve_dual_value: barrier stages exhausted before reaching {tol:e}");
    }
    let mut v = ValueTable::new(solution.z)?;
    let mut value = dual_objective(mdp, obj, &v)?;
    let initial = dual_objective(mdp, obj, init)?;
    if initial < value {
        v = init.clone();
        value = initial;
    }
    finish(mdp, v, value, solution.newton_steps, solution.certified)
}

/// Hessian of `J` for the smooth conjugates: `A^T diag(w) A` with
/// `w = -conjugate_grad(r_V)` and `(A V)(s,a) = V(s) - gamma E[V(s') | s,a]`.
fn dual_hessian(mdp: &Mdp, obj: &Objective, v: &ValueTable) -> Result<DMatrix<f64>> {
    let r_v = adversarial_reward_from_value(mdp, v)?;
    let w = obj.conjugate_grad(&r_v)?;
    let (n_states, n_actions) = mdp.shape();
    let g = mdp.gamma();
    let mut hessian = DMatrix::zeros(n_states, n_states);
    let mut row = vec![0.0; n_states];
    for s in 0..n_states {
        for a in 0..n_actions {
            let weight = -w.get(s, a);
            row.iter_mut()
                .zip(mdp.transition_row(s, a))
                .for_each(|(x, p)| *x = -g * p);
            row[s] += 1.0;
            for i in 0..n_states {
                if row[i] == 0.0 {
                    continue;
                }
                for j in 0..n_states {
                    hessian[(i, j)] += weight * row[i] * row[j];
                }
            }
        }
    }
    Ok(hessian)
}

fn newton(mdp: &Mdp, obj: &Objective, init: &ValueTable, tol: f64) -> Result<DualSolution> {
    const ARMIJO: f64 = 1e-4;
    const MIN_STEP: f64 = 1e-12;
    let n = mdp.n_states();
    let mut v = init.clone();
    let mut value = dual_objective(mdp, obj, &v)?;
    if !value.is_finite() {
        return Err(Error::InvalidParameter(
            "dual objective is not finite at the initial value function".into(),
        ));
    }
    let mut certified = false;
    let mut iterations = 0;
    while iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let grad = DVector::from_vec(dual_gradient(mdp, obj, &v)?);
        let hessian = dual_hessian(mdp, obj, &v)?;
        let step = match hessian.clone().cholesky() {
            Some(chol) => -chol.solve(&grad),
            None => -hessian.lu().solve(&grad).ok_or(Error::Singular("dual Newton step"))?,
        };
        let decrement = -grad.dot(&step);
        if !(decrement > 0.0) || decrement / 2.0 <= tol {
            certified = true;
            break;
        }
        let mut t = 1.0;
        loop {
            let trial = ValueTable::from_raw((0..n).map(|i| v[i] + t * step[i]).collect());
            let trial_value = dual_objective(mdp, obj, &trial)?;
            if trial_value <= value - ARMIJO * t * decrement {
                v = trial;
                value = trial_value;
                break;
            }
            t *= 0.5;
            if t < MIN_STEP {
                // No further progress is representable.
                certified = decrement / 2.0 <= tol.max(1e-12 * value.abs().max(1.0));
                return finish(mdp, v, value, iterations, certified);
            }
        }
    }
    if !certified {
        log::warn!("solve_dual_value: Newton budget of {NEWTON_MAX_ITER} iterations exhausted");
    }
    finish(mdp, v, value, iterations, certified)
}

fn finish(mdp: &Mdp, v: ValueTable, value: f64, iterations: usize, certified: bool) -> Result<DualSolution> {
    Ok(DualSolution {
        value,
        adversarial_reward: adversarial_reward_from_value(mdp, &v)?,
        value_fn: v,
        iterations,
        certified,
    })
}
