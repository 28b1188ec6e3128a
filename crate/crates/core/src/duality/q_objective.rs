//! The Q-function form of the regularized problem.
//!
//! For a penalty-form objective `<r, mu> - eps Omega(mu)` the functional is
//!
//! ```text
//! F(Q) = eps Omega*(rho / eps) + sum_s mu0(s) max_a Q(s, a),
//! rho  = (T Q - Q) / (1 - gamma),
//! ```
//!
//! where `T` is the normalized optimality operator of [`bellman_backup`].
//! Dividing by `1 - gamma` expresses the residual in reward units: for
//! `Q = (1 - gamma) Q_u`, `rho = T_u Q_u - Q_u` with `T_u` the usual
//! unnormalized operator. `F(Q)` upper-bounds the primal optimum for every `Q`
//! and attains it when `Omega*` is increasing.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{bellman_backup, Mdp, QTable};
use crate::regularizers::Objective;

use super::barrier::Epigraph;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QMinimum {
    pub value: f64,
    pub q: QTable,
    pub iterations: usize,
    pub certified: bool,
}

fn check(mdp: &Mdp, obj: &Objective, q: &QTable) -> Result<()> {
    if !obj.is_penalty_form() {
        return Err(Error::Unsupported {
            objective: obj.name(),
            operation: "the Q-function objective",
        });
    }
    if obj.shape() != mdp.shape() {
        return Err(Error::shape("q objective", mdp.shape(), obj.shape()));
    }
    q.check_shape("q objective", mdp.shape())
}

fn residual(mdp: &Mdp, obj: &Objective, q: &QTable) -> Result<Vec<f64>> {
    let r = obj.reward().expect("penalty-form objectives carry a reward");
    let tq = bellman_backup(mdp, r, q)?;
    let scale = 1.0 - mdp.gamma();
    Ok(tq
        .as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(t, x)| (t - x) / scale)
        .collect())
}

pub fn q_objective_eval(mdp: &Mdp, obj: &Objective, q: &QTable) -> Result<f64> {
    check(mdp, obj, q)?;
    let rho = residual(mdp, obj, q)?;
    let start: f64 = (0..mdp.n_states()).map(|s| mdp.mu0()[s] * q.max_action(s).0).sum();
    Ok(obj.penalty_conjugate(&rho)? + start)
}

/// Gradient of `h -> eps Omega*(h / eps)`; for the entropy-regularized
/// objective, of the term of the maximizing state (lowest index on ties).
fn penalty_conjugate_grad(obj: &Objective, h: &[f64]) -> Vec<f64> {
    match obj {
        Objective::EntropySac { epsilon, .. } => {
            let n_actions = obj.shape().1;
            let weights: Vec<f64> = h.iter().map(|x| (x / epsilon).exp() / n_actions as f64).collect();
            let mut best = 0;
            let mut best_total = f64::NEG_INFINITY;
            for (s, row) in weights.chunks(n_actions).enumerate() {
                let total: f64 = row.iter().sum();
                if total > best_total {
                    best = s;
                    best_total = total;
                }
            }
            let mut g = vec![0.0; h.len()];
            g[best * n_actions..(best + 1) * n_actions]
                .copy_from_slice(&weights[best * n_actions..(best + 1) * n_actions]);
            g
        }
        Objective::Tsallis2 { epsilon, .. } => h.iter().map(|x| x / (2.0 * epsilon)).collect(),
        Objective::Buffer { epsilon, nu, .. } => h
            .iter()
            .zip(nu.as_slice())
            .map(|(x, v)| 2.0 * v * x / epsilon)
            .collect(),
        _ => unreachable!("checked by the caller"),
    }
}

/// A subgradient of `F` at `q`, selecting the lowest-index maximizing action
/// wherever `max_a` is not differentiable.
pub fn q_objective_subgradient(mdp: &Mdp, obj: &Objective, q: &QTable) -> Result<QTable> {
    check(mdp, obj, q)?;
    let (n_states, n_actions) = mdp.shape();
    let rho = residual(mdp, obj, q)?;
    let w = penalty_conjugate_grad(obj, &rho);
    let g = mdp.gamma();
    let scale = 1.0 - g;
    let greedy: Vec<usize> = (0..n_states).map(|s| q.max_action(s).1).collect();
    let mut grad: Vec<f64> = w.iter().map(|x| -x / scale).collect();
    for s in 0..n_states {
        grad[s * n_actions + greedy[s]] += mdp.mu0()[s];
    }
    for x in 0..n_states * n_actions {
        if w[x] == 0.0 {
            continue;
        }
        let row = mdp.transition_row(x / n_actions, x % n_actions);
        for (s2, p) in row.iter().enumerate() {
            grad[s2 * n_actions + greedy[s2]] += g * p * w[x] / scale;
        }
    }
    QTable::new(n_states, n_actions, grad)
}

/// Minimizes `F` starting from `init`.
///
/// With `m(s)` standing for `max_a Q(s, a)` (and, for the entropy-regularized
/// objective, `t` for the maximum over states inside `Omega*`), the problem is
/// the smooth convex program
///
/// ```text
/// min  t + <mu0, m>        s.t.  Q(s,a) < m(s),  eps (sum_a U exp(rho(s,a)/eps) - 1) <= t
/// min  c(rho) + <mu0, m>   s.t.  Q(s,a) < m(s)                  (quadratic penalties)
/// ```
///
/// with `rho` affine in `(Q, m)`. It is solved by a log-barrier method with
/// damped Newton centering, started strictly inside from `init`, until the
/// barrier duality-gap bound is below `tol`.
pub fn q_objective_minimize(mdp: &Mdp, obj: &Objective, init: &QTable, tol: f64) -> Result<QMinimum> {
    check(mdp, obj, init)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let (n_s, n_a) = mdp.shape();
    let n_x = n_s * n_a;
    let g = mdp.gamma();
    let rows = (0..n_x)
        .map(|x| {
            let mut row = vec![(x, -1.0 / (1.0 - g))];
            for (s2, p) in mdp.transition_row(x / n_a, x % n_a).iter().enumerate() {
                if *p != 0.0 {
                    row.push((n_x + s2, g * p / (1.0 - g)));
                }
            }
            row
        })
        .collect();
    let mut cost = vec![0.0; n_x];
    cost.extend_from_slice(mdp.mu0());
    let ordered = (0..n_x).map(|x| (x, n_x + x / n_a)).collect();
    let program = Epigraph::new(obj, cost, rows, ordered);

    let mut start = init.as_slice().to_vec();
    start.extend((0..n_s).map(|s| init.max_action(s).0 + START_MARGIN * (1.0 - g)));
    let solution = program.solve(&start, tol)?;

    let mut q = QTable::new(n_s, n_a, solution.z[..n_x].to_vec())?;
    let mut value = q_objective_eval(mdp, obj, &q)?;
    let initial = q_objective_eval(mdp, obj, init)?;
    if initial < value {
        value = initial;
        q = init.clone();
    }
    Ok(QMinimum {
        value,
        q,
        iterations: solution.newton_steps,
        certified: solution.certified,
    })
}

/// Initial `m(s) - max_a Q(s, a)`, in reward units.
const START_MARGIN: f64 = 1e-2;
