use super::policy_iteration::{argmax, greedy_policy_iteration};
use super::SolveResult;
use crate::error::{Error, Result};
use crate::mdp::{dot, occupancy_from_policy, Mdp, OccupancyMeasure, Policy};

const LINE_SEARCH_TOL: f64 = 1e-12;
use crate::regularizers::Objective;

/// Conditional-gradient ascent over the flow polytope.
///
/// The linear maximization oracle is an exact RL solve with the current
/// gradient as reward, warm-started from the previous oracle policy. The step
/// is an exact line search: closed form for the quadratic objectives,
/// bisection on the directional derivative for the entropic ones, and
/// `2 / (k + 2)` for the rest. Stops once the Frank-Wolfe gap `<g, nu - mu>` is at most `tol`.
///
/// The returned iterate is the best one seen; `certificate` is the smallest
/// gap seen, which bounds its suboptimality. If the budget runs out first the
/// result is returned with `certified = false`.
pub fn frank_wolfe_maximize(mdp: &Mdp, obj: &Objective, tol: f64, max_iter: usize) -> Result<SolveResult> {
    if obj.shape() != mdp.shape() {
        return Err(Error::shape("frank_wolfe_maximize", mdp.shape(), obj.shape()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let (n_states, n_actions) = mdp.shape();
    let mut mu = occupancy_from_policy(mdp, &Policy::uniform(n_states, n_actions))?;
    let mut value = obj.eval(&mu)?;
    let mut actions: Vec<usize> = vec![0; n_states];
    let mut first = true;

    let mut best = (value, mu.clone());
    let mut best_gap = f64::INFINITY;
    for k in 0..=max_iter {
        let g = obj.grad(&mu)?;
        if first {
            actions = (0..n_states).map(|s| argmax(g.row(s))).collect();
            first = false;
        }
        let (next_actions, _, _) = greedy_policy_iteration(mdp, &g, &actions)?;
        actions = next_actions;
        let vertex = occupancy_from_policy(mdp, &Policy::deterministic(n_actions, &actions)?)?;
        let direction: Vec<f64> = vertex
            .as_slice()
            .iter()
            .zip(mu.as_slice())
            .map(|(v, m)| v - m)
            .collect();
        let gap = dot(g.as_slice(), &direction).max(0.0);
        best_gap = best_gap.min(gap);
        if value > best.0 {
            best = (value, mu.clone());
        }
        if gap <= tol || k == max_iter {
            let certified = gap <= tol;
            if !certified {
                log::warn!("frank_wolfe: budget of {max_iter} iterations exhausted with gap {best_gap:e}");
            }
            return Ok(SolveResult {
                value: best.0,
                mu: best.1,
                aux: None,
                iterations: k,
                certificate: best_gap,
                certified: best_gap <= tol,
            });
        }
        let step = match obj {
            Objective::Tsallis2 { epsilon, .. } => {
                let curvature = 2.0 * epsilon * dot(&direction, &direction);
                (gap / curvature).clamp(0.0, 1.0)
            }
            Objective::Buffer { epsilon, nu, .. } => {
                let curvature: f64 =
                    0.5 * epsilon * direction.iter().zip(nu.as_slice()).map(|(d, v)| d * d / v).sum::<f64>();
                (gap / curvature).clamp(0.0, 1.0)
            }
            Objective::EntropySac { .. } | Objective::KlImitation { .. } | Objective::EntropyExploration { .. } => {
                line_search(obj, &mu, &vertex, &direction, gap)?
            }
            _ => 2.0 / (k as f64 + 2.0),
        };
        mu = mu.mix(&vertex, step);
        value = obj.eval(&mu)?;
    }
    unreachable!("loop returns on its last iteration")
}

/// Maximizes the concave `t -> R((1 - t) mu + t vertex)` on `[0, 1]` by
/// bisection on the sign of its derivative.
fn line_search(
    obj: &Objective,
    mu: &OccupancyMeasure,
    vertex: &OccupancyMeasure,
    direction: &[f64],
    slope_at_zero: f64,
) -> Result<f64> {
    if slope_at_zero <= 0.0 {
        return Ok(0.0);
    }
    let slope = |t: f64| -> Result<f64> { Ok(dot(obj.grad(&mu.mix(vertex, t))?.as_slice(), direction)) };
    if slope(1.0)? >= 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > LINE_SEARCH_TOL {
        let mid = 0.5 * (lo + hi);
        if slope(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
