use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::regularizers::Objective;
use crate::solvers::{frank_wolfe_maximize, policy_iteration, soft_value_iteration, SolveResult};

use super::ipm::ipm_primal;

/// Frank-Wolfe gap at which [`solve_primal`] stops.
pub const PRIMAL_FW_TOL: f64 = 1e-6;
pub const PRIMAL_FW_MAX_ITER: usize = 50_000;

/// Maximizes the objective over the occupancy polytope with the solver suited
/// to it. `value` is always `obj.eval(mu)`.
pub fn solve_primal(mdp: &Mdp, obj: &Objective) -> Result<SolveResult> {
    if obj.shape() != mdp.shape() {
        return Err(Error::shape("solve_primal", mdp.shape(), obj.shape()));
    }
    match obj {
        Objective::Linear { r } => policy_iteration(mdp, r),
        Objective::EntropySac { r, epsilon } => soft_value_iteration(mdp, r, *epsilon),
        Objective::LipschitzIpm { mu_e, metric } => ipm_primal(mdp, obj, mu_e, metric),
        _ => frank_wolfe_maximize(mdp, obj, PRIMAL_FW_TOL, PRIMAL_FW_MAX_ITER),
    }
}
