//! Primal solvers over the flow polytope.

mod frank_wolfe;
mod policy_iteration;
mod soft_vi;
mod transport;

use serde::Serialize;

use crate::mdp::{OccupancyMeasure, ValueTable};

pub use frank_wolfe::frank_wolfe_maximize;
pub use policy_iteration::{policy_iteration, policy_iteration_from};
pub use soft_vi::{soft_value_iteration, SOFT_VI_TOL};
pub use transport::{transport_distance, TransportResult};

pub(crate) use transport::solve_lp;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    /// Objective value at `mu`.
    pub value: f64,
    pub mu: OccupancyMeasure,
    /// Unnormalized value function, for value-based solvers.
    pub aux: Option<ValueTable>,
    pub iterations: usize,
    /// Bound on the suboptimality of `value` at termination (0 for exact solvers).
    pub certificate: f64,
    /// False when an iteration budget ran out before the stopping rule fired.
    pub certified: bool,
}
