//! Regularized policy optimization on finite MDPs and its adversarial-reward
//! dual.
//!
//! Occupancy measures are normalized: they sum to one and satisfy
//! `sum_a mu(s,a) = (1-gamma) mu0(s) + gamma sum_{s',a'} P(s|s',a') mu(s',a')`.
//! Under this convention the return of a reward is `<r, mu>`, and the value
//! functions returned by the solvers are the usual unnormalized ones, so
//! `<r, mu> = (1-gamma) <mu0, V>`.

pub mod duality;
pub mod error;
pub mod mdp;
pub mod metric;
pub mod regularizers;
pub mod rng;
pub mod solvers;

pub use duality::{
    corrupt_adversary, duality_gap_report, q_objective_eval, q_objective_minimize, solve_dual_value, solve_primal,
    verify_optimality, DualityReport, Verdict,
};
pub use error::{Error, Result};
pub use mdp::{
    bandit, bellman_backup, evaluate_policy, expected_return, generate, occupancy_from_policy, perturb_reward,
    policy_from_occupancy, GeneratorSpec, Instance, Mdp, OccupancyMeasure, Policy, QTable, RewardTable, ValueTable,
};
pub use metric::MetricSpec;
pub use regularizers::{conjugate_eval, is_increasing_conjugate, objective_eval, objective_grad, Objective};
pub use solvers::{frank_wolfe_maximize, policy_iteration, soft_value_iteration, transport_distance, SolveResult};
