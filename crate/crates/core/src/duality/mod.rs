//! Adversarial-reward duals and the checks that tie them to the primal.

mod barrier;
mod ipm;
mod primal;
mod q_objective;
mod report;
mod value_dual;

pub use primal::{solve_primal, PRIMAL_FW_MAX_ITER, PRIMAL_FW_TOL};
pub use q_objective::{q_objective_eval, q_objective_minimize, q_objective_subgradient, QMinimum};
pub use report::{
    corrupt_adversary, duality_gap_report, gap_tolerance, thm2_tolerance, verify_optimality, AdversarySource,
    DualityReport, ReportMetadata, Verdict, DUAL_TOL, GAP_TOL, SMOOTH_GAP_TOL, THM2_FLOOR, THM2_TOL,
};
pub use value_dual::{
    adversarial_reward_from_value, dual_gradient, dual_objective, solve_dual_value, DualSolution, NEWTON_MAX_ITER,
};
