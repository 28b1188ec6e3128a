//! Finite MDPs, occupancy measures, and the Bellman machinery around them.
//!
//! Occupancy measures use the normalized convention: total mass one, with
//! flow constraint
//!
//! ```text
//! sum_a mu(s, a) = (1 - gamma) mu0(s) + gamma sum_{s', a'} P(s | s', a') mu(s', a')
//! ```
//!
//! so that the expected return `<r, mu>` of a policy equals `(1 - gamma)` times
//! its discounted value from `mu0`.

mod generate;
mod io;
mod tables;

use nalgebra::{DMatrix, DVector};

pub use generate::{bandit, generate, perturb_reward, GeneratorSpec};
pub use io::Instance;
pub use tables::{OccupancyMeasure, Policy, QTable, RewardTable, ValueTable, MASS_TOL, POLICY_ROW_TOL};

use crate::error::{Error, Result};

/// Tolerance on transition rows and the initial distribution at construction.
pub const PROB_TOL: f64 = 1e-12;

/// Maximum flow residual accepted for a member of the flow polytope.
pub const FLOW_TOL: f64 = 1e-9;

/// Rows with less state mass than this map to the uniform action distribution.
pub const ZERO_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    /// `transition[(s * n_actions + a) * n_states + s2] = P(s2 | s, a)`.
    transition: Vec<f64>,
    mu0: Vec<f64>,
    gamma: f64,
}

impl Mdp {
    pub fn new(n_states: usize, n_actions: usize, transition: Vec<f64>, mu0: Vec<f64>, gamma: f64) -> Result<Self> {
        Self::with_tolerance(n_states, n_actions, transition, mu0, gamma, PROB_TOL)
    }

    /// Validates probabilities to `tol`, then renormalizes every row exactly.
    pub(crate) fn with_tolerance(
        n_states: usize,
        n_actions: usize,
        mut transition: Vec<f64>,
        mut mu0: Vec<f64>,
        gamma: f64,
        tol: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp("state and action counts must be positive".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("discount {gamma} outside [0, 1)")));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::InvalidMdp(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if mu0.len() != n_states {
            return Err(Error::InvalidMdp(format!(
                "mu0 has {} entries, expected {n_states}",
                mu0.len()
            )));
        }
        for (i, row) in transition.chunks_mut(n_states).enumerate() {
            normalize_distribution(row, tol).map_err(|e| {
                Error::InvalidMdp(format!(
                    "transition row (s={}, a={}): {e}",
                    i / n_actions,
                    i % n_actions
                ))
            })?;
        }
        normalize_distribution(&mut mu0, tol).map_err(|e| Error::InvalidMdp(format!("mu0: {e}")))?;
        Ok(Self {
            n_states,
            n_actions,
            transition,
            mu0,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Shape of state-action tables over this MDP.
    pub fn shape(&self) -> (usize, usize) {
        (self.n_states, self.n_actions)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu0(&self) -> &[f64] {
        &self.mu0
    }

    /// `P(. | s, a)`.
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    /// `sum_{s'} P(s' | s, a) f(s')`.
    #[inline]
    pub fn expect_next(&self, s: usize, a: usize, f: &[f64]) -> f64 {
        self.transition_row(s, a).iter().zip(f).map(|(p, v)| p * v).sum()
    }

    /// Sup-norm violation of the flow constraint.
    pub fn flow_residual(&self, mu: &OccupancyMeasure) -> Result<f64> {
        mu.check_shape("flow residual", self.shape())?;
        let mut inflow: Vec<f64> = self.mu0.iter().map(|m| (1.0 - self.gamma) * m).collect();
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let m = mu.get(s, a);
                if m == 0.0 {
                    continue;
                }
                for (dst, p) in inflow.iter_mut().zip(self.transition_row(s, a)) {
                    *dst += self.gamma * p * m;
                }
            }
        }
        Ok((0..self.n_states)
            .map(|s| (mu.state_mass(s) - inflow[s]).abs())
            .fold(0.0, f64::max))
    }

    /// Checks membership in the flow polytope to [`FLOW_TOL`].
    pub fn check_occupancy(&self, mu: &OccupancyMeasure) -> Result<()> {
        let residual = self.flow_residual(mu)?;
        if residual > FLOW_TOL {
            return Err(Error::InvalidOccupancy(format!(
                "flow residual {residual:e} exceeds {FLOW_TOL:e}"
            )));
        }
        Ok(())
    }

    /// State-to-state kernel under `policy`: `P_pi[s][s'] = sum_a pi(a|s) P(s'|s,a)`.
    fn policy_kernel(&self, policy: &Policy) -> DMatrix<f64> {
        let n = self.n_states;
        let mut kernel = DMatrix::zeros(n, n);
        for s in 0..n {
            for a in 0..self.n_actions {
                let p = policy.get(s, a);
                if p == 0.0 {
                    continue;
                }
                for (s2, t) in self.transition_row(s, a).iter().enumerate() {
                    kernel[(s, s2)] += p * t;
                }
            }
        }
        kernel
    }
}

fn normalize_distribution(row: &mut [f64], tol: f64) -> std::result::Result<(), String> {
    if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(format!("entry {p} is negative or not finite"));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(format!("sums to {total}"));
    }
    row.iter_mut().for_each(|p| *p /= total);
    Ok(())
}

fn solve(matrix: DMatrix<f64>, rhs: DVector<f64>, context: &'static str) -> Result<DVector<f64>> {
    matrix.lu().solve(&rhs).ok_or(Error::Singular(context))
}

fn check_policy(mdp: &Mdp, policy: &Policy) -> Result<()> {
    policy.check_shape("policy", mdp.shape())
}

/// The normalized discounted state-action visitation of `policy`.
///
/// Solves `d = (1 - gamma) mu0 + gamma P_pi^T d` densely and sets
/// `mu(s, a) = d(s) pi(a | s)`.
pub fn occupancy_from_policy(mdp: &Mdp, policy: &Policy) -> Result<OccupancyMeasure> {
    check_policy(mdp, policy)?;
    let n = mdp.n_states;
    let system = DMatrix::identity(n, n) - mdp.policy_kernel(policy).transpose() * mdp.gamma;
    let rhs = DVector::from_iterator(n, mdp.mu0.iter().map(|m| (1.0 - mdp.gamma) * m));
    let d = solve(system, rhs, "occupancy_from_policy")?;
    let values = (0..n)
        .flat_map(|s| {
            let ds = d[s].max(0.0);
            policy.row(s).iter().map(move |p| ds * p)
        })
        .collect::<Vec<_>>();
    // The solve is exact up to rounding; renormalize the last few ulps away.
    let total: f64 = values.iter().sum();
    OccupancyMeasure::new(n, mdp.n_actions, values.into_iter().map(|v| v / total).collect())
}

/// The policy induced by an occupancy measure, `pi(a|s) = mu(s,a) / sum_a mu(s,a)`.
/// States with negligible mass get the uniform row.
pub fn policy_from_occupancy(mu: &OccupancyMeasure) -> Policy {
    let (n_states, n_actions) = mu.shape();
    let uniform = 1.0 / n_actions as f64;
    let mut values = Vec::with_capacity(mu.len());
    for s in 0..n_states {
        let mass = mu.state_mass(s);
        if mass < ZERO_MASS {
            values.extend(std::iter::repeat_n(uniform, n_actions));
        } else {
            values.extend(mu.row(s).iter().map(|m| m / mass));
        }
    }
    Policy::from_raw(n_states, n_actions, values)
}

/// `<r, mu>`.
pub fn expected_return(mu: &OccupancyMeasure, r: &RewardTable) -> Result<f64> {
    r.check_shape("expected_return", mu.shape())?;
    Ok(dot(mu.as_slice(), r.as_slice()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Discounted value of `policy` under `r`, without the `(1 - gamma)` scaling:
/// `V = r_pi + gamma P_pi V`.
pub fn evaluate_policy(mdp: &Mdp, policy: &Policy, r: &RewardTable) -> Result<ValueTable> {
    check_policy(mdp, policy)?;
    r.check_shape("evaluate_policy", mdp.shape())?;
    let n = mdp.n_states;
    let system = DMatrix::identity(n, n) - mdp.policy_kernel(policy) * mdp.gamma;
    let rhs = DVector::from_iterator(n, (0..n).map(|s| dot(policy.row(s), r.row(s))));
    let v = solve(system, rhs, "evaluate_policy")?;
    Ok(ValueTable::from_raw(v.iter().copied().collect()))
}

/// The normalized optimality operator
/// `(T Q)(s, a) = (1 - gamma) r(s, a) + gamma sum_{s'} P(s'|s,a) max_{a'} Q(s', a')`.
///
/// Its fixed point `Q*` satisfies `sum_s mu0(s) max_a Q*(s, a) = max_mu <r, mu>`.
pub fn bellman_backup(mdp: &Mdp, r: &RewardTable, q: &QTable) -> Result<QTable> {
    r.check_shape("bellman_backup reward", mdp.shape())?;
    q.check_shape("bellman_backup Q", mdp.shape())?;
    let greedy: Vec<f64> = (0..mdp.n_states).map(|s| q.max_action(s).0).collect();
    let g = mdp.gamma;
    Ok(QTable::from_fn_raw(mdp.n_states, mdp.n_actions, |s, a| {
        (1.0 - g) * r.get(s, a) + g * mdp.expect_next(s, a, &greedy)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1() -> Instance {
        bandit(&[1.0, 0.0], 0.9).unwrap()
    }

    fn m2() -> Instance {
        generate(&GeneratorSpec::Chain { n: 2, gamma: 0.5 }).unwrap()
    }

    #[test]
    fn construction_rejects_bad_inputs() {
        assert!(Mdp::new(1, 1, vec![1.0], vec![1.0], 1.0).is_err());
        assert!(Mdp::new(1, 1, vec![1.0], vec![1.0], -0.1).is_err());
        assert!(Mdp::new(2, 1, vec![0.5, 0.4, 1.0, 0.0], vec![1.0, 0.0], 0.5).is_err());
        assert!(Mdp::new(2, 1, vec![0.5, 0.5, 1.0, 0.0], vec![0.7, 0.2], 0.5).is_err());
        assert!(Mdp::new(2, 1, vec![1.5, -0.5, 1.0, 0.0], vec![1.0, 0.0], 0.5).is_err());
        assert!(Mdp::new(2, 1, vec![0.5, 0.5], vec![1.0, 0.0], 0.5).is_err());
        assert!(Mdp::new(0, 1, vec![], vec![], 0.5).is_err());
    }

    #[test]
    fn myopic_occupancy_is_mu0_times_policy() {
        let inst = generate(&GeneratorSpec::Random {
            seed: 11,
            n_states: 4,
            n_actions: 3,
            dirichlet_alpha: 1.0,
            gamma: 0.0,
        })
        .unwrap();
        let pi = Policy::new(4, 3, (0..12).map(|i| [0.2, 0.3, 0.5][i % 3]).collect()).unwrap();
        let mu = occupancy_from_policy(&inst.mdp, &pi).unwrap();
        for s in 0..4 {
            for a in 0..3 {
                assert!((mu.get(s, a) - inst.mdp.mu0()[s] * pi.get(s, a)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_state_uniform_policy() {
        let inst = m1();
        let mu = occupancy_from_policy(&inst.mdp, &Policy::uniform(1, 2)).unwrap();
        assert_eq!(mu.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn two_state_chain_always_move() {
        // d0 = 1/2 + d1/2, d1 = d0/2  =>  d = (2/3, 1/3)
        let inst = m2();
        let pi = Policy::deterministic(2, &[1, 1]).unwrap();
        let mu = occupancy_from_policy(&inst.mdp, &pi).unwrap();
        let expected = [0.0, 2.0 / 3.0, 0.0, 1.0 / 3.0];
        for (got, want) in mu.as_slice().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
        assert!(inst.mdp.flow_residual(&mu).unwrap() < 1e-15);
    }

    #[test]
    fn policy_from_occupancy_conventions() {
        let mu = OccupancyMeasure::uniform(3, 2);
        assert_eq!(policy_from_occupancy(&mu), Policy::uniform(3, 2));

        let mu = OccupancyMeasure::new(2, 2, vec![0.25, 0.75, 0.0, 0.0]).unwrap();
        let pi = policy_from_occupancy(&mu);
        assert_eq!(pi.row(0), &[0.25, 0.75]);
        assert_eq!(pi.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn expected_return_examples() {
        let mu = OccupancyMeasure::new(1, 2, vec![0.5, 0.5]).unwrap();
        let r = RewardTable::new(1, 2, vec![1.0, 0.0]).unwrap();
        assert_eq!(expected_return(&mu, &r).unwrap(), 0.5);

        let mu = OccupancyMeasure::uniform(3, 4);
        let c = RewardTable::constant(3, 4, -2.5);
        assert!((expected_return(&mu, &c).unwrap() + 2.5).abs() < 1e-15);

        let wrong = RewardTable::constant(2, 4, 1.0);
        assert!(matches!(expected_return(&mu, &wrong), Err(Error::Shape { .. })));
    }

    #[test]
    fn backup_examples() {
        let inst = m1();
        let q = bellman_backup(&inst.mdp, &inst.reward, &QTable::zeros(1, 2)).unwrap();
        assert!((q.get(0, 0) - 0.1).abs() < 1e-15);
        assert_eq!(q.get(0, 1), 0.0);

        let mut q = QTable::zeros(1, 2);
        for _ in 0..2000 {
            q = bellman_backup(&inst.mdp, &inst.reward, &q).unwrap();
        }
        assert!((q.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((q.get(0, 1) - 0.9).abs() < 1e-12);

        let myopic = bandit(&[0.3, -1.0, 2.0], 0.0).unwrap();
        let q = QTable::new(1, 3, vec![5.0, 6.0, 7.0]).unwrap();
        let out = bellman_backup(&myopic.mdp, &myopic.reward, &q).unwrap();
        assert_eq!(out.as_slice(), myopic.reward.as_slice());
    }

    #[test]
    fn evaluate_matches_occupancy_return() {
        let inst = generate(&GeneratorSpec::Random {
            seed: 5,
            n_states: 5,
            n_actions: 2,
            dirichlet_alpha: 0.5,
            gamma: 0.8,
        })
        .unwrap();
        let pi = Policy::uniform(5, 2);
        let v = evaluate_policy(&inst.mdp, &pi, &inst.reward).unwrap();
        let mu = occupancy_from_policy(&inst.mdp, &pi).unwrap();
        let lhs = expected_return(&mu, &inst.reward).unwrap();
        let rhs = (1.0 - 0.8) * dot(inst.mdp.mu0(), v.as_slice());
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
