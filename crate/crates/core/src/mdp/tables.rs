//! Dense tables over states and state-action pairs.
//!
//! Every state-action table is stored row-major, `values[s * n_actions + a]`,
//! and serializes as a nested `[s][a]` array.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance on the total mass of an occupancy measure.
pub const MASS_TOL: f64 = 1e-9;

/// Tolerance on the row sums of a policy.
pub const POLICY_ROW_TOL: f64 = 1e-12;

macro_rules! state_action_table {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            n_states: usize,
            n_actions: usize,
            values: Vec<f64>,
        }

        impl $name {
            pub(crate) fn from_raw(n_states: usize, n_actions: usize, values: Vec<f64>) -> Self {
                debug_assert_eq!(values.len(), n_states * n_actions);
                Self { n_states, n_actions, values }
            }

            #[allow(dead_code)]
            pub(crate) fn from_fn_raw(
                n_states: usize,
                n_actions: usize,
                mut f: impl FnMut(usize, usize) -> f64,
            ) -> Self {
                let mut values = Vec::with_capacity(n_states * n_actions);
                for s in 0..n_states {
                    for a in 0..n_actions {
                        values.push(f(s, a));
                    }
                }
                Self { n_states, n_actions, values }
            }

            pub fn n_states(&self) -> usize {
                self.n_states
            }

            pub fn n_actions(&self) -> usize {
                self.n_actions
            }

            pub fn shape(&self) -> (usize, usize) {
                (self.n_states, self.n_actions)
            }

            /// Number of state-action pairs.
            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            #[inline]
            pub fn get(&self, s: usize, a: usize) -> f64 {
                self.values[s * self.n_actions + a]
            }

            pub fn row(&self, s: usize) -> &[f64] {
                &self.values[s * self.n_actions..(s + 1) * self.n_actions]
            }

            /// Values over flattened state-action pairs.
            pub fn as_slice(&self) -> &[f64] {
                &self.values
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.values
            }

            pub fn to_nested(&self) -> Vec<Vec<f64>> {
                self.values.chunks(self.n_actions.max(1)).map(<[f64]>::to_vec).collect()
            }

            pub(crate) fn check_shape(&self, context: &'static str, shape: (usize, usize)) -> Result<()> {
                if self.shape() != shape {
                    return Err(Error::shape(context, shape, self.shape()));
                }
                Ok(())
            }
        }

        impl std::ops::Index<(usize, usize)> for $name {
            type Output = f64;

            fn index(&self, (s, a): (usize, usize)) -> &f64 {
                &self.values[s * self.n_actions + a]
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
                self.to_nested().serialize(serializer)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
                let nested = Vec::<Vec<f64>>::deserialize(deserializer)?;
                Self::from_nested(nested).map_err(serde::de::Error::custom)
            }
        }
    };
}

fn flatten(nested: Vec<Vec<f64>>) -> Result<(usize, usize, Vec<f64>)> {
    let n_states = nested.len();
    let n_actions = nested.first().map_or(0, Vec::len);
    if n_states == 0 || n_actions == 0 {
        return Err(Error::InvalidTable("table must be non-empty".into()));
    }
    if let Some(bad) = nested.iter().position(|row| row.len() != n_actions) {
        return Err(Error::InvalidTable(format!(
            "row {bad} has {} entries, expected {n_actions}",
            nested[bad].len()
        )));
    }
    Ok((n_states, n_actions, nested.into_iter().flatten().collect()))
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidTable(format!("{what} entry {i} is not finite")));
    }
    Ok(())
}

fn check_len(n_states: usize, n_actions: usize, values: &[f64]) -> Result<()> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::InvalidTable("table must be non-empty".into()));
    }
    if values.len() != n_states * n_actions {
        return Err(Error::InvalidTable(format!(
            "expected {} values for a {n_states}x{n_actions} table, got {}",
            n_states * n_actions,
            values.len()
        )));
    }
    Ok(())
}

state_action_table!(
    /// A reward `r(s, a)`; also used for adversarial rewards and gradients.
    RewardTable
);

state_action_table!(
    /// A state-action value function `Q(s, a)`.
    QTable
);

state_action_table!(
    /// A stochastic policy `pi(a | s)`. Each row is a distribution over actions.
    Policy
);

state_action_table!(
    /// A normalized state-action visitation distribution.
    ///
    /// Construction checks nonnegativity and unit mass. Membership in the
    /// Bellman flow polytope of a particular MDP is checked by
    /// [`Mdp::check_occupancy`](crate::mdp::Mdp::check_occupancy).
    OccupancyMeasure
);

impl RewardTable {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        check_len(n_states, n_actions, &values)?;
        check_finite(&values, "reward")?;
        Ok(Self::from_raw(n_states, n_actions, values))
    }

    pub fn from_nested(nested: Vec<Vec<f64>>) -> Result<Self> {
        let (n, m, values) = flatten(nested)?;
        Self::new(n, m, values)
    }

    pub fn from_fn(n_states: usize, n_actions: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let t = Self::from_fn_raw(n_states, n_actions, f);
        check_len(n_states, n_actions, &t.values)?;
        check_finite(&t.values, "reward")?;
        Ok(t)
    }

    pub fn constant(n_states: usize, n_actions: usize, c: f64) -> Self {
        Self::from_raw(n_states, n_actions, vec![c; n_states * n_actions])
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        check_len(n_states, n_actions, &values)?;
        check_finite(&values, "Q")?;
        Ok(Self::from_raw(n_states, n_actions, values))
    }

    pub fn from_nested(nested: Vec<Vec<f64>>) -> Result<Self> {
        let (n, m, values) = flatten(nested)?;
        Self::new(n, m, values)
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::from_raw(n_states, n_actions, vec![0.0; n_states * n_actions])
    }

    /// `max_a Q(s, a)` together with the lowest maximizing action.
    pub fn max_action(&self, s: usize) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (a, &q) in self.row(s).iter().enumerate() {
            if q > best.0 {
                best = (q, a);
            }
        }
        best
    }
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        check_len(n_states, n_actions, &values)?;
        for (s, row) in values.chunks(n_actions).enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidPolicy(format!(
                    "row {s} has a negative or non-finite entry"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > POLICY_ROW_TOL {
                return Err(Error::InvalidPolicy(format!("row {s} sums to {total}")));
            }
        }
        Ok(Self::from_raw(n_states, n_actions, values))
    }

    pub fn from_nested(nested: Vec<Vec<f64>>) -> Result<Self> {
        let (n, m, values) = flatten(nested)?;
        Self::new(n, m, values)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self::from_raw(n_states, n_actions, vec![1.0 / n_actions as f64; n_states * n_actions])
    }

    /// The deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        if let Some(&a) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(Error::InvalidPolicy(format!("action {a} out of range")));
        }
        Ok(Self::from_fn_raw(actions.len(), n_actions, |s, a| {
            if actions[s] == a {
                1.0
            } else {
                0.0
            }
        }))
    }
}

impl OccupancyMeasure {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        check_len(n_states, n_actions, &values)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidOccupancy(format!("entry {i} is negative or not finite")));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidOccupancy(format!("total mass is {total}")));
        }
        Ok(Self::from_raw(n_states, n_actions, values))
    }

    pub fn from_nested(nested: Vec<Vec<f64>>) -> Result<Self> {
        let (n, m, values) = flatten(nested)?;
        Self::new(n, m, values)
    }

    /// The uniform distribution over state-action pairs.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let n = n_states * n_actions;
        Self::from_raw(n_states, n_actions, vec![1.0 / n as f64; n])
    }

    /// Mass on state `s`, summed over actions.
    pub fn state_mass(&self, s: usize) -> f64 {
        self.row(s).iter().sum()
    }

    /// `(1 - delta) * mu + delta * uniform`: strictly positive whenever `delta > 0`.
    pub fn floored(&self, delta: f64) -> Self {
        let u = delta / self.len() as f64;
        Self::from_raw(
            self.n_states,
            self.n_actions,
            self.values.iter().map(|m| (1.0 - delta) * m + u).collect(),
        )
    }

    /// `(1 - step) * self + step * other`.
    pub(crate) fn mix(&self, other: &Self, step: f64) -> Self {
        Self::from_raw(
            self.n_states,
            self.n_actions,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (1.0 - step) * a + step * b)
                .collect(),
        )
    }
}

/// A function of the state, `V(s)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValueTable {
    values: Vec<f64>,
}

impl ValueTable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidTable("value table must be non-empty".into()));
        }
        check_finite(&values, "value")?;
        Ok(Self { values })
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n_states: usize) -> Self {
        Self {
            values: vec![0.0; n_states],
        }
    }

    pub fn constant(n_states: usize, c: f64) -> Self {
        Self {
            values: vec![c; n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

impl std::ops::Index<usize> for ValueTable {
    type Output = f64;

    fn index(&self, s: usize) -> &f64 {
        &self.values[s]
    }
}

impl<'de> Deserialize<'de> for ValueTable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Self::new(Vec::deserialize(deserializer)?).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_roundtrip_through_json() {
        let r = RewardTable::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, "[[1.0,2.0,3.0],[4.0,5.0,6.0]]");
        let back: RewardTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(back[(1, 2)], 6.0);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err = RewardTable::from_nested(vec![vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::InvalidTable(_)));
    }

    #[test]
    fn non_finite_rewards_are_rejected() {
        assert!(RewardTable::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(QTable::new(1, 2, vec![f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn policy_rows_must_be_distributions() {
        assert!(Policy::new(1, 2, vec![0.5, 0.5]).is_ok());
        assert!(Policy::new(1, 2, vec![0.6, 0.5]).is_err());
        assert!(Policy::new(1, 2, vec![1.5, -0.5]).is_err());
        let det = Policy::deterministic(3, &[2, 0]).unwrap();
        assert_eq!(det.row(0), &[0.0, 0.0, 1.0]);
        assert!(Policy::deterministic(2, &[2]).is_err());
    }

    #[test]
    fn occupancy_mass_is_checked() {
        assert!(OccupancyMeasure::new(1, 2, vec![0.5, 0.5]).is_ok());
        assert!(OccupancyMeasure::new(1, 2, vec![0.5, 0.4]).is_err());
        assert!(OccupancyMeasure::new(1, 2, vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn flooring_keeps_mass_and_positivity() {
        let mu = OccupancyMeasure::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let f = mu.floored(1e-3);
        assert!(f.as_slice().iter().all(|&v| v > 0.0));
        assert!((f.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn max_action_breaks_ties_low() {
        let q = QTable::new(1, 3, vec![2.0, 5.0, 5.0]).unwrap();
        assert_eq!(q.max_action(0), (5.0, 1));
    }
}
