use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Mdp, RewardTable};
use crate::error::{Error, Result};

/// Probabilities read from disk are accepted within this tolerance and then
/// renormalized.
pub const FILE_PROB_TOL: f64 = 1e-9;

/// An MDP together with its reward.
///
/// On disk this is a single JSON document:
///
/// ```json
/// { "n_states": 1, "n_actions": 2, "gamma": 0.9, "mu0": [1.0],
///   "transition": [[[1.0], [1.0]]], "reward": [[1.0, 0.0]] }
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub mdp: Mdp,
    pub reward: RewardTable,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    mu0: Vec<f64>,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
}

impl Instance {
    pub fn new(mdp: Mdp, reward: RewardTable) -> Result<Self> {
        reward.check_shape("instance reward", mdp.shape())?;
        Ok(Self { mdp, reward })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    fn from_file(file: InstanceFile) -> Result<Self> {
        let InstanceFile {
            n_states,
            n_actions,
            gamma,
            mu0,
            transition,
            reward,
        } = file;
        if transition.len() != n_states || transition.iter().any(|rows| rows.len() != n_actions) {
            return Err(Error::InvalidMdp(format!(
                "transition must be nested [{n_states}][{n_actions}][{n_states}]"
            )));
        }
        if transition.iter().flatten().any(|row| row.len() != n_states) {
            return Err(Error::InvalidMdp(format!(
                "transition rows must have {n_states} entries"
            )));
        }
        let flat = transition.into_iter().flatten().flatten().collect();
        let mdp = Mdp::with_tolerance(n_states, n_actions, flat, mu0, gamma, FILE_PROB_TOL)?;
        let reward = RewardTable::from_nested(reward)?;
        Self::new(mdp, reward)
    }
}

impl Serialize for Instance {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mdp = &self.mdp;
        let transition = (0..mdp.n_states())
            .map(|s| {
                (0..mdp.n_actions())
                    .map(|a| mdp.transition_row(s, a).to_vec())
                    .collect()
            })
            .collect();
        InstanceFile {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            gamma: mdp.gamma(),
            mu0: mdp.mu0().to_vec(),
            transition,
            reward: self.reward.to_nested(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Self::from_file(InstanceFile::deserialize(deserializer)?).map_err(serde::de::Error::custom)
    }
}
