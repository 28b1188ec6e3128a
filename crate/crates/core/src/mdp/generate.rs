//! Seeded instance generators and reward perturbation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use super::{Instance, Mdp, RewardTable};
use crate::error::{Error, Result};
use crate::rng::{seeded, SeededRng};

const DEFAULT_GAMMA: f64 = 0.9;

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

/// Which instance to build.
///
/// The textual form used on the command line is `kind:key=value,...`, e.g.
/// `random:seed=7,n_states=3,n_actions=2,alpha=1.0` or
/// `gridworld:n=6,slip=0.1,goal=1.0,gamma=0.9`. `gamma` defaults to 0.9.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// Dirichlet transition rows and initial distribution, uniform `[0, 1)` rewards.
    Random {
        seed: u64,
        n_states: usize,
        n_actions: usize,
        dirichlet_alpha: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    /// A cycle of `n` states starting at state 0. Action 0 stays, action 1
    /// advances to `(s + 1) mod n`. Reward 1 in the last state, 0 elsewhere.
    Chain {
        n: usize,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    /// An `n x n` grid starting in the top-left corner with an absorbing goal
    /// in the bottom-right corner paying `goal_reward` per step. Actions are
    /// up, right, down, left; with probability `slip_prob` the move is
    /// replaced by one of the two perpendicular moves (equally likely).
    /// Moves into a wall leave the agent in place.
    Gridworld {
        n: usize,
        slip_prob: f64,
        goal_reward: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    /// One self-looping state with a reward per action.
    Bandit {
        rewards: Vec<f64>,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
}

pub fn generate(spec: &GeneratorSpec) -> Result<Instance> {
    match *spec {
        GeneratorSpec::Random {
            seed,
            n_states,
            n_actions,
            dirichlet_alpha,
            gamma,
        } => random(seed, n_states, n_actions, dirichlet_alpha, gamma),
        GeneratorSpec::Chain { n, gamma } => chain(n, gamma),
        GeneratorSpec::Gridworld {
            n,
            slip_prob,
            goal_reward,
            gamma,
        } => gridworld(n, slip_prob, goal_reward, gamma),
        GeneratorSpec::Bandit { ref rewards, gamma } => bandit(rewards, gamma),
    }
}

fn dirichlet(rng: &mut SeededRng, gamma_dist: &Gamma<f64>, n: usize) -> Vec<f64> {
    loop {
        let draw: Vec<f64> = (0..n).map(|_| gamma_dist.sample(rng)).collect();
        let total: f64 = draw.iter().sum();
        // Tiny concentrations can underflow every coordinate; redraw.
        if total > 0.0 && total.is_finite() {
            return draw.into_iter().map(|g| g / total).collect();
        }
    }
}

fn random(seed: u64, n_states: usize, n_actions: usize, alpha: f64, gamma: f64) -> Result<Instance> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::InvalidParameter(
            "random: state and action counts must be positive".into(),
        ));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "random: dirichlet_alpha {alpha} must be positive"
        )));
    }
    let gamma_dist = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = seeded(seed);
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        transition.extend(dirichlet(&mut rng, &gamma_dist, n_states));
    }
    let reward: Vec<f64> = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
    let mu0 = dirichlet(&mut rng, &gamma_dist, n_states);
    let mdp = Mdp::new(n_states, n_actions, transition, mu0, gamma)?;
    Instance::new(mdp, RewardTable::new(n_states, n_actions, reward)?)
}

fn chain(n: usize, gamma: f64) -> Result<Instance> {
    if n == 0 {
        return Err(Error::InvalidParameter("chain: n must be positive".into()));
    }
    let mut transition = vec![0.0; n * 2 * n];
    for s in 0..n {
        transition[(s * 2) * n + s] = 1.0;
        transition[(s * 2 + 1) * n + (s + 1) % n] = 1.0;
    }
    let mut mu0 = vec![0.0; n];
    mu0[0] = 1.0;
    let mdp = Mdp::new(n, 2, transition, mu0, gamma)?;
    let reward = RewardTable::from_fn(n, 2, |s, _| if s == n - 1 { 1.0 } else { 0.0 })?;
    Instance::new(mdp, reward)
}

fn gridworld(n: usize, slip: f64, goal_reward: f64, gamma: f64) -> Result<Instance> {
    if n < 2 {
        return Err(Error::InvalidParameter("gridworld: n must be at least 2".into()));
    }
    if !(0.0..=1.0).contains(&slip) {
        return Err(Error::InvalidParameter(format!(
            "gridworld: slip_prob {slip} outside [0, 1]"
        )));
    }
    if !goal_reward.is_finite() {
        return Err(Error::InvalidParameter("gridworld: goal_reward must be finite".into()));
    }
    let n_states = n * n;
    let goal = n_states - 1;
    // (drow, dcol) for up, right, down, left.
    const MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];
    let step = |s: usize, dir: usize| -> usize {
        let (row, col) = ((s / n) as isize, (s % n) as isize);
        let (r2, c2) = (row + MOVES[dir].0, col + MOVES[dir].1);
        if r2 < 0 || c2 < 0 || r2 >= n as isize || c2 >= n as isize {
            s
        } else {
            r2 as usize * n + c2 as usize
        }
    };
    let mut transition = vec![0.0; n_states * 4 * n_states];
    for s in 0..n_states {
        for a in 0..4 {
            let row = &mut transition[(s * 4 + a) * n_states..(s * 4 + a + 1) * n_states];
            if s == goal {
                row[s] = 1.0;
                continue;
            }
            row[step(s, a)] += 1.0 - slip;
            row[step(s, (a + 1) % 4)] += slip / 2.0;
            row[step(s, (a + 3) % 4)] += slip / 2.0;
        }
    }
    let mut mu0 = vec![0.0; n_states];
    mu0[0] = 1.0;
    let mdp = Mdp::new(n_states, 4, transition, mu0, gamma)?;
    let reward = RewardTable::from_fn(n_states, 4, |s, _| if s == goal { goal_reward } else { 0.0 })?;
    Instance::new(mdp, reward)
}

/// A single self-looping state: action `a` pays `rewards[a]` forever.
pub fn bandit(rewards: &[f64], gamma: f64) -> Result<Instance> {
    let n_actions = rewards.len();
    if n_actions == 0 {
        return Err(Error::InvalidParameter("bandit: at least one action required".into()));
    }
    let mdp = Mdp::new(1, n_actions, vec![1.0; n_actions], vec![1.0], gamma)?;
    Instance::new(mdp, RewardTable::new(1, n_actions, rewards.to_vec())?)
}

/// Adds a seeded Gaussian bonus to every cell whose reward is at most
/// `threshold`: `r(s,a) + delta(s,a) * [r(s,a) <= threshold]`.
///
/// One normal draw is consumed per cell in row-major order whether or not
/// the cell qualifies, so the bonus of a cell does not depend on the others.
pub fn perturb_reward(
    r: &RewardTable,
    threshold: f64,
    delta_mean: f64,
    delta_std: f64,
    seed: u64,
) -> Result<RewardTable> {
    if !(delta_std >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "perturbation: delta_std {delta_std} must be nonnegative"
        )));
    }
    let normal =
        Normal::new(delta_mean, delta_std).map_err(|e| Error::InvalidParameter(format!("perturbation: {e}")))?;
    let mut rng = seeded(seed);
    let values = r
        .as_slice()
        .iter()
        .map(|&v| {
            let delta = normal.sample(&mut rng);
            if v <= threshold {
                v + delta
            } else {
                v
            }
        })
        .collect();
    RewardTable::new(r.n_states(), r.n_actions(), values)
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Random {
                seed,
                n_states,
                n_actions,
                dirichlet_alpha,
                gamma,
            } => write!(
                f,
                "random:seed={seed},n_states={n_states},n_actions={n_actions},alpha={dirichlet_alpha},gamma={gamma}"
            ),
            GeneratorSpec::Chain { n, gamma } => write!(f, "chain:n={n},gamma={gamma}"),
            GeneratorSpec::Gridworld {
                n,
                slip_prob,
                goal_reward,
                gamma,
            } => write!(f, "gridworld:n={n},slip={slip_prob},goal={goal_reward},gamma={gamma}"),
            GeneratorSpec::Bandit { rewards, gamma } => {
                let r: Vec<String> = rewards.iter().map(f64::to_string).collect();
                write!(f, "bandit:rewards={},gamma={gamma}", r.join(";"))
            }
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut params = std::collections::BTreeMap::new();
        for pair in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("generator parameter `{pair}` is not key=value")))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |keys: &[&str]| keys.iter().find_map(|k| params.remove(*k));
        fn parse<T: FromStr>(key: &str, value: Option<String>) -> Result<T> {
            let value = value.ok_or_else(|| Error::InvalidParameter(format!("generator needs `{key}`")))?;
            value
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("generator `{key}`: cannot parse `{value}`")))
        }
        let gamma = match take(&["gamma"]) {
            Some(g) => parse("gamma", Some(g))?,
            None => DEFAULT_GAMMA,
        };
        let spec = match kind.trim() {
            "random" => GeneratorSpec::Random {
                seed: parse("seed", take(&["seed"]))?,
                n_states: parse("n_states", take(&["n_states", "states"]))?,
                n_actions: parse("n_actions", take(&["n_actions", "actions"]))?,
                dirichlet_alpha: parse("alpha", take(&["alpha", "dirichlet_alpha"]))?,
                gamma,
            },
            "chain" => GeneratorSpec::Chain {
                n: parse("n", take(&["n"]))?,
                gamma,
            },
            "gridworld" => GeneratorSpec::Gridworld {
                n: parse("n", take(&["n"]))?,
                slip_prob: parse("slip", take(&["slip", "slip_prob"]))?,
                goal_reward: parse("goal", take(&["goal", "goal_reward"]))?,
                gamma,
            },
            "bandit" => {
                let raw: String = parse("rewards", take(&["rewards"]))?;
                let rewards = raw
                    .split(';')
                    .map(|v| parse("rewards", Some(v.to_string())))
                    .collect::<Result<Vec<f64>>>()?;
                GeneratorSpec::Bandit { rewards, gamma }
            }
            other => return Err(Error::InvalidParameter(format!("unknown generator `{other}`"))),
        };
        if let Some(key) = params.keys().next() {
            return Err(Error::InvalidParameter(format!("unknown generator parameter `{key}`")));
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row_sums_ok(inst: &Instance) -> bool {
        let mdp = &inst.mdp;
        (0..mdp.n_states()).all(|s| {
            (0..mdp.n_actions()).all(|a| {
                let row = mdp.transition_row(s, a);
                row.iter().all(|&p| p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-12
            })
        })
    }

    #[test]
    fn random_is_deterministic() {
        let spec = GeneratorSpec::Random {
            seed: 7,
            n_states: 3,
            n_actions: 2,
            dirichlet_alpha: 1.0,
            gamma: 0.9,
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(row_sums_ok(&a));
        assert!(a.reward.as_slice().iter().all(|r| (0.0..1.0).contains(r)));
    }

    #[test]
    fn chain_of_two_matches_hand_built_fixture() {
        let inst = generate(&GeneratorSpec::Chain { n: 2, gamma: 0.5 }).unwrap();
        let expected = Instance::from_json(
            r#"{"n_states":2,"n_actions":2,"gamma":0.5,"mu0":[1.0,0.0],
                "transition":[[[1.0,0.0],[0.0,1.0]],[[0.0,1.0],[1.0,0.0]]],
                "reward":[[0.0,0.0],[1.0,1.0]]}"#,
        )
        .unwrap();
        assert_eq!(inst, expected);
    }

    #[test]
    fn gridworld_rows_are_distributions() {
        let inst = generate(&GeneratorSpec::Gridworld {
            n: 4,
            slip_prob: 0.1,
            goal_reward: 1.0,
            gamma: 0.9,
        })
        .unwrap();
        assert_eq!(inst.mdp.shape(), (16, 4));
        assert!(row_sums_ok(&inst));
        // Moving right from the start: 0.9 to the right, 0.05 bumps the top wall, 0.05 down.
        let row = inst.mdp.transition_row(0, 1);
        assert!((row[1] - 0.9).abs() < 1e-15);
        assert!((row[0] - 0.05).abs() < 1e-15);
        assert!((row[4] - 0.05).abs() < 1e-15);
        assert_eq!(inst.mdp.transition_row(15, 2)[15], 1.0);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(generate(&GeneratorSpec::Chain { n: 0, gamma: 0.5 }).is_err());
        assert!(generate(&GeneratorSpec::Gridworld {
            n: 3,
            slip_prob: 1.5,
            goal_reward: 1.0,
            gamma: 0.9
        })
        .is_err());
        assert!(generate(&GeneratorSpec::Random {
            seed: 1,
            n_states: 2,
            n_actions: 2,
            dirichlet_alpha: 0.0,
            gamma: 0.9
        })
        .is_err());
        assert!(generate(&GeneratorSpec::Bandit {
            rewards: vec![1.0],
            gamma: 1.0
        })
        .is_err());
    }

    #[test]
    fn spec_strings_parse_and_print() {
        let spec: GeneratorSpec = "random:seed=7,n_states=3,n_actions=2,alpha=1.0".parse().unwrap();
        assert_eq!(
            spec,
            GeneratorSpec::Random {
                seed: 7,
                n_states: 3,
                n_actions: 2,
                dirichlet_alpha: 1.0,
                gamma: 0.9
            }
        );
        assert_eq!(spec.to_string().parse::<GeneratorSpec>().unwrap(), spec);
        let grid: GeneratorSpec = "gridworld:n=6,slip=0.1,goal=1,gamma=0.95".parse().unwrap();
        assert_eq!(grid.to_string().parse::<GeneratorSpec>().unwrap(), grid);
        let bandit: GeneratorSpec = "bandit:rewards=1;0".parse().unwrap();
        assert_eq!(bandit.to_string().parse::<GeneratorSpec>().unwrap(), bandit);
        assert!("chain:n=2,colour=red".parse::<GeneratorSpec>().is_err());
        assert!("maze:n=2".parse::<GeneratorSpec>().is_err());
        assert!("chain:n=two".parse::<GeneratorSpec>().is_err());
    }

    #[test]
    fn perturbation_examples() {
        let r = RewardTable::new(2, 2, vec![-6.0, -1.0, 0.0, -5.0]).unwrap();
        let same = perturb_reward(&r, -10.0, 5.0, 1.0, 3).unwrap();
        assert_eq!(same, r);

        let shifted = perturb_reward(&r, -5.0, 5.0, 0.0, 3).unwrap();
        assert_eq!(shifted.as_slice(), &[-1.0, -1.0, 0.0, 0.0]);

        let a = perturb_reward(&r, -5.0, 5.0, 0.1f64.sqrt(), 9).unwrap();
        let b = perturb_reward(&r, -5.0, 5.0, 0.1f64.sqrt(), 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get(0, 1), -1.0);
        assert_ne!(a.get(0, 0), -1.0);

        assert!(perturb_reward(&r, 0.0, 1.0, -1.0, 0).is_err());
    }
}
