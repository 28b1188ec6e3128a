#![allow(dead_code)]

use rand::Rng;
use regdual::rng::{seeded, SeededRng};
use regdual::{generate, occupancy_from_policy, GeneratorSpec, Instance, OccupancyMeasure, Policy};

pub fn random_instance(seed: u64, n_states: usize, n_actions: usize) -> Instance {
    generate(&GeneratorSpec::Random {
        seed,
        n_states,
        n_actions,
        dirichlet_alpha: 1.0,
        gamma: 0.9,
    })
    .unwrap()
}

pub fn rng(seed: u64) -> SeededRng {
    seeded(seed)
}

/// Rows drawn uniformly then normalized; entries bounded away from zero.
pub fn random_policy(rng: &mut SeededRng, n_states: usize, n_actions: usize) -> Policy {
    let mut values = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        let row: Vec<f64> = (0..n_actions).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = row.iter().sum();
        values.extend(row.iter().map(|v| v / total));
    }
    Policy::new(n_states, n_actions, values).unwrap()
}

pub fn random_occupancy(rng: &mut SeededRng, inst: &Instance) -> OccupancyMeasure {
    let (n_states, n_actions) = inst.mdp.shape();
    occupancy_from_policy(&inst.mdp, &random_policy(rng, n_states, n_actions)).unwrap()
}

pub fn random_vec(rng: &mut SeededRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Occupancy of a random policy on another random MDP of the same shape; in
/// general not reachable on `seed`'s instance.
pub fn foreign_expert(seed: u64, n_states: usize, n_actions: usize) -> OccupancyMeasure {
    let other = random_instance(seed ^ 0x005e_ed0f_e4be, n_states, n_actions);
    let mut r = rng(seed.wrapping_add(17));
    random_occupancy(&mut r, &other)
}
