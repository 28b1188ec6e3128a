//! Benchmark instances shared by the criterion suites.

use regdual::{generate, GeneratorSpec, Instance};

/// Random MDP with `gamma = 0.9` and uniform Dirichlet rows.
pub fn random(seed: u64, n_states: usize, n_actions: usize) -> Instance {
    generate(&GeneratorSpec::Random {
        seed,
        n_states,
        n_actions,
        dirichlet_alpha: 1.0,
        gamma: 0.9,
    })
    .expect("valid generator parameters")
}
