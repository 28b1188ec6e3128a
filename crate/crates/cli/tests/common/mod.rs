#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

use rand::Rng;
use regdual::duality::{corrupt_adversary, duality_gap_report};
use regdual::rng::{seeded, SeededRng};
use regdual::{bandit, generate, occupancy_from_policy, GeneratorSpec, Instance, Objective, OccupancyMeasure, Policy};
use regdual_cli::{Command, InstanceSource, ObjectiveKind, ObjectiveSpec, Perturbation, RunConfig, SweepSpec};

/// Set to rewrite the committed fixtures instead of comparing against them.
pub const BLESS_VAR: &str = "REGDUAL_BLESS";

pub const SWEEP_GRID: [f64; 7] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixture_dir().join(name)
}

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

/// Occupancy of a random policy on another MDP of the same shape, so in
/// general not reachable on `seed`'s instance.
pub fn foreign_expert(seed: u64, n_states: usize, n_actions: usize) -> OccupancyMeasure {
    let other = random_instance(seed ^ 0x005e_ed0f_e4be, n_states, n_actions);
    random_occupancy(&mut seeded(seed.wrapping_add(17)), &other)
}

pub fn rnd3() -> Instance {
    generate(&"random:seed=7,n_states=3,n_actions=2,alpha=1.0".parse().unwrap()).unwrap()
}

pub fn sweep_config(output: PathBuf) -> RunConfig {
    RunConfig {
        command: Command::Sweep,
        instance: InstanceSource::Generator("gridworld:n=6,slip=0.1,goal=1.0".parse().unwrap()),
        objective: ObjectiveSpec {
            kind: ObjectiveKind::Sac,
            epsilon: None,
            expert: None,
            metric: None,
            lipschitz: None,
        },
        sweep: Some(SweepSpec {
            epsilon_grid: SWEEP_GRID.to_vec(),
            perturbation: Perturbation {
                threshold: 0.5,
                delta_mean: 0.0,
                delta_std: 0.3,
                seed: 19,
            },
        }),
        output,
        seed: 19,
        tol: None,
        report: None,
        timing: false,
    }
}

fn json(value: &impl serde::Serialize) -> String {
    format!("{}\n", serde_json::to_string_pretty(value).unwrap())
}

/// Every committed fixture as `(relative path, contents)`.
pub fn build_fixtures() -> Vec<(&'static str, String)> {
    let negative = random_instance(11, 5, 3);
    let obj = Objective::entropy_sac(negative.reward.clone(), 0.5).unwrap();
    let report = duality_gap_report(&negative.mdp, &obj).unwrap();
    let corrupted = corrupt_adversary(&negative.mdp, &obj, &report, 0.1, 3).unwrap();
    let rnd3 = rnd3();
    let expert = occupancy_from_policy(&rnd3.mdp, &Policy::uniform(3, 2)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let config = sweep_config(dir.path().to_path_buf());
    let outcome = regdual_cli::run(&config).unwrap();
    assert!(outcome.passed());
    let golden = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let committed = RunConfig {
        output: PathBuf::from("sweep-out"),
        ..config
    };

    vec![
        ("m1.json", format!("{}\n", bandit(&[1.0, 0.0], 0.9).unwrap().to_json())),
        (
            "m2.json",
            format!(
                "{}\n",
                generate(&"chain:n=2,gamma=0.5".parse().unwrap()).unwrap().to_json()
            ),
        ),
        ("rnd3.json", format!("{}\n", rnd3.to_json())),
        ("rnd3_expert.json", json(&expert)),
        ("negative_control/instance.json", format!("{}\n", negative.to_json())),
        ("negative_control/report.json", format!("{}\n", corrupted.to_json())),
        ("sweep.json", json(&committed)),
        ("sweep_golden.csv", golden),
    ]
}

pub fn regdual(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_regdual"))
        .args(args)
        .output()
        .unwrap()
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
