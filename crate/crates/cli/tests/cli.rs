//! End-to-end behaviour of the `regdual` binary.

mod common;

use std::path::Path;

use common::{fixture, read_json, regdual};
use regdual_cli::{EXIT_CONFIG, EXIT_FAIL, EXIT_IO, EXIT_PASS};

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn status(out: &std::process::Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn m1_sac_verifies_with_tiny_gap() {
    let dir = tempfile::tempdir().unwrap();
    let out = regdual(&[
        "verify",
        "--instance",
        path(&fixture("m1.json")),
        "--objective",
        "sac",
        "--epsilon",
        "1.0",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(status(&out), EXIT_PASS, "{}", String::from_utf8_lossy(&out.stdout));
    let report = read_json(&dir.path().join("report.json"));
    assert!(report["gap"].as_f64().unwrap() <= 1e-6);
    assert!((report["primal_value"].as_f64().unwrap() - 0.620_115).abs() < 1e-6);
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["status"], 0);
}

#[test]
fn linear_verifies_with_zero_gap() {
    for instance in ["m1.json", "m2.json", "rnd3.json"] {
        let dir = tempfile::tempdir().unwrap();
        let out = regdual(&[
            "verify",
            "--instance",
            path(&fixture(instance)),
            "--out",
            path(dir.path()),
        ]);
        assert_eq!(status(&out), EXIT_PASS, "{instance}");
        assert_eq!(
            read_json(&dir.path().join("report.json"))["gap"].as_f64(),
            Some(0.0),
            "{instance}"
        );
    }
}

#[test]
fn negative_control_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let out = regdual(&[
        "verify",
        "--instance",
        path(&fixture("negative_control/instance.json")),
        "--report",
        path(&fixture("negative_control/report.json")),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(status(&out), EXIT_FAIL);
    let verdicts = read_json(&dir.path().join("verification.json"));
    let slack = verdicts
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["name"] == "optimality-slack")
        .unwrap();
    assert_eq!(slack["pass"], false);
    assert!(slack["value"].as_f64().unwrap() > 1e-3);
}

#[test]
fn every_objective_verifies_on_rnd3() {
    let expert = fixture("rnd3_expert.json");
    let rnd3 = fixture("rnd3.json");
    let cases: [&[&str]; 7] = [
        &["--objective", "linear"],
        &["--objective", "sac", "--epsilon", "0.5"],
        &["--objective", "tsallis", "--epsilon", "0.5"],
        &["--objective", "buffer", "--epsilon", "0.5"],
        &["--objective", "kl-imitation", "--expert", path(&expert)],
        &["--objective", "entropy-explore"],
        &["--objective", "ipm", "--expert", path(&expert), "--lipschitz", "2.0"],
    ];
    for extra in cases {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec!["verify", "--instance", path(&rnd3), "--out", path(dir.path())];
        args.extend_from_slice(extra);
        let out = regdual(&args);
        assert_eq!(
            status(&out),
            EXIT_PASS,
            "{extra:?}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
        let names: Vec<String> = read_json(&dir.path().join("summary.json"))["verdicts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v["name"].as_str().unwrap().to_string())
            .collect();
        for required in ["transition-rows", "flow-residual", "strong-duality", "optimality-slack"] {
            assert!(names.iter().any(|n| n == required), "{extra:?} lacks {required}");
        }
        if extra[1] == "ipm" {
            assert!(names.iter().any(|n| n == "witness-lipschitz"));
        }
    }
}

#[test]
fn solve_output_feeds_imitation() {
    let dir = tempfile::tempdir().unwrap();
    let solved = dir.path().join("solve");
    let generator = "random:seed=4,n_states=5,n_actions=3,alpha=1.0";
    let out = regdual(&[
        "solve",
        "--generator",
        generator,
        "--objective",
        "sac",
        "--epsilon",
        "0.5",
        "--out",
        path(&solved),
    ]);
    assert_eq!(status(&out), EXIT_PASS);
    let expert = solved.join("occupancy.json");
    let out = regdual(&[
        "verify",
        "--generator",
        generator,
        "--objective",
        "kl-imitation",
        "--expert",
        path(&expert),
        "--out",
        path(&dir.path().join("verify")),
    ]);
    assert_eq!(status(&out), EXIT_PASS, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn qlearn_and_dual_commands() {
    let rnd3 = fixture("rnd3.json");
    for (objective, check) in [("sac", "q-equality"), ("tsallis", "q-upper-bound")] {
        let dir = tempfile::tempdir().unwrap();
        let out = regdual(&[
            "qlearn",
            "--instance",
            path(&rnd3),
            "--objective",
            objective,
            "--epsilon",
            "0.5",
            "--out",
            path(dir.path()),
        ]);
        assert_eq!(status(&out), EXIT_PASS, "{objective}");
        assert!(String::from_utf8_lossy(&out.stdout).contains(&format!("{check} PASS")));
        assert!(dir.path().join("qlearn.json").exists());
    }
    let dir = tempfile::tempdir().unwrap();
    let out = regdual(&[
        "dual",
        "--instance",
        path(&rnd3),
        "--objective",
        "sac",
        "--epsilon",
        "0.1",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(status(&out), EXIT_PASS);
    let dual = read_json(&dir.path().join("dual.json"));
    let gap = dual["dual"]["value"].as_f64().unwrap() - dual["primal_value"].as_f64().unwrap();
    assert!(gap.abs() < 1e-9, "{gap}");
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = "gridworld:n=5,slip=0.2,goal=2.0,gamma=0.95";
    let names = ["instance.json", "config.json", "summary.json"];
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let out = regdual(&["generate", "--generator", spec, "--out", path(dir.path())]);
        assert_eq!(status(&out), EXIT_PASS);
        let files: Vec<Vec<u8>> = names
            .iter()
            .map(|n| std::fs::read(dir.path().join(n)).unwrap())
            .collect();
        snapshots.push(files);
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn sweep_config_reproduces_the_golden_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = regdual_cli::RunConfig::load(&fixture("sweep.json")).unwrap();
    config.output = dir.path().to_path_buf();
    let config_path = dir.path().join("run.json");
    std::fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();
    let out = regdual(&["--config", path(&config_path)]);
    assert_eq!(status(&out), EXIT_PASS);
    let produced = std::fs::read(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(produced, std::fs::read(fixture("sweep_golden.csv")).unwrap());
}

#[test]
fn timed_sweep_records_wall_clock() {
    let dir = tempfile::tempdir().unwrap();
    let out = regdual(&[
        "sweep",
        "--generator",
        "gridworld:n=3,slip=0.1,goal=1.0",
        "--epsilon-grid",
        "0.1,0.5",
        "--threshold",
        "0.5",
        "--delta-std",
        "0.2",
        "--seed",
        "4",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(status(&out), EXIT_PASS);
    let records = read_json(&dir.path().join("sweep.json"));
    let records = records.as_array().unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(records[1]["trained_on"], "perturbed_reward");
    assert!(records.iter().all(|r| r["wall_ms"].as_f64().unwrap() >= 0.0));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = path(dir.path());
    let m1 = fixture("m1.json");
    let cases: [&[&str]; 6] = [
        &[
            "verify",
            "--instance",
            path(&m1),
            "--objective",
            "sac",
            "--out",
            out_dir,
        ],
        &[
            "verify",
            "--instance",
            path(&m1),
            "--objective",
            "sac",
            "--epsilon",
            "-1",
            "--out",
            out_dir,
        ],
        &[
            "verify",
            "--instance",
            path(&m1),
            "--objective",
            "kl-imitation",
            "--out",
            out_dir,
        ],
        &[
            "sweep",
            "--instance",
            path(&m1),
            "--epsilon-grid",
            "0.5,0.1",
            "--out",
            out_dir,
        ],
        &["verify", "--generator", "random:seed=1", "--out", out_dir],
        &["verify", "--out", out_dir],
    ];
    for args in cases {
        assert_eq!(status(&regdual(args)), EXIT_CONFIG, "{args:?}");
    }
}

#[test]
fn missing_files_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let out = regdual(&["verify", "--instance", path(&missing), "--out", path(dir.path())]);
    assert_eq!(status(&out), EXIT_IO);
    let out = regdual(&["--config", path(&missing)]);
    assert_eq!(status(&out), EXIT_IO);
}
