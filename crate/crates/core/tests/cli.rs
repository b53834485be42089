use std::path::Path;
use std::process::{Command, Output};

fn swarmnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmnet"))
        .args(args)
        .env_remove("SWARMNET_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "horizon = 150\ntrials = 2\n[world]\nn_agents = 3\n";

#[test]
fn validate_accepts_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", "");
    let out = swarmnet(&["validate", "--config", &cfg]);
    assert!(out.status.success());
}

#[test]
fn validate_names_the_violated_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "[controller]\nr_collision = 12.0\nr_flock = 10.0\n",
    );
    let out = swarmnet(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("r_collision") && err.contains("r_flock"),
        "{err}"
    );
}

#[test]
fn unknown_keys_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "typo.toml", "[world]\nn_agent = 4\n");
    let out = swarmnet(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_agent"));
}

#[test]
fn missing_config_is_an_io_error() {
    let out = swarmnet(&["validate", "--config", "/nonexistent/swarmnet.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = swarmnet(&[
            "run",
            "--config",
            &cfg,
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "batch.json",
        "trials.jsonl",
        "trial_0001/trace.csv",
        "trial_0001/deliveries.csv",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn run_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("o");
    let o = swarmnet(&[
        "run",
        "--config",
        &cfg,
        "--trials",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let trials = std::fs::read_to_string(out.join("trials.jsonl")).unwrap();
    assert_eq!(trials.lines().count(), 3);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let target = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_swarmnet"))
        .args(["run", "--config", &cfg])
        .env("SWARMNET_OUTPUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(target.join("batch.json").is_file());
}

#[test]
fn sweep_creates_a_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("sweep");
    let o = swarmnet(&[
        "sweep",
        "--config",
        &cfg,
        "--param",
        "link_model.variant",
        "--values",
        "unit_disk,experimental_randomness",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out
        .join("link_model.variant=unit_disk/batch.json")
        .is_file());
    assert!(out
        .join("link_model.variant=experimental_randomness/batch.json")
        .is_file());
}

#[test]
fn sweep_with_unknown_param_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let o = swarmnet(&[
        "sweep",
        "--config",
        &cfg,
        "--param",
        "world.nope",
        "--values",
        "1,2",
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));
}
