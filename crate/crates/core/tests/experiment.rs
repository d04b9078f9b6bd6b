use std::path::PathBuf;

use ihomp::experiment::{run_experiment, sweep_partitions, ExperimentConfig};
use ihomp::options::HierPolicy;
use ihomp::Error;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str, overrides: &[&str]) -> ExperimentConfig {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::load(config(name), &overrides).unwrap()
}

fn config_key(e: Error) -> String {
    match e {
        Error::Config { key, .. } => key,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn shipped_configs_validate() {
    for name in [
        "gridworld_theorem1.cfg",
        "puddle_2x2.cfg",
        "puddle_sweep.cfg",
        "two_rooms_roi.cfg",
        "pinball_4x3.cfg",
        "s_corridor.cfg",
    ] {
        load(name, &[]).validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn pinball_grid_needs_one_count_per_dimension() {
    let cfg = load("pinball_4x3.cfg", &["partition.grid=[4,3]"]);
    assert_eq!(config_key(cfg.validate().unwrap_err()), "partition.grid");
}

#[test]
fn discount_of_one_is_rejected() {
    let cfg = load("gridworld_theorem1.cfg", &["algorithm.gamma=1.0"]);
    assert_eq!(config_key(cfg.validate().unwrap_err()), "algorithm.gamma");
}

#[test]
fn unknown_override_section_is_rejected() {
    let overrides = vec!["nonsense.key=1".to_string()];
    assert!(ExperimentConfig::load(config("gridworld_theorem1.cfg"), &overrides).is_err());
}

#[test]
fn one_class_ihomp_reaches_the_optimal_value() {
    let dir = tempfile::tempdir().unwrap();
    let avi = load("gridworld_theorem1.cfg", &["algorithm.kind=\"avi-baseline\""]);
    let avi = run_experiment(&avi, Some(&dir.path().join("avi"))).unwrap();
    assert_eq!(avi[0].curve.len(), 1);
    let best = avi[0].last().mean_return;

    let one = load(
        "gridworld_theorem1.cfg",
        &["partition.grid=[1,1]", "algorithm.iterations=1"],
    );
    let one = run_experiment(&one, Some(&dir.path().join("one"))).unwrap();
    assert!((one[0].last().mean_return - best).abs() < 1e-6);
}

#[test]
fn theorem_config_ends_within_tolerance_and_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load("gridworld_theorem1.cfg", &[]);
    let best = run_experiment(
        &load("gridworld_theorem1.cfg", &["algorithm.kind=\"avi-baseline\""]),
        Some(&dir.path().join("avi")),
    )
    .unwrap()[0]
        .last()
        .mean_return;
    let results = run_experiment(&cfg, Some(&dir.path().join("ihomp"))).unwrap();
    let r = &results[0];
    assert_eq!(r.curve.len(), 67);
    assert!(best - r.last().mean_return <= 0.01 + 1e-9);
    assert!(r.curve.iter().all(|p| p.episodes == 0 && p.success_rate.is_nan()));

    let curve = std::fs::read_to_string(r.dir.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 68);
    assert!(curve.starts_with("iteration,mean_return,std,episodes,success_rate\n"));
    assert_eq!(HierPolicy::load(r.dir.join("policy.txt")).unwrap(), r.policy);
    assert!(r.dir.join("value_grid.csv").exists());
    assert!(!r.dir.join("partition_grid.csv").exists());
}

#[test]
fn sweep_tabulates_one_row_per_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load("gridworld_theorem1.cfg", &["algorithm.iterations=5"]);
    let rows = sweep_partitions(&cfg, &[vec![1, 1], vec![2, 2]], Some(dir.path())).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.costs.len() == 1 && r.std == 0.0));
    // one class holds the optimal policy after a single sweep
    assert!(rows[0].mean_cost <= rows[1].mean_cost + 1e-9);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("2x2/seed-0/curve.csv").exists());

    assert!(sweep_partitions(&cfg, &[vec![2, 2]], Some(dir.path())).is_err());
}
