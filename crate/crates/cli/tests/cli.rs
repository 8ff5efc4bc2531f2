use std::path::Path;
use std::process::{Command, Output};

fn hrson(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrson"))
        .args(args)
        .env_remove("RUST_BACKTRACE")
        .env_remove("RUST_LIB_BACKTRACE")
        .output()
        .expect("spawn hrson")
}

fn ok(args: &[&str]) -> String {
    let out = hrson(args);
    assert!(
        out.status.success(),
        "hrson {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

const SMALL: [&str; 4] = ["--nodes", "12", "--duration", "3600"];

#[test]
fn presets_are_listed_and_validate() {
    let names = ok(&["presets"]);
    let names: Vec<&str> = names.lines().collect();
    assert_eq!(names.len(), 8);
    for n in names {
        assert!(ok(&["validate", "--scenario", n]).starts_with("ok:"));
    }
}

#[test]
fn misspelled_key_is_named_in_the_error() {
    let out = hrson(&["validate", "--set", "routing.copise=3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("copise"));
}

#[test]
fn unknown_scenario_and_bad_values_fail() {
    assert!(!hrson(&["validate", "--scenario", "no-such-thing"]).status.success());
    assert!(!hrson(&["validate", "--duration", "-5"]).status.success());
    assert!(!hrson(&["validate", "--router", "flood"]).status.success());
    assert!(!hrson(&["batch", "--runs", "0"]).status.success());
}

#[test]
fn dumped_scenario_reloads_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    let dumped = ok(&["validate", "--scenario", "desk3", "--copies", "7", "--dump"]);
    std::fs::write(&path, &dumped).unwrap();
    let again = ok(&["validate", "--scenario", path.to_str().unwrap(), "--dump"]);
    assert_eq!(dumped, again);
    assert!(dumped.contains("copies = 7"));
}

#[test]
fn run_writes_identical_csvs_for_the_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}"));
        let mut args = vec!["run", "--seed", "4", "--out", out.to_str().unwrap()];
        args.extend(SMALL);
        ok(&args);
        assert_eq!(lines(&out.join("runs.csv")), 2);
        assert_eq!(lines(&out.join("aggregate.csv")), 2);
        outputs.push(std::fs::read(out.join("runs.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn batch_runs_consecutive_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let mut args = vec!["batch", "--runs", "3", "--base-seed", "10", "--out", out.to_str().unwrap()];
    args.extend(SMALL);
    ok(&args);
    let runs = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    let seeds: Vec<&str> = runs.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(seeds, ["10", "11", "12"]);
}

#[test]
fn sweep_writes_one_aggregate_row_per_value_and_router() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let mut args = vec![
        "sweep", "--param", "copies", "--values", "2,6", "--routers", "snw,hrson", "--runs", "2",
        "--out", out.to_str().unwrap(),
    ];
    args.extend(SMALL);
    let stdout = ok(&args);
    assert_eq!(stdout.lines().count(), 4);
    assert_eq!(lines(&out.join("aggregate.csv")), 5);
    let header = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert!(header.starts_with("copies,router,runs,"));
    assert_eq!(lines(&out.join("runs").join("copies_6_hrson.csv")), 3);
}

#[test]
fn sweep_without_parameter_is_rejected() {
    let out = hrson(&["sweep", "--scenario", "desk2", "--set", "sweep.values=[]"]);
    assert!(!out.status.success());
}

#[test]
fn shipped_scenario_files_match_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for name in ok(&["presets"]).lines() {
        let file = dir.join(format!("{name}.toml"));
        let from_file = ok(&["validate", "--scenario", file.to_str().unwrap(), "--dump"]);
        assert_eq!(from_file, ok(&["validate", "--scenario", name, "--dump"]), "{name}");
    }
}
