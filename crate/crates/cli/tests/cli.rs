use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn polariton(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polariton")).args(args).current_dir(dir).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn config(dir: &TempDir, name: &str, body: &str) -> String {
    fs::write(dir.path().join(name), body).unwrap();
    name.to_string()
}

const TWO_SITES: &str = r#"
[graph]
chain = 2

[qubit]
alpha = [0.6, 0.0]
beta = [0.0, 0.8]

[schedule]
kind = "snapshot-list"
times = [1.5707963267948966]
"#;

#[test]
fn simulate_two_sites() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "two.toml", TWO_SITES);
    let out = polariton(&["simulate", &cfg, "--out", "run"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/record.json")).unwrap()).unwrap();
    assert!((record["rounds"][0]["cumulative"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((record["conditional_fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let csv = fs::read_to_string(dir.path().join("run/rounds.csv")).unwrap();
    assert!(csv.starts_with("round,time,p_k,absolute,P_k,remaining\n"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn outputs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "chain.toml", "[graph]\nchain = 7\n[protocol]\ntarget = 0.999\n");
    for run in ["a", "b"] {
        assert_eq!(code(&polariton(&["simulate", &cfg, "--out", run], dir.path())), 0);
    }
    for file in ["record.json", "rounds.csv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn json_config_and_graph_file() {
    let dir = TempDir::new().unwrap();
    config(&dir, "y.json", r#"{"nodes": 3, "edges": [[1, 2, 1.0], [2, 3, 1.0]], "sender": 1, "receiver": 3}"#);
    let cfg = config(&dir, "run.json", r#"{"graph": {"file": "y.json"}, "protocol": {"target": 0.9}}"#);
    let out = polariton(&["simulate", &cfg, "--out", "run"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn disconnected_graph_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "split.toml",
        "[graph]\nnodes = 4\nedges = [[1, 2, 1.0], [3, 4, 1.0]]\nsender = 1\nreceiver = 4\n",
    );
    let out = polariton(&["simulate", &cfg, "--out", "run"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("ceiling=0"));
}

#[test]
fn config_errors_exit_one_with_one_line() {
    let dir = TempDir::new().unwrap();
    for (name, body) in [
        ("key.toml", "[graph]\nchain = 3\nbogus = 1\n"),
        ("section.toml", "[graph]\nchain = 3\n[extra]\n"),
        ("qubit.toml", "[graph]\nchain = 3\n[qubit]\nalpha = [1.0, 0.0]\nbeta = [1.0, 0.0]\n"),
        ("target.toml", "[graph]\nchain = 3\n[protocol]\ntarget = 1.5\n"),
    ] {
        let cfg = config(&dir, name, body);
        let out = polariton(&["simulate", &cfg], dir.path());
        assert_eq!(code(&out), 1, "{name}");
        let err = stderr(&out);
        assert_eq!(err.lines().count(), 1, "{name}: {err}");
        assert!(err.starts_with("error["), "{name}: {err}");
    }
    let out = polariton(&["simulate", "missing.toml"], dir.path());
    assert!(stderr(&out).starts_with("error[io]"));
}

#[test]
fn synthetic_fit() {
    let dir = TempDir::new().unwrap();
    let out = polariton(&["fit", "--synthetic", "--out", "fit"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fit/fit.json")).unwrap()).unwrap();
    assert!((fit["c"].as_f64().unwrap() - 0.33).abs() < 1e-9);
    assert!((fit["p"].as_f64().unwrap() - 5.0 / 3.0).abs() < 1e-9);
    assert!((fit["j_eff_over_a"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!(fit["conventions"]["photon"].is_number());
}

#[test]
fn sweep_and_fit_from_config() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "sweep.toml",
        "[sweep]\nsizes = [4, 6, 8, 10, 12]\nf = [0.9]\npolicies = [\"regular\", \"optimized\"]\nexecution = \"sequential\"\n",
    );
    assert_eq!(code(&polariton(&["sweep", &cfg, "--out", "s"], dir.path())), 0);
    let csv = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    let out = polariton(&["fit", &cfg, "--out", "s"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s/fit.json")).unwrap()).unwrap();
    assert_eq!(fit["policy"], "regular");
    assert_eq!(fit["points"].as_array().unwrap().len(), 5);
}

#[test]
fn empty_sweep() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "empty.toml", "[sweep]\nsizes = []\n");
    assert_eq!(code(&polariton(&["sweep", &cfg, "--out", "e"], dir.path())), 0);
    assert_eq!(fs::read_to_string(dir.path().join("e/sweep.csv")).unwrap(), "N,policy,F,t,rounds,P_final,status\n");
}

#[test]
fn validate_exit_codes() {
    let dir = TempDir::new().unwrap();
    let strong = config(&dir, "strong.toml", "[validate]\n");
    assert_eq!(code(&polariton(&["validate", &strong, "--out", "v"], dir.path())), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("v/validation.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);

    let weak = config(&dir, "weak.toml", "[validate]\ng = 1.0\n");
    assert_eq!(code(&polariton(&["validate", &weak, "--out", "w"], dir.path())), 3);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("w/validation.json")).unwrap()).unwrap();
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.iter().any(|n| n.contains("leakage")));
    assert!(failed.iter().any(|n| n.contains("double occupancy")));

    let frozen = config(&dir, "frozen.toml", "[validate]\nhopping = 0.0\n");
    polariton(&["validate", &frozen, "--out", "z"], dir.path());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("z/validation.json")).unwrap()).unwrap();
    let leak = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "N=2 interconversion leakage").unwrap();
    assert_eq!(leak["value"].as_f64().unwrap(), 0.0);

    let big = config(&dir, "big.toml", "[validate]\nsizes = [5]\n");
    let out = polariton(&["validate", &big], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).starts_with("error[capacity]"));
}

#[test]
fn schedule_opt_round_trips_into_simulate() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "g.toml", "[graph]\nchain = 5\n[protocol]\nmax_rounds = 40\n");
    assert_eq!(code(&polariton(&["schedule-opt", &cfg, "--out", "o"], dir.path())), 0);
    let schedule = fs::read_to_string(dir.path().join("o/schedule.json")).unwrap();
    let cfg = config(&dir, "run.json", &format!(r#"{{"graph": {{"chain": 5}}, "schedule": {schedule}}}"#));
    let out = polariton(&["simulate", &cfg, "--out", "r"], dir.path());
    assert!(matches!(code(&out), 0 | 2), "{}", stderr(&out));
}

#[test]
fn plot_series() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "two.toml", TWO_SITES);
    polariton(&["simulate", &cfg, "--out", "run"], dir.path());
    let out = polariton(&["plot", "run/rounds.csv", "--x", "round", "--y", "P_k"], dir.path());
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("group,round,P_k\nP_k,1,"));
    let out = polariton(&["plot", "run/rounds.csv", "--x", "round", "--y", "missing"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("available: round, time"));
}
