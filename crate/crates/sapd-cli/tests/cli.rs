//! End-to-end contracts of the command-line front end: exit codes, file
//! formats, determinism of generated datasets, and flag/config precedence.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sapd")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sapd-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn sapd")
}

fn path_str(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn gen_is_deterministic_and_rejects_odd_n() {
    let dir = tmp_dir("gen");
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    for (path, _) in [(&a, ()), (&b, ())] {
        let out = run(&[
            "gen", "--n", "20", "--sectors", "3", "--seed", "42", "--out-data",
            &path_str(path),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let out = run(&["gen", "--n", "7", "--out-data", &path_str(&dir.join("odd.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("even"), "message should mention the parity requirement: {msg}");
}

#[test]
fn gen_full_scale_has_half_as_many_sample_rows() {
    let dir = tmp_dir("gen800");
    let data = dir.join("returns800.csv");
    let out = run(&[
        "gen", "--n", "800", "--sectors", "10", "--seed", "1", "--out-data",
        &path_str(&data),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&data).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(header.split(',').count(), 800);
    assert_eq!(lines.filter(|l| !l.trim().is_empty()).count(), 400);
}

#[test]
fn wide_returns_file_parses_with_expected_dims() {
    // Shaped like the larger weekly-returns datasets: 596 periods, 82 assets.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let dir = tmp_dir("wide");
    let path = dir.join("wide.csv");
    let mut text = (1..=82).map(|i| format!("T{i}")).collect::<Vec<_>>().join(",");
    text.push('\n');
    for _ in 0..596 {
        let row: Vec<String> = (0..82)
            .map(|_| format!("{:.6}", rng.random_range(-0.05..0.05)))
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();
    let ds = sapd::portfolio::load_returns_csv(&path).unwrap();
    assert_eq!(ds.returns.nrows(), 596);
    assert_eq!(ds.returns.ncols(), 82);
}

#[test]
fn solve_rejects_incompatible_solver_problem_pairs() {
    let dir = tmp_dir("compat");
    let out = run(&[
        "solve", "--problem", "toy-saddle", "--solver", "multisol", "--iters", "10",
        "--out-trace", &path_str(&dir.join("t.csv")),
        "--out-summary", &path_str(&dir.join("s.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_missing_data_file_is_a_data_error() {
    let dir = tmp_dir("nodata");
    let out = run(&[
        "solve", "--problem", "portfolio-csv", "--solver", "aware", "--iters", "10",
        "--data", &path_str(&dir.join("missing.csv")),
        "--out-trace", &path_str(&dir.join("t.csv")),
        "--out-summary", &path_str(&dir.join("s.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn compare_joins_traces_and_names_missing_files() {
    let dir = tmp_dir("compare");
    for (solver, name) in [("naive", "n.csv"), ("aware", "a.csv")] {
        let out = run(&[
            "solve", "--problem", "toy-saddle", "--solver", solver, "--iters", "50",
            "--out-trace", &path_str(&dir.join(name)),
            "--out-summary", &path_str(&dir.join(format!("{name}.json"))),
        ]);
        assert!(out.status.success());
    }
    let joined = dir.join("cmp.csv");
    let out = run(&[
        "compare",
        &format!("naive={}", path_str(&dir.join("n.csv"))),
        &format!("aware={}", path_str(&dir.join("a.csv"))),
        "--out",
        &path_str(&joined),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&joined).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.contains("subopt_naive") && header.contains("subopt_aware"));
    assert_eq!(lines.filter(|l| !l.trim().is_empty()).count(), 50);

    let missing = path_str(&dir.join("ghost.csv"));
    let out = run(&[
        "compare",
        &format!("naive={}", path_str(&dir.join("n.csv"))),
        &format!("ghost={missing}"),
        "--out",
        &path_str(&dir.join("cmp2.csv")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ghost.csv"));
}

#[test]
fn compare_rejects_mismatched_grids() {
    let dir = tmp_dir("grids");
    for (iters, name) in [("50", "x.csv"), ("60", "y.csv")] {
        let out = run(&[
            "solve", "--problem", "toy-saddle", "--solver", "aware", "--iters", iters,
            "--out-trace", &path_str(&dir.join(name)),
            "--out-summary", &path_str(&dir.join(format!("{name}.json"))),
        ]);
        assert!(out.status.success());
    }
    let out = run(&[
        "compare",
        &format!("x={}", path_str(&dir.join("x.csv"))),
        &format!("y={}", path_str(&dir.join("y.csv"))),
        "--out",
        &path_str(&dir.join("cmp.csv")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn flags_override_config_file() {
    let dir = tmp_dir("override");
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"problem": "toy-saddle", "solver": "aware", "iters": 5}"#).unwrap();
    let trace = dir.join("t.csv");
    let out = run(&[
        "solve", "--config", &path_str(&cfg), "--iters", "9",
        "--out-trace", &path_str(&trace),
        "--out-summary", &path_str(&dir.join("s.json")),
    ]);
    assert!(out.status.success());
    let rows = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .count();
    assert_eq!(rows, 9, "flag must override the config file's iters");

    // Unknown config keys are configuration errors.
    std::fs::write(&cfg, r#"{"probelm": "toy-saddle"}"#).unwrap();
    let out = run(&[
        "solve", "--config", &path_str(&cfg),
        "--out-trace", &path_str(&trace),
        "--out-summary", &path_str(&dir.join("s.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn summary_echoes_defaults() {
    let dir = tmp_dir("echo");
    let summary = dir.join("s.json");
    let out = run(&[
        "solve", "--problem", "portfolio-synthetic", "--solver", "aware", "--iters", "20",
        "--n", "10", "--sectors", "2",
        "--out-trace", &path_str(&dir.join("t.csv")),
        "--out-summary", &path_str(&summary),
    ]);
    assert!(out.status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(parsed["config.v"], serde_json::json!(0.4));
    assert_eq!(parsed["config.kappa"], serde_json::json!(0.1));
    assert_eq!(parsed["config.seed"], serde_json::json!(42));
    assert!(parsed.get("final.subopt").is_some());
    assert!(parsed.get("reference.provenance").is_some());

    // With no instance flags at all, the defaults (v = 0.4, kappa = 0.1,
    // 10 sectors) still land in the summary.
    let summary2 = dir.join("s2.json");
    let out = run(&[
        "solve", "--problem", "toy-saddle", "--solver", "aware", "--iters", "10",
        "--out-trace", &path_str(&dir.join("t2.csv")),
        "--out-summary", &path_str(&summary2),
    ]);
    assert!(out.status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary2).unwrap()).unwrap();
    assert_eq!(parsed["config.v"], serde_json::json!(0.4));
    assert_eq!(parsed["config.kappa"], serde_json::json!(0.1));
    assert_eq!(parsed["config.sectors"], serde_json::json!(10));
}

#[test]
fn reference_verb_writes_and_caches() {
    let dir = tmp_dir("reference");
    let out_path = dir.join("ref.json");
    let cache = dir.join("cache");
    let out = run(&[
        "reference", "--problem", "portfolio-synthetic", "--n", "10", "--sectors", "2",
        "--seed", "5", "--cache-dir", &path_str(&cache),
        "--out", &path_str(&out_path),
    ]);
    assert!(out.status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(parsed["provenance"], "long-run");
    assert!(parsed["f_star"].is_number());
    // One cached entry appears.
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 1);
}
