// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

use std::path::{Path, PathBuf};
use std::process::Command;

use graphon_games::harness::cli::{run, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK};

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = run(std::iter::once("graphon-games").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

const SMALL: &str = r#"
[graphon]
type = "sbm"
q = [[0.8, 0.2], [0.2, 0.4]]
pi = [0.5, 0.5]

[game]
type = "lq_sbm"
theta1 = 1.0
strategy_set = [0.0, 10.0]
xi_lower = [0.01, 0.01]
xi_upper = [1.2, 1.2]

[experiment]
eta_true = [0.5, 0.7]
n_list = [60, 120]
runs_per_n = 4
master_seed = 17
"#;

#[test]
fn validate_shipped_configs() {
    for name in ["sbm_fig1.toml", "constant_homogeneous.toml"] {
        let path = repo_config(name);
        let (code, out) = cli(&["--config", path.to_str().unwrap(), "validate"]);
        assert_eq!(code, EXIT_OK, "{name}");
        assert!(out.ends_with("ok\n"));
    }
}

#[test]
fn exported_equilibrium_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let config = repo_config("sbm_fig1.toml");
    let obs = dir.path().join("truth.observation");
    let (code, _) = cli(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        obs.to_str().unwrap(),
        "solve",
        "--grid",
        "400",
    ]);
    assert_eq!(code, EXIT_OK);
    let (code, out) = cli(&[
        "--config",
        config.to_str().unwrap(),
        "estimate",
        "--observation",
        obs.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    let line = out.lines().find(|l| l.starts_with("eta_hat = ")).unwrap();
    let eta: Vec<f64> = line["eta_hat = ".len()..].split(',').map(|t| t.parse().unwrap()).collect();
    for (a, b) in eta.iter().zip([0.8, 0.6, 1.0, 0.8]) {
        assert!((a - b).abs() <= 1e-6, "{eta:?}");
    }
}

#[test]
fn constant_graphon_diagnosis() {
    let config = repo_config("constant_homogeneous.toml");
    let (code, out) = cli(&["--config", config.to_str().unwrap(), "diagnose"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().next(), Some("non-identifiable"));
    // γ = c η₁ / (1 − η₂ c) with c = 0.5, η = (0.5, 0.8)
    let gamma: f64 = out.lines().find_map(|l| l.strip_prefix("gamma = ")).unwrap().parse().unwrap();
    assert!((gamma - 0.25 / 0.6).abs() < 1e-14);
}

#[test]
fn block_model_diagnosis_has_no_violations() {
    let config = repo_config("sbm_fig1.toml");
    let (code, out) = cli(&["--config", config.to_str().unwrap(), "diagnose", "--samples", "30"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().next(), Some("identifiable"));
    assert!(out.contains("violations = 0 / 31"));
}

#[test]
fn sample_writes_network_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let prefix = dir.path().join("net");
    let (code, out) = cli(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        prefix.to_str().unwrap(),
        "sample",
        "--n",
        "30",
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("nodes = 30"));
    let labels = std::fs::read_to_string(dir.path().join("net.labels")).unwrap();
    assert_eq!(labels.lines().count(), 30);
    let obs = std::fs::read_to_string(dir.path().join("net.observation")).unwrap();
    assert_eq!(obs.lines().count(), 30);
    let edges = std::fs::read_to_string(dir.path().join("net.edges")).unwrap();
    for line in edges.lines() {
        let v: Vec<usize> = line.split(' ').map(|t| t.parse().unwrap()).collect();
        assert!(v[0] < v[1] && v[1] < 30);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["validate"]).0, EXIT_CONFIG);
    let missing = dir.path().join("none.toml");
    assert_eq!(cli(&["--config", missing.to_str().unwrap(), "validate"]).0, EXIT_CONFIG);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, SMALL.replace("eta_true = [0.5, 0.7]", "eta_true = [5.0, 0.7]")).unwrap();
    assert_eq!(cli(&["--config", bad.to_str().unwrap(), "validate"]).0, EXIT_CONFIG);
    let good = dir.path().join("small.toml");
    std::fs::write(&good, SMALL).unwrap();
    // outside the spectral condition of the two-block operator
    let (code, _) = cli(&["--config", good.to_str().unwrap(), "solve", "--eta", "3.0,0.5"]);
    assert_eq!(code, EXIT_NUMERICAL);
    assert_eq!(cli(&["--config", good.to_str().unwrap(), "frobnicate"]).0, EXIT_CONFIG);
}

#[test]
fn experiment_is_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4", "4"] {
        let out = dir.path().join(format!("run{}.csv", outputs.len()));
        let (code, _) = cli(&[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "experiment",
            "--threads",
            threads,
        ]);
        assert_eq!(code, EXIT_OK);
        let csv = std::fs::read(&out).unwrap();
        let summary = std::fs::read(out.with_extension("quantiles.csv")).unwrap();
        outputs.push((csv, summary));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let text = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);
}

#[test]
fn seed_flag_changes_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let a = cli(&["--config", cfg.to_str().unwrap(), "--seed", "1", "estimate", "--n", "80"]);
    let b = cli(&["--config", cfg.to_str().unwrap(), "--seed", "2", "estimate", "--n", "80"]);
    let c = cli(&["--config", cfg.to_str().unwrap(), "--seed", "1", "estimate", "--n", "80"]);
    assert_eq!(a.0, EXIT_OK);
    assert_ne!(a.1, b.1);
    assert_eq!(a.1, c.1);
}

#[test]
fn binary_reports_exit_status() {
    let exe = env!("CARGO_BIN_EXE_graphon-games");
    let config = repo_config("sbm_fig1.toml");
    let status = Command::new(exe)
        .args(["--config", config.to_str().unwrap(), "validate"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK));
    let status = Command::new(exe).arg("validate").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_CONFIG));
}
