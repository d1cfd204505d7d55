//! End-to-end tests of the installed binary: argument handling, exit codes,
//! written files, stderr diagnostics, and byte-level determinism.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netrecon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    let bytes = fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

/// Every regular file in `dir`, keyed by file name.
fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("out dir exists")
        .map(|entry| {
            let entry = entry.unwrap();
            let name = entry.file_name().into_string().unwrap();
            let bytes = fs::read(entry.path()).unwrap();
            (name, bytes)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Argument handling
// ---------------------------------------------------------------------------

#[test]
fn help_and_version_exit_zero() {
    let help = run(&["--help"]);
    assert_eq!(code(&help), 0);
    let text = stdout(&help);
    for subcommand in ["simulate", "analyze", "reconstruct", "probe", "demo"] {
        assert!(text.contains(subcommand), "help must mention {subcommand}");
    }
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["reconstruct", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    // No subcommand, unknown subcommand, missing required --config.
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["analyze"])), 1);
    assert_eq!(code(&run(&["demo"])), 1);
}

#[test]
fn nonexistent_config_exits_one() {
    let out = run(&["analyze", "--config", "/nonexistent/run.json"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("error:"), "stderr: {}", stderr(&out));
}

#[test]
fn malformed_config_reports_path_and_line() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("broken.json");
    fs::write(&cfg, "{\n  \"model\": { \"preset\": \"glv\" },\n  \"input\": oops\n}").unwrap();
    let out = run(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("parse error at"), "stderr: {err}");
    assert!(
        err.contains(&format!("{}:3", cfg.display())),
        "stderr must name line 3: {err}"
    );
}

#[test]
fn unknown_demo_exits_one_and_lists_names() {
    let out = run(&["demo", "no-such-demo"]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("unknown demo"), "stderr: {err}");
    for name in ["five-species-community", "sign-recovery", "coverage-instability"] {
        assert!(err.contains(name), "listing must include {name}: {err}");
    }
}

#[test]
fn out_of_range_tolerance_flag_exits_one() {
    let dir = tempdir().unwrap();
    let out = run(&[
        "demo",
        "steady-state-analysis",
        "--out",
        dir.path().to_str().unwrap(),
        "--tol-rank",
        "1.5",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("tolerance"), "stderr: {}", stderr(&out));
}

#[test]
fn missing_out_dir_is_a_usage_error() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{
            "model": { "preset": "glv", "interaction": [[-1.0, -0.5], [-0.5, -1.0]], "growth": [1.5, 1.5] },
            "input": { "simulate": { "x0": [1.0, 1.0], "horizon": 1.0, "step": 0.01 } }
        }"#,
    )
    .unwrap();
    let without = run(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&without), 1);
    assert!(
        stderr(&without).contains("output directory"),
        "stderr: {}",
        stderr(&without)
    );
    let out_dir = dir.path().join("reports");
    let with = run(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&with), 0, "stderr: {}", stderr(&with));
    assert!(out_dir.join("analysis-report.json").exists());
}

// ---------------------------------------------------------------------------
// Exit-code contract on real runs
// ---------------------------------------------------------------------------

#[test]
fn unique_reconstruction_exits_zero_and_writes_reports() {
    let dir = tempdir().unwrap();
    let out = run(&[
        "demo",
        "sign-recovery",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let text = stdout(&out);
    let report_path = dir.path().join("reconstruction-report.json");
    let config_path = dir.path().join("sign-recovery.config.json");
    for path in [&report_path, &config_path] {
        assert!(path.exists(), "missing {}", path.display());
        assert!(
            text.contains(&format!("wrote {}", path.display())),
            "stdout must announce {}: {text}",
            path.display()
        );
    }

    let report = read_json(&report_path);
    assert_eq!(report["command"], "reconstruct");
    assert_eq!(report["status"], "unique");
    assert_eq!(report["assembled"]["kind"], "sign");
}

#[test]
fn ambiguous_reconstruction_exits_two() {
    let dir = tempdir().unwrap();
    let out = run(&[
        "demo",
        "confounded-pair",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "stderr: {}", stderr(&out));
    let report = read_json(&dir.path().join("reconstruction-report.json"));
    assert_eq!(report["status"], "ambiguous");
    for node in report["nodes"].as_array().unwrap() {
        assert_eq!(node["witnesses"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn infeasible_prior_exits_three() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    // No candidate row is consistent with the steady-state data, so every
    // node reports a data/prior inconsistency.
    fs::write(
        &cfg,
        r#"{
            "model": { "preset": "glv", "interaction": [[-1.0, -0.5], [-0.5, -1.0]], "growth": [1.5, 1.5] },
            "input": { "simulate": { "x0": [1.0, 1.0], "horizon": 5.0, "step": 0.001 } },
            "property": "sign",
            "prior": {
                "kind": "discrete",
                "candidates": [
                    [[3.0, 3.0], [2.0, 2.0]],
                    [[3.0, 3.0], [2.0, 2.0]]
                ]
            }
        }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("reports");
    let out = run(&[
        "reconstruct",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));
    let report = read_json(&out_dir.join("reconstruction-report.json"));
    assert_eq!(report["status"], "inconsistent");
}

// ---------------------------------------------------------------------------
// Flag overrides and config round trips
// ---------------------------------------------------------------------------

#[test]
fn seed_and_tolerance_overrides_reach_the_report() {
    let dir = tempdir().unwrap();
    let out = run(&[
        "demo",
        "steady-state-analysis",
        "--out",
        dir.path().to_str().unwrap(),
        "--seed",
        "7",
        "--tol-rank",
        "0.001",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let report = read_json(&dir.path().join("analysis-report.json"));
    assert_eq!(report["seed"], 7);
    assert_eq!(report["tolerances"]["rank"], 0.001);
    // The effective config carries the overrides too.
    let cfg = read_json(&dir.path().join("steady-state-analysis.config.json"));
    assert_eq!(cfg["seed"], 7);
    assert_eq!(cfg["tolerances"]["rank"], 0.001);
}

#[test]
fn demo_effective_config_reproduces_the_report() {
    // The config a demo writes next to its reports is a complete, runnable
    // document: feeding it back through the ordinary command produces a
    // byte-identical report.
    let first = tempdir().unwrap();
    let out = run(&[
        "demo",
        "sign-recovery",
        "--out",
        first.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let second = tempdir().unwrap();
    let replay = run(&[
        "reconstruct",
        "--config",
        first.path().join("sign-recovery.config.json").to_str().unwrap(),
        "--out",
        second.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&replay), 0, "stderr: {}", stderr(&replay));

    let a = fs::read(first.path().join("reconstruction-report.json")).unwrap();
    let b = fs::read(second.path().join("reconstruction-report.json")).unwrap();
    assert_eq!(a, b, "replayed report differs from the demo report");
}

#[test]
fn demo_reruns_are_byte_identical() {
    for name in ["sign-recovery", "coverage-instability"] {
        let first = tempdir().unwrap();
        let second = tempdir().unwrap();
        for dir in [&first, &second] {
            let out = run(&["demo", name, "--out", dir.path().to_str().unwrap()]);
            assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
        }
        let a = dir_contents(first.path());
        let b = dir_contents(second.path());
        assert_eq!(
            a.keys().collect::<Vec<_>>(),
            b.keys().collect::<Vec<_>>(),
            "demo {name}: different file sets"
        );
        for (file, bytes) in &a {
            if file.ends_with(".config.json") {
                // The effective config records the out directory, which is
                // deliberately different between the two runs.
                continue;
            }
            assert_eq!(
                bytes, &b[file],
                "demo {name}: {file} differs between identical runs"
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Trajectory files through the binary
// ---------------------------------------------------------------------------

#[test]
fn simulated_trajectory_feeds_a_measured_analysis() {
    let sim_dir = tempdir().unwrap();
    let out = run(&[
        "demo",
        "five-species-community",
        "--out",
        sim_dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let traj = sim_dir.path().join("trajectory.csv");
    assert!(traj.exists());

    let cfg_dir = tempdir().unwrap();
    let cfg = cfg_dir.path().join("measured.json");
    fs::write(
        &cfg,
        format!(
            r#"{{
                "model": {{ "preset": "glv" }},
                "input": {{ "trajectory": {:?} }}
            }}"#,
            traj.to_str().unwrap()
        ),
    )
    .unwrap();
    let out_dir = cfg_dir.path().join("reports");
    let analyze = run(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&analyze), 0, "stderr: {}", stderr(&analyze));
    let report = read_json(&out_dir.join("analysis-report.json"));
    assert_eq!(report["nodes"].as_array().unwrap().len(), 5);
}

#[test]
fn measured_file_without_derivatives_is_differentiated() {
    let dir = tempdir().unwrap();
    let traj = dir.path().join("measured.csv");
    // Uniform grid, no dx columns: the run estimates derivatives itself.
    let mut text = String::from("t,x1,u1\n");
    for k in 0..50 {
        let t = 0.1 * k as f64;
        text.push_str(&format!("{t},{},0\n", (-0.5 * t).exp()));
    }
    fs::write(&traj, text).unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        format!(
            r#"{{
                "model": {{ "preset": "linear" }},
                "input": {{ "trajectory": {:?} }}
            }}"#,
            traj.to_str().unwrap()
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("reports");
    let out = run(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let report = read_json(&out_dir.join("analysis-report.json"));
    let nodes = report["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 1);
    assert_eq!(nodes[0]["pe"], true, "a decaying exponential excites n = 1");
}

#[test]
fn malformed_trajectory_reports_path_and_line() {
    let dir = tempdir().unwrap();
    let traj = dir.path().join("measured.csv");
    fs::write(&traj, "t,x1,u1\n0,1,0\n0.1,oops,0\n").unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        format!(
            r#"{{
                "model": {{ "preset": "linear" }},
                "input": {{ "trajectory": {:?} }}
            }}"#,
            traj.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = run(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("reports").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("parse error at"), "stderr: {err}");
    assert!(
        err.contains(&format!("{}:3", traj.display())),
        "stderr must name line 3: {err}"
    );
}
