use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const PARAMS: [&str; 6] = ["--px", "1/3", "--pz", "2/3", "--py", "1/6,1/2,1/3,5/6"];

fn vstruct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vstruct"))
        .args(args)
        .env_remove("VSTRUCT_WORKERS")
        .output()
        .expect("binary runs")
}

fn with_params<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter()
        .chain(PARAMS.iter())
        .chain(tail)
        .copied()
        .collect()
}

fn ok_json(args: &[&str]) -> Value {
    let out = vstruct(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn close(v: &Value, expect: f64, tol: f64) {
    let got = v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"));
    assert!((got - expect).abs() <= tol, "{got} vs {expect}");
}

#[test]
fn analytic_random_example() {
    let v = ok_json(&with_params(
        &["analytic", "--regime", "random"],
        &["--n", "100"],
    ));
    close(&v["result"]["sqrt_cov_rm"], 0.0915308, 2e-7);
    assert_eq!(v["manifest"]["subcommand"], "analytic");
    assert_eq!(v["manifest"]["methods"][0], "analytic:large-sample");
}

#[test]
fn analytic_fixed_example() {
    let v = ok_json(&[
        "analytic",
        "--regime",
        "fixed",
        "--n0",
        "66",
        "--n1",
        "33",
        "--pz",
        "2/3",
        "--py",
        "1/6,1/2,1/3,5/6",
    ]);
    let r = &v["result"];
    close(&r["sqrt_var_r"], 0.101660, 2e-6);
    close(&r["sqrt_var_m"], 0.092132, 2e-6);
    close(&r["sqrt_cov_rm"], 0.091321, 2e-6);
    close(&r["combine"]["alpha_star"], 0.069409, 2e-6);
}

#[test]
fn explain_lists_terms() {
    let v = ok_json(&with_params(&["analytic", "--explain"], &["--n", "50"]));
    let terms = v["result"]["explain"]["closed_form_terms_times_n"]
        .as_array()
        .unwrap();
    let sum: f64 = terms.iter().map(|t| t["value"].as_f64().unwrap()).sum();
    close(
        &Value::from(sum / 50.0),
        v["result"]["cov_rm"].as_f64().unwrap(),
        1e-15,
    );
}

#[test]
fn domain_error_names_the_flag() {
    let out = vstruct(&[
        "analytic",
        "--px",
        "0",
        "--pz",
        "2/3",
        "--py",
        "1/6,1/2,1/3,5/6",
        "--n",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("px"));
    let bad_py = vstruct(&[
        "analytic", "--px", "1/3", "--pz", "2/3", "--py", "1/6,1/2", "--n", "10",
    ]);
    assert_eq!(bad_py.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_py.stderr).contains("py"));
}

#[test]
fn usage_error_exits_two() {
    assert_eq!(
        vstruct(&["analytic", "--no-such-flag"]).status.code(),
        Some(2)
    );
    assert_eq!(vstruct(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn mixture_example() {
    let v = ok_json(&with_params(&["mixture"], &["--n", "100"]));
    let r = &v["result"];
    close(&r["sqrt_var_r"], 0.1019324, 2e-7);
    close(&r["sqrt_var_m"], 0.0924017, 2e-7);
    close(&r["combine"]["alpha_star"], 0.0737371, 1e-6);
    close(&r["combine"]["sqrt_var_p_star"], 0.0923378, 2e-7);
}

#[test]
fn rational_mixture_matches_rational_enumeration() {
    let m = ok_json(&with_params(
        &["mixture", "--family", "exact", "--rational"],
        &["--n", "6"],
    ));
    let e = ok_json(&with_params(&["enumerate", "--rational"], &["--n", "6"]));
    assert_eq!(m["result"]["rational"], e["result"]["rational"]);
    let refused = vstruct(&with_params(&["mixture", "--rational"], &["--n", "6"]));
    assert_eq!(refused.status.code(), Some(2));
}

#[test]
fn enumeration_cap_is_an_error() {
    let out = vstruct(&with_params(&["enumerate"], &["--n", "40"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
}

#[test]
fn simulate_is_identical_across_workers_and_runs() {
    let run = |w: &str| {
        let out = vstruct(&with_params(
            &["--workers", w, "simulate"],
            &[
                "--n",
                "100",
                "--reps",
                "50000",
                "--seed",
                "42",
                "--chunk-size",
                "4096",
            ],
        ));
        assert!(out.status.success());
        out.stdout
    };
    let one = run("1");
    assert_eq!(one, run("1"));
    assert_eq!(one, run("2"));
    assert_eq!(one, run("8"));
}

#[test]
fn workers_env_is_a_default() {
    let out = Command::new(env!("CARGO_BIN_EXE_vstruct"))
        .args(with_params(&["simulate"], &["--n", "20", "--reps", "1000"]))
        .env("VSTRUCT_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("workers"));
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn replay_reproduces_artifact_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.json");
    let out_s = out.to_str().unwrap();
    let first = vstruct(&with_params(
        &["--workers", "3", "-o", out_s, "simulate"],
        &["--n", "30", "--reps", "20000", "--seed", "7"],
    ));
    assert!(first.status.success());
    let sidecar = dir.path().join("sim.json.manifest.json");
    let manifest: Value = serde_json::from_slice(&read(&sidecar)).unwrap();
    assert!(manifest["timestamp"].is_u64());
    assert_eq!(manifest["seed"], 7);

    for source in [&sidecar, &out] {
        let again = vstruct(&["replay", source.to_str().unwrap()]);
        assert!(again.status.success());
        assert_eq!(again.stdout, read(&out), "replay of {}", source.display());
    }
}

#[test]
fn replay_of_csv_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let args = [
        "-o",
        csv.to_str().unwrap(),
        "sweep",
        "--n",
        "30",
        "--px-from",
        "0.2",
        "--px-to",
        "0.8",
        "--px-steps",
        "3",
        "--c-full-range",
        "--c-steps",
        "3",
        "--q0",
        "1/3",
        "--q1",
        "2/3",
        "--pz",
        "2/3",
    ];
    assert!(vstruct(&args).status.success());
    let text = String::from_utf8(read(&csv)).unwrap();
    assert_eq!(text.lines().count(), 1 + 9);
    assert!(text.starts_with("regime,n,n0,n1,px_or_xi"));
    let again = vstruct(&[
        "replay",
        dir.path().join("sweep.csv.manifest.json").to_str().unwrap(),
    ]);
    assert_eq!(again.stdout, read(&csv));
}

#[test]
fn config_file_fills_missing_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "px = \"1/3\"\npz = \"2/3\"\npy0 = \"1/6\"\npy1 = \"1/2\"\npy2 = \"1/3\"\npy3 = \"5/6\"\nn = 100\nn0 = 66\nn1 = 33\ndesign = \"random\"\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let v = ok_json(&["--config", c, "analytic"]);
    close(&v["result"]["sqrt_cov_rm"], 0.0915308, 2e-7);
    // the command line wins
    let v = ok_json(&["--config", c, "analytic", "--regime", "fixed", "--n", "99"]);
    close(&v["result"]["sqrt_cov_rm"], 0.091321, 2e-6);
    // keys other subcommands take are ignored
    let v = ok_json(&["--config", c, "mixture", "--n", "100"]);
    close(&v["result"]["sqrt_var_r"], 0.1019324, 2e-7);
    // the manifest records the expanded command line, without --config
    let args: Vec<String> = serde_json::from_value(v["manifest"]["args"].clone()).unwrap();
    assert!(!args.iter().any(|a| a == "--config"));
    assert!(args.iter().any(|a| a == "--py"));
}

#[test]
fn sweep_rejects_analytic_random() {
    let out = vstruct(&[
        "sweep",
        "--n",
        "10",
        "--px-from",
        "0.2",
        "--px-to",
        "0.8",
        "--c-from",
        "0",
        "--c-to",
        "0",
        "--c-steps",
        "1",
        "--q0",
        "1/3",
        "--q1",
        "2/3",
        "--pz",
        "2/3",
        "--method",
        "analytic",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_small_grid_passes() {
    let out = vstruct(&[
        "verify",
        "--nmax",
        "4",
        "--arm-max",
        "2",
        "--mixture-nmax",
        "4",
        "--grid-size",
        "3",
        "--golden",
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("result: PASS"));
    assert!(text.contains("E7"));
}

#[test]
fn verify_failure_exits_one() {
    // independent f64 paths do not all agree to the last bit
    let out = vstruct(&[
        "verify",
        "--nmax",
        "6",
        "--arm-max",
        "3",
        "--mixture-nmax",
        "6",
        "--grid-size",
        "2",
        "--tol",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("result: FAIL"));
}
