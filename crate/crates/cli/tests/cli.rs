use std::process::Command;

fn gdnls(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_gdnls"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s).expect("stdout is JSON")
}

#[test]
fn z0_root() {
    let (code, out, _) = gdnls(&["--json", "criterion", "z0", "--sigma", "1.2"]);
    assert_eq!(code, 0);
    let z0 = json(&out)["z0"].as_f64().unwrap();
    assert!((z0 - 0.7181482072673229).abs() < 1e-9);
}

#[test]
fn classify_prints_plain_text() {
    let (code, out, _) = gdnls(&[
        "criterion", "classify", "--sigma", "1.2", "--omega", "1", "--c", "-0.5",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("classification: Stable"), "{out}");
}

#[test]
fn infeasible_pair_exits_2() {
    let (code, out, _) = gdnls(&[
        "--json", "criterion", "feasibility", "--sigma", "1.2", "--omega1", "4", "--c1", "-1",
        "--omega2", "4.4", "--c2", "0.5",
    ]);
    assert_eq!(code, 2);
    assert_eq!(json(&out)["feasible"], false);
}

#[test]
fn soliton_reference_invariants() {
    let (code, out, _) = gdnls(&[
        "--json", "soliton", "--sigma", "1", "--omega", "1", "--c", "0", "--n", "4096",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!((v["conserved"]["mass"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-10);
    assert!(v["stationary_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn outside_cone_is_a_numeric_error() {
    let (code, _, err) = gdnls(&["soliton", "--sigma", "1", "--omega", "1", "--c", "3"]);
    assert_eq!(code, 3);
    assert!(err.contains("cone"), "{err}");
}

#[test]
fn sweep_writes_csv() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("sweep.csv");
    let (code, _, _) = gdnls(&[
        "criterion", "sweep", "--sigmas", "1.2,1.8", "--ratios", "-1,0,1",
        "--out", p.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn experiment_audit_modulate_roundtrip() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    std::fs::write(
        &cfg,
        r#"
scenario = "two_soliton"
sigma = 1.2
delta = 1e-4
seed = 3

[grid]
n = 2048
l_dom = 80.0

[time]
dt = 1e-3
t_end = 0.2
sample_every = 50

[[waves]]
omega = 4.0
c = -1.0
x = -12.0

[[waves]]
omega = 4.4
c = 1.0
x = 12.0
"#,
    )
    .unwrap();
    let run = d.path().join("run");
    let (code, out, err) = gdnls(&[
        "--json", "experiment", "--config", cfg.to_str().unwrap(),
        "--out", run.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(json(&out)["status"], "ok");
    for f in ["manifest.json", "params.csv", "functionals.csv", "u_final.bin"] {
        assert!(run.join(f).exists(), "{f}");
    }

    let audit = d.path().join("audit.json");
    let (code, out, err) = gdnls(&[
        "--json", "audit", "--trace", run.to_str().unwrap(),
        "--out", audit.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(json(&out)["worst_ratio"].is_array());
    assert!(audit.exists());

    let snap = run.join("u_final.bin");
    let (code, out, err) = gdnls(&[
        "--json", "modulate", "--snapshot", snap.to_str().unwrap(),
        "--guess", "4,4.4,-1,1,-12.2,12.2,0.8,0.88",
    ]);
    assert_eq!(code, 0, "{err}");
    let q = json(&out)["q"].as_array().unwrap().clone();
    assert!((q[4].as_f64().unwrap() + 12.2).abs() < 1e-2);
}

#[test]
fn bad_config_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.toml");
    std::fs::write(&cfg, "scenario = \"two_soliton\"\n").unwrap();
    let (code, _, err) = gdnls(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn zero_threads_rejected() {
    let (code, _, _) = gdnls(&["--threads", "0", "criterion", "z0", "--sigma", "1.2"]);
    assert_eq!(code, 2);
}
