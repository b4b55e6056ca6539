use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{DMatrix, SymmetricEigen};
use serde_json::{json, Value};

fn atlas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atlas"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

/// Runs `cmd` and returns the output directory.
fn run_ok(dir: &Path, cmd: &str, cfg: &Value, out: &str) -> PathBuf {
    let c = write_config(dir, &format!("{out}.json"), cfg);
    let o = dir.join(out);
    let r = atlas(&[
        cmd,
        "--config",
        c.to_str().unwrap(),
        "--out",
        o.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    o
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn constants() -> Value {
    json!({
        "domain": {"length": 1.0, "nodes": 101},
        "coefficients": {"kind": "constant", "betaValue": 2.0, "gammaValue": 1.0},
        "model": {"dI": 1.0, "dS": 1.0, "r0": 2.0},
        "scan": {"pointsPerDecade": 40}
    })
}

fn appendix_model(d_i: f64, d_s: f64) -> Value {
    json!({
        "domain": {"length": 1.0, "nodes": 201},
        "coefficients": {"kind": "cosine-perturbation", "k": 1.0, "m": 1, "cM": 1.0, "epsStartFraction": 0.4, "gammaRule": "beta-squared"},
        "model": {"dI": d_i, "dS": d_s, "r0": 0.98},
        "scan": {"pointsPerDecade": 100}
    })
}

#[test]
fn eigen_constants() {
    let t = tempfile::tempdir().unwrap();
    let o = run_ok(t.path(), "eigen", &constants(), "out");
    let e = read_json(&o.join("eigen.json"));
    assert!((e["r1"].as_f64().unwrap() - 2.0).abs() < 1e-10);
    let phi = fs::read_to_string(o.join("phi1.csv")).unwrap();
    assert!(phi.starts_with("x,value\n"));
    assert_eq!(phi.lines().count(), 102);
}

#[test]
fn eigen_cosine_perturbation_matches_dense_oracle() {
    let t = tempfile::tempdir().unwrap();
    let cfg = json!({
        "domain": {"length": 1.0, "nodes": 201},
        "coefficients": {"kind": "cosine-perturbation", "k": 1.0, "m": 1, "cM": 1.0, "eps": 0.2, "gammaRule": "beta-squared"},
        "model": {"dI": 0.15}
    });
    let o = run_ok(t.path(), "eigen", &cfg, "out");
    let r1 = read_json(&o.join("eigen.json"))["r1"].as_f64().unwrap();

    let n = 201;
    let h = 1.0 / (n - 1) as f64;
    let beta: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.2 * 2f64.sqrt() * (PI * i as f64 * h).cos())
        .collect();
    let w: Vec<f64> = (0..n)
        .map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h })
        .collect();
    let mut c = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let stiff = if i == 0 || i == n - 1 {
            1.0 / h
        } else {
            2.0 / h
        };
        c[(i, i)] = 0.15 * stiff + w[i] * beta[i] * beta[i];
        if i + 1 < n {
            c[(i, i + 1)] = -0.15 / h;
            c[(i + 1, i)] = -0.15 / h;
        }
    }
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] /= (w[i] * beta[i] * w[j] * beta[j]).sqrt();
        }
    }
    let mu = SymmetricEigen::new(c)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    assert!((r1 - 1.0 / mu).abs() < 1e-10 * r1, "{r1} vs {}", 1.0 / mu);
}

#[test]
fn classify_constants_single_root() {
    let t = tempfile::tempdir().unwrap();
    let o = run_ok(t.path(), "classify", &constants(), "out");
    let r = read_json(&o.join("roots.json"));
    assert_eq!(r["count"], 1);
    assert!((r["roots"][0]["l"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let prof = fs::read_to_string(o.join("root_0.csv")).unwrap();
    assert!(prof.starts_with("x,S,I\n"));
}

#[test]
fn manifest_digests_match_files_and_runs_are_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let a = run_ok(t.path(), "curve", &constants(), "a");
    let b = run_ok(t.path(), "curve", &constants(), "b");
    let ma = read_json(&a.join("manifest.json"));
    let files = ma["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let name = f["name"].as_str().unwrap();
        let (x, y) = (
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
        );
        assert_eq!(x, y, "{name} differs between runs");
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, x.len());
    }

    // The echoed config reproduces the same files.
    let c = a.join("manifest.json");
    let echo = write_config(t.path(), "echo.json", &ma["config"]);
    let o = t.path().join("c");
    assert!(atlas(&[
        "curve",
        "--config",
        echo.to_str().unwrap(),
        "--out",
        o.to_str().unwrap()
    ])
    .status
    .success());
    let mc = read_json(&o.join("manifest.json"));
    assert_eq!(read_json(&c)["files"], mc["files"]);
}

#[test]
fn existing_output_directory_is_replaced() {
    let t = tempfile::tempdir().unwrap();
    let o = t.path().join("out");
    fs::create_dir_all(&o).unwrap();
    fs::write(o.join("stale.txt"), "old").unwrap();
    run_ok(t.path(), "eigen", &constants(), "out");
    assert!(!o.join("stale.txt").exists());
    assert!(o.join("eigen.json").exists());
    let leftovers: Vec<_> = fs::read_dir(t.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".atlas"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn config_errors_exit_2_without_output() {
    let t = tempfile::tempdir().unwrap();
    let table = t.path().join("rates.csv");
    fs::write(&table, "x,beta,gamma\n0,1,1\n0.5,-1,1\n1,1,1\n").unwrap();
    let bad_table = json!({
        "domain": {"length": 1.0, "nodes": 51},
        "coefficients": {"kind": "table", "path": "rates.csv"},
        "model": {"dI": 1.0}
    });
    let mut both = constants();
    both["model"]["totalMass"] = json!(1.0);
    let mut unknown = constants();
    unknown["model"]["dX"] = json!(1.0);
    let mut no_r0 = constants();
    no_r0["model"].as_object_mut().unwrap().remove("r0");
    for (name, cfg, cmd) in [
        ("table", bad_table, "eigen"),
        ("both", both, "eigen"),
        ("unknown", unknown, "eigen"),
        ("nor0", no_r0, "classify"),
    ] {
        let c = write_config(t.path(), &format!("{name}.json"), &cfg);
        let o = t.path().join(name);
        let r = atlas(&[
            cmd,
            "--config",
            c.to_str().unwrap(),
            "--out",
            o.to_str().unwrap(),
        ]);
        assert_eq!(
            r.status.code(),
            Some(2),
            "{name}: {}",
            String::from_utf8_lossy(&r.stderr)
        );
        assert!(!String::from_utf8_lossy(&r.stderr).is_empty());
        assert!(!o.exists(), "{name}: partial output left behind");
    }
    let missing = atlas(&[
        "eigen",
        "--config",
        t.path().join("absent.json").to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_3() {
    let t = tempfile::tempdir().unwrap();
    let mut cfg = appendix_model(0.15, 1e-3);
    cfg["eigen"] = json!({"maxIter": 1, "rqTol": 1e-12, "vecTol": 1e-13});
    let c = write_config(t.path(), "cfg.json", &cfg);
    let r = atlas(&[
        "eigen",
        "--config",
        c.to_str().unwrap(),
        "--out",
        t.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(
        r.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
}

#[test]
fn table_coefficients_are_interpolated() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("rates.csv"), "x,beta,gamma\n0,2,1\n1,2,1\n").unwrap();
    let cfg = json!({
        "domain": {"length": 1.0, "nodes": 51},
        "coefficients": {"kind": "table", "path": "rates.csv"},
        "model": {"dI": 1.0}
    });
    let o = run_ok(t.path(), "eigen", &cfg, "out");
    assert!((read_json(&o.join("eigen.json"))["r1"].as_f64().unwrap() - 2.0).abs() < 1e-10);
}

#[test]
fn forward_curve_slope_changes_sign_twice() {
    let t = tempfile::tempdir().unwrap();
    let o = run_ok(t.path(), "curve", &appendix_model(0.15, 1e-5), "out");
    let text = fs::read_to_string(o.join("curve.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("l,N_dI,N_dIdS,slope,int_u,int_lv"));
    let slopes: Vec<f64> = lines
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    let changes = slopes
        .windows(2)
        .filter(|w| (w[0] > 0.0) != (w[1] > 0.0))
        .count();
    assert!(changes >= 2, "{changes}");
}

#[test]
fn backward_thresholds_below_one() {
    let t = tempfile::tempdir().unwrap();
    let o = run_ok(t.path(), "thresholds", &appendix_model(0.25, 1e-3), "out");
    let th = read_json(&o.join("thresholds.json"));
    assert!(th["r0Low"].as_f64().unwrap() < 1.0);
    assert!(th["d2Star"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_constants_reaches_unique_equilibrium() {
    let t = tempfile::tempdir().unwrap();
    let mut cfg = constants();
    cfg["simulation"] = json!({"tMax": 1e3, "dt0": 0.01, "initialData": {"kind": "small-infection", "fraction": 0.1}});
    cfg["output"] = json!({"directory": "unused", "stride": 10});
    let o = run_ok(t.path(), "simulate", &cfg, "out");
    let s = read_json(&o.join("steady.json"));
    assert_eq!(s["outcome"], "EE");
    assert_eq!(s["matchedRoot"]["index"], 0);
    assert!(s["matchedRoot"]["distance"].as_f64().unwrap() < 1e-5);
    let traj = fs::read_to_string(o.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,x,S,I\n"));
}

#[test]
fn appendix_and_profiles_emit_reports() {
    let t = tempfile::tempdir().unwrap();
    let o = run_ok(t.path(), "appendix", &appendix_model(0.25, 1e-3), "app");
    let reg = read_json(&o.join("regime.json"));
    assert_eq!(reg["regime"], "backward");
    assert_eq!(reg["cubicSignMatches"], true);
    assert_eq!(read_json(&o.join("expansion.json"))["bounded"], true);

    let mut cfg = appendix_model(0.25, 1e-3);
    cfg["profiles"] = json!({"dSValues": [4e-6, 2e-6, 1e-6]});
    let p = run_ok(t.path(), "profiles", &cfg, "prof");
    let prof = read_json(&p.join("profiles.json"));
    assert!(prof["branches"]["low"]["crossCheck"].as_f64().unwrap() < 1e-7);
    assert_eq!(read_json(&p.join("scaling.json"))["pass"], true);
    assert!(fs::read_to_string(p.join("high_profile.csv"))
        .unwrap()
        .starts_with("x,S,I\n"));
}
