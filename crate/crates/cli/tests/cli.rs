use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_torus-gutzwiller"))
}

fn run(cmd: &str, config: &str, dir: &Path, threads: Option<&str>) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    let mut c = Command::new(bin());
    c.arg(cmd).arg("--config").arg(&cfg).arg("--out").arg(dir.join("out")).env_remove("TG_THREADS");
    if let Some(t) = threads {
        c.arg("--threads").arg(t);
    }
    c.output().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn error_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).expect("stderr is JSON")
}

#[test]
fn harper_spectrum_has_n_rows() {
    let d = tempfile::tempdir().unwrap();
    let o = run("spectrum", r#"{"model": {"kind": "harper"}, "N_list": [4]}"#, d.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(d.path(), "spectrum_N4.csv");
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(csv.lines().next().unwrap(), "index,eigenvalue,multiplicity_group");
}

#[test]
fn kinetic_spectrum_values() {
    let d = tempfile::tempdir().unwrap();
    let o = run("spectrum", r#"{"model": {"kind": "kinetic_cos"}, "N_list": [4]}"#, d.path(), None);
    assert!(o.status.success());
    let vals: Vec<f64> = read(d.path(), "spectrum_N4.csv")
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for (v, want) in vals.iter().zip([0.0, 2.0, 2.0, 4.0]) {
        assert!((v - want).abs() < 1e-12, "{vals:?}");
    }
    let summary: Value = serde_json::from_str(&read(d.path(), "spectrum_summary.json")).unwrap();
    assert_eq!(summary[0]["degeneracy_histogram"]["2"], 1);
}

#[test]
fn missing_model_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = run("spectrum", r#"{"N_list": [4]}"#, d.path(), None);
    assert_eq!(o.status.code(), Some(2));
    let e = error_json(&o);
    assert_eq!(e["error"], "usage");
    assert!(e["message"].as_str().unwrap().contains("model"));
}

#[test]
fn bad_n_list_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = run("spectrum", r#"{"model": {"kind": "harper"}, "N_list": [1]}"#, d.path(), None);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"], "usage");
}

#[test]
fn orbits_by_energy_sign() {
    let d = tempfile::tempdir().unwrap();
    let o = run("orbits", r#"{"model": {"kind": "harper"}, "N_list": [64], "energies": [1.0, -1.0]}"#, d.path(), None);
    assert!(o.status.success());
    for (i, sigma) in [(0, 2), (1, -2)] {
        let v: Value = serde_json::from_str(&read(d.path(), &format!("orbits_E{i}.json"))).unwrap();
        assert_eq!(v["orbits"].as_array().unwrap().len(), 1);
        assert_eq!(v["orbits"][0]["maslov"], sigma);
    }
}

#[test]
fn orbits_refuse_saddle_energy() {
    let d = tempfile::tempdir().unwrap();
    let o = run("orbits", r#"{"model": {"kind": "harper"}, "N_list": [64], "energies": [0.0]}"#, d.path(), None);
    assert_eq!(o.status.code(), Some(1));
    let e = error_json(&o);
    assert_eq!(e["error"], "near-critical");
    assert!(e["message"].as_str().unwrap().contains('0'));
}

#[test]
fn trace_check_potential_convergence() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"model": {"kind": "potential_only"}, "N_list": [64, 128, 256], "energies": [0.3],
                  "rho": {"period_factor": 1.35}}"#;
    let o = run("trace-check", cfg, d.path(), Some("2"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(d.path(), "trace_convergence.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "E,N,hbar,lhs,rhs_total,rel_error,analytic_rhs,analytic_rel_error");
    let rel: Vec<f64> = lines.map(|l| l.split(',').nth(5).unwrap().parse().unwrap()).collect();
    assert!(rel.windows(2).all(|w| w[1] < w[0]), "{rel:?}");
    let report: Value = serde_json::from_str(&read(d.path(), "trace_E0_N64.json")).unwrap();
    assert_eq!(report["N"], 64);
    assert!(report["orbit_terms"].as_array().unwrap().len() >= 2);
}

#[test]
fn trace_check_volume_term_only() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"model": {"kind": "harper"}, "N_list": [64], "energies": [1.0], "rho": {"T": 2.0}}"#;
    let o = run("trace-check", cfg, d.path(), None);
    assert!(o.status.success());
    let r: Value = serde_json::from_str(&read(d.path(), "trace_E0_N64.json")).unwrap();
    assert_eq!(r["orbit_terms"].as_array().unwrap().len(), 0);
    assert_eq!(r["rhs_volume"], r["rhs_total"]);
}

#[test]
fn bs_check_sweep_and_predictions() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"model": {"kind": "potential_only"}, "N_list": [32], "energies": [0.3, 0.6],
                  "bs": {"E_window": [0.05, 0.95]}}"#;
    let o = run("bs-check", cfg, d.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = read(d.path(), "bs_sweep_N32.csv");
    assert_eq!(sweep.lines().next().unwrap(), "E,n_min,n_local,n_max,holds");
    assert_eq!(sweep.lines().count(), 3);
    let p: Value = serde_json::from_str(&read(d.path(), "bs_predictions.json")).unwrap();
    let preds = p[0]["predictions"].as_array().unwrap();
    assert!(!preds.is_empty());
    for q in preds {
        assert!(q["distance"].as_f64().unwrap() < 1e-10);
    }
    // empty k range
    let cfg = r#"{"model": {"kind": "potential_only"}, "N_list": [32], "bs": {"E_window": [0.05, 0.95], "k_range": [3, 2]}}"#;
    let o = run("bs-check", cfg, d.path(), None);
    assert!(o.status.success());
    let p: Value = serde_json::from_str(&read(d.path(), "bs_predictions.json")).unwrap();
    assert_eq!(p[0]["predictions"].as_array().unwrap().len(), 0);
}

#[test]
fn antiwick_table_and_closed_forms() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"model": {"kind": "harper"}, "N_list": [16, 32]}"#;
    let o = run("antiwick-compare", cfg, d.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(d.path(), "antiwick_compare.csv");
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    let ratio: f64 = rows[1][3].parse().unwrap();
    assert!((1.5..3.0).contains(&ratio));
    for r in &rows {
        assert!(r[4].parse::<f64>().unwrap() < 1e-12 && r[5].parse::<f64>().unwrap() < 1e-8);
    }
    assert_eq!(read(d.path(), "harper_weyl_N16.csv").lines().count(), 16 * 16 + 1);
}

#[test]
fn constant_symbol_is_identity_under_both_quantisations() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"model": {"kind": "custom", "coeffs": [[0, 0, 1.5, 0.0]]}, "N_list": [8]}"#;
    let o = run("antiwick-compare", cfg, d.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(d.path(), "antiwick_compare.csv");
    let rel: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!(rel < 1e-10);
}

#[test]
fn poisson_and_propagator_outputs() {
    let d = tempfile::tempdir().unwrap();
    let o = run("poisson-check", r#"{"model": {"kind": "harper"}, "N_list": [32, 64]}"#, d.path(), None);
    assert!(o.status.success());
    let errs: Vec<f64> = read(d.path(), "poisson_check.csv")
        .lines()
        .skip(1)
        .map(|l| l.split(',').next_back().unwrap().parse().unwrap())
        .collect();
    assert!(errs[1] < 1e-8 && errs[0] / errs[1] > 10.0);

    let o = run("propagator", r#"{"model": {"kind": "kinetic_cos"}, "N_list": [32, 64], "propagator": {"times": [1.0]}}"#, d.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let vv = read(d.path(), "van_vleck.csv");
    let e: Vec<f64> = vv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!((1.5..3.0).contains(&(e[0] / e[1])));
    // tr U(0) = N
    let o = run("propagator", r#"{"model": {"kind": "harper"}, "N_list": [8], "propagator": {"times": [0.0]}}"#, d.path(), None);
    assert!(o.status.success());
    let tr = read(d.path(), "propagator_trace.csv");
    let re: f64 = tr.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((re - 8.0).abs() < 1e-12);
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let cfg = r#"{"model": {"kind": "harper"}, "N_list": [32, 64], "energies": [1.0, -0.6], "rho": {"period_factor": 1.35}}"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run("trace-check", cfg, a.path(), Some("1")).status.success());
    assert!(run("trace-check", cfg, b.path(), Some("4")).status.success());
    for name in ["trace_convergence.csv", "trace_E0_N32.json", "trace_E1_N64.json"] {
        assert_eq!(read(a.path(), name), read(b.path(), name));
    }
}

#[test]
fn threads_env_fallback() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("config.json");
    std::fs::write(&cfg, r#"{"model": {"kind": "harper"}, "N_list": [4]}"#).unwrap();
    let o = Command::new(bin())
        .args(["spectrum", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(d.path().join("out"))
        .env("TG_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(error_json(&o)["message"].as_str().unwrap().contains("TG_THREADS"));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = Command::new(bin()).arg("nonsense").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"], "usage");
}
