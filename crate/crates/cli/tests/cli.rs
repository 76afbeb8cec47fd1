use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fdrelay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdrelay"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(&o));
    o
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = r#"{
  "relay": {"fsfh_ratio": 4},
  "comms": {"n_symbols": 400},
  "sweep": {"betas": [1e-4, 3e-4, 1e-3]}
}"#;

/// Temp dir holding `config.json` with `text`; returns (dir, config path).
fn project(text: &str) -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("input.json");
    fs::write(&cfg, text).unwrap();
    let p = cfg.to_str().unwrap().to_owned();
    (dir, p)
}

fn out(dir: &tempfile::TempDir) -> String {
    dir.path().to_str().unwrap().to_owned()
}

/// Parse an RFC 4180 file strictly: CRLF records, constant field count.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let bytes = fs::read(path).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.ends_with("\r\n"));
    assert!(!text.replace("\r\n", "").contains('\n'));
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn controller_stub(d: [[f64; 2]; 2], step: f64) -> String {
    serde_json::json!({
        "a": [], "b": [], "c": [[], []], "d": d,
        "step_seconds": step, "gamma_achieved": 1.0, "gamma_certified": 1.0
    })
    .to_string()
}

#[test]
fn design_with_built_in_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(fdrelay(&["design", "--out", &out(&dir)]));
    assert!(String::from_utf8_lossy(&o.stdout).contains("gamma_min"));
    let report = json(&dir.path().join("report.json"));
    for key in [
        "gamma_min",
        "gamma_lower",
        "gamma_achieved",
        "gamma_certified",
        "spectral_radius",
        "controller_states",
        "tol",
    ] {
        assert!(report[key].is_number(), "{key}");
    }
    assert!(report["spectral_radius"].as_f64().unwrap() < 1.0);
    assert!(report["bisection_trace"].as_array().unwrap().len() > 3);
    let k = json(&dir.path().join("controller.json"));
    assert_eq!(k["a"].as_array().unwrap().len(), 36);
    assert_eq!(k["d"].as_array().unwrap().len(), 2);
    assert_eq!(k["step_seconds"].as_f64(), Some(1.0));
    assert!(dir.path().join("config.json").exists());
}

#[test]
fn pipeline_is_deterministic_and_certified() {
    let (dir, cfg) = project(SMALL);
    let o = out(&dir);
    ok(fdrelay(&["design", "--config", &cfg, "--out", &o]));
    let first_controller = fs::read(dir.path().join("controller.json")).unwrap();

    ok(fdrelay(&["certify", "--config", &cfg, "--out", &o]));
    let cert = json(&dir.path().join("certify.json"));
    let report = json(&dir.path().join("report.json"));
    let certified = cert["hinf_norm"].as_f64().unwrap();
    assert!(certified <= report["gamma_achieved"].as_f64().unwrap() * 1.001);
    assert_eq!(cert["within_claim"], Value::Bool(true));
    assert!(cert["spectral_radius"].as_f64().unwrap() < 1.0);

    ok(fdrelay(&["sweep", "--config", &cfg, "--out", &o, "--seed", "7"]));
    let a = fs::read(dir.path().join("ber_curves.csv")).unwrap();
    ok(fdrelay(&["sweep", "--config", &cfg, "--out", &o, "--seed", "7"]));
    let b = fs::read(dir.path().join("ber_curves.csv")).unwrap();
    assert_eq!(a, b);
    ok(fdrelay(&["sweep", "--config", &cfg, "--out", &o, "--seed", "8"]));
    assert_ne!(a, fs::read(dir.path().join("ber_curves.csv")).unwrap());

    let (header, rows) = read_csv(&dir.path().join("ber_curves.csv"));
    assert_eq!(header, ["beta", "canceler", "errors", "trials", "ber", "ci_lo", "ci_hi"]);
    assert_eq!(rows.len(), 9);
    let kinds: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(&kinds[..], ["none", "none", "none", "designed", "designed", "designed", "perfect", "perfect", "perfect"]);
    for r in &rows {
        let ber: f64 = r[4].parse().unwrap();
        let (lo, hi): (f64, f64) = (r[5].parse().unwrap(), r[6].parse().unwrap());
        assert!(lo <= ber && ber <= hi);
        assert_eq!(r[3], "400");
    }

    // rerunning the design reproduces the controller bytes
    ok(fdrelay(&["design", "--config", &cfg, "--out", &o]));
    assert_eq!(first_controller, fs::read(dir.path().join("controller.json")).unwrap());
}

#[test]
fn canceler_filter_limits_curves() {
    let (dir, cfg) = project(SMALL);
    let o = out(&dir);
    ok(fdrelay(&["design", "--config", &cfg, "--out", &o]));
    ok(fdrelay(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        &o,
        "--cancelers",
        "designed,perfect",
        "--betas",
        "2e-4,5e-4",
    ]));
    let (_, rows) = read_csv(&dir.path().join("ber_curves.csv"));
    let kinds: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(kinds, ["designed", "designed", "perfect", "perfect"]);

    let bad = fdrelay(&["sweep", "--config", &cfg, "--out", &o, "--cancelers", "designed,oracle"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn simulate_writes_waveform() {
    let (dir, cfg) = project(SMALL);
    let o = out(&dir);
    ok(fdrelay(&["design", "--config", &cfg, "--out", &o]));
    ok(fdrelay(&["simulate", "--config", &cfg, "--out", &o, "--symbols", "10"]));
    let (header, rows) = read_csv(&dir.path().join("waveform.csv"));
    assert_eq!(header, ["t", "v_i", "v_q", "u_i", "u_q", "z_i", "z_q", "yT_i", "yT_q"]);
    // 2 s symbols at 4 samples per second
    assert_eq!(rows.len(), 80);
    assert_eq!(rows[1][0], "0.25");
}

#[test]
fn malformed_config_exits_2_with_position() {
    let (dir, cfg) = project("{\n  \"relay\": {\"delay\": }\n}");
    let o = fdrelay(&["design", "--config", &cfg, "--out", &out(&dir)]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("line 2") && msg.contains("column"), "{msg}");

    let (dir, cfg) = project(r#"{"sim": {"seeed": 3}}"#);
    let o = fdrelay(&["design", "--config", &cfg, "--out", &out(&dir)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sim.seeed"), "{}", stderr(&o));

    let (dir, cfg) = project(r#"{"relay": {"delay": 1.03}}"#);
    let o = fdrelay(&["design", "--config", &cfg, "--out", &out(&dir)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn coupling_free_config_meets_unit_bound() {
    let (dir, cfg) = project(r#"{"relay": {"fsfh_ratio": 4, "coupling_gain": 0.0}}"#);
    ok(fdrelay(&["design", "--config", &cfg, "--out", &out(&dir)]));
    let report = json(&dir.path().join("report.json"));
    let tol = report["tol"].as_f64().unwrap();
    assert!(report["gamma_min"].as_f64().unwrap() <= 1.0 + tol);
}

#[test]
fn certify_exit_codes() {
    let (dir, cfg) = project(SMALL);
    let o = out(&dir);
    let k = dir.path().join("k.json");
    let kp = k.to_str().unwrap();

    // K = 0 with the reference coupling gain: stable, norm reported
    fs::write(&k, controller_stub([[0.0, 0.0], [0.0, 0.0]], 1.0)).unwrap();
    let res = ok(fdrelay(&["certify", "--config", &cfg, "--out", &o, "--controller", kp]));
    let cert: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!(cert["spectral_radius"].as_f64().unwrap() < 1.0);
    assert!(cert["hinf_norm"].as_f64().unwrap() > 0.0);

    // loop gain 0.15 * 10 > 1
    fs::write(&k, controller_stub([[10.0, 0.0], [0.0, 10.0]], 1.0)).unwrap();
    let res = fdrelay(&["certify", "--config", &cfg, "--out", &o, "--controller", kp]);
    assert_eq!(res.status.code(), Some(4));
    assert!(stderr(&res).contains("spectral radius"));

    fs::write(&k, controller_stub([[0.0, 0.0], [0.0, 0.0]], 2.0)).unwrap();
    let res = fdrelay(&["certify", "--config", &cfg, "--out", &o, "--controller", kp]);
    assert_eq!(res.status.code(), Some(3));
    let res = fdrelay(&["sweep", "--config", &cfg, "--out", &o, "--controller", kp]);
    assert_eq!(res.status.code(), Some(3));

    fs::write(&k, "{\"a\": [[1.0, 2.0]], \"b\": ").unwrap();
    let res = fdrelay(&["certify", "--config", &cfg, "--out", &o, "--controller", kp]);
    assert_eq!(res.status.code(), Some(2));

    fs::write(&k, "{\"a\": [[1.0, 2.0]], \"b\": [], \"c\": [], \"d\": [], \"step_seconds\": 1.0, \"gamma_achieved\": 1, \"gamma_certified\": 1}").unwrap();
    let res = fdrelay(&["certify", "--config", &cfg, "--out", &o, "--controller", kp]);
    assert_eq!(res.status.code(), Some(2));
}
