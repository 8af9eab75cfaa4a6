use std::fs;
use std::path::Path;
use std::process::Command;

use mpsqc::mps::{Boundary, MatrixProductState};
use serde_json::Value;

fn mpsqc(sub: &str, config: &Path, out: &Path) -> i32 {
    let st = Command::new(env!("CARGO_BIN_EXE_mpsqc"))
        .args([sub, "--config"])
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .status()
        .expect("binary runs");
    st.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn compile_and_verify_ghz_ring() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("ghz.json");
    fs::write(&mps, MatrixProductState::ghz(6, Boundary::Pbc).unwrap().to_json().unwrap()).unwrap();
    let cfg = dir.path().join("compile.json");
    fs::write(&cfg, format!(r#"{{"experiment": "compile", "mps_path": {:?}}}"#, mps)).unwrap();
    let out = dir.path().join("out");
    assert_eq!(mpsqc("compile", &cfg, &out), 0);
    let rep = json(&out.join("compile_report.json"));
    let v = &rep["verification"];
    assert!((v["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((v["probability"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(json(&out.join("manifest.json"))["experiment"], "compile");

    let vcfg = dir.path().join("verify.json");
    let circ = out.join("circuit.json");
    fs::write(&vcfg, format!(r#"{{"mps_path": {:?}, "circuit_path": {:?}}}"#, mps, circ)).unwrap();
    let vout = dir.path().join("vout");
    assert_eq!(mpsqc("verify", &vcfg, &vout), 0);
    let r = json(&vout.join("verify_report.json"));
    assert!((r["probability"].as_f64().unwrap() - r["predicted_probability"].as_f64().unwrap()).abs() < 1e-10);
}

#[test]
fn canonicalize_writes_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("ghz.json");
    fs::write(&mps, MatrixProductState::ghz(4, Boundary::Pbc).unwrap().to_json().unwrap()).unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, format!(r#"{{"mps_path": {:?}}}"#, mps)).unwrap();
    assert_eq!(mpsqc("canonicalize", &cfg, dir.path()), 0);
    let m = json(&dir.path().join("manifest.json"));
    assert!(m["metrics"]["max_isometry_residual"].as_f64().unwrap() < 1e-10);
    let c = MatrixProductState::from_json(&fs::read_to_string(dir.path().join("canonical_mps.json")).unwrap()).unwrap();
    assert_eq!(c.lambda().unwrap().len(), 2);
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"n_values": [8], "no_such_key": 1}"#).unwrap();
    assert_eq!(mpsqc("quench", &cfg, dir.path()), 2);
    fs::write(&cfg, r#"{"experiment": "compile"}"#).unwrap();
    assert_eq!(mpsqc("quench", &cfg, dir.path()), 2);
    assert_eq!(mpsqc("quench", &dir.path().join("missing.json"), dir.path()), 2);

    // a circuit without gates
    let mps = dir.path().join("m.json");
    fs::write(&mps, MatrixProductState::product_state(&[0]).unwrap().to_json().unwrap()).unwrap();
    let circ = dir.path().join("empty.json");
    fs::write(&circ, r#"{"n_system":1,"n_ancilla":0,"postselect_qubits":[],"norm_factor":1.0,"gates":[]}"#).unwrap();
    fs::write(&cfg, format!(r#"{{"mps_path": {:?}, "circuit_path": {:?}}}"#, mps, circ)).unwrap();
    assert_eq!(mpsqc("verify", &cfg, dir.path()), 2);
}

#[test]
fn zero_probability_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("m.json");
    fs::write(&mps, MatrixProductState::product_state(&[0]).unwrap().to_json().unwrap()).unwrap();
    let circ = dir.path().join("flip.json");
    // the ancilla is flipped to |1⟩, so selecting |0⟩ never succeeds
    fs::write(
        &circ,
        r#"{"n_system":1,"n_ancilla":1,"postselect_qubits":[1],"norm_factor":1.0,"system_qubits":[0],
            "gates":[{"kind":"RY","qubits":[1],"theta":3.141592653589793}]}"#,
    )
    .unwrap();
    let cfg = dir.path().join("v.json");
    fs::write(&cfg, format!(r#"{{"mps_path": {:?}, "circuit_path": {:?}}}"#, mps, circ)).unwrap();
    assert_eq!(mpsqc("verify", &cfg, dir.path()), 3);
}

#[test]
fn quench_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("q.json");
    fs::write(&cfg, r#"{"n_values": [4, 6], "delta_values": [0.4], "t_final": 1.0, "record_stride": 5}"#).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(mpsqc("quench", &cfg, &a), 0);
    assert_eq!(mpsqc("quench", &cfg, &b), 0);
    for f in ["quench_n4_delta+0.40.csv", "quench_n6_delta+0.40.csv", "quench_summary.csv", "volume_law.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let head = fs::read_to_string(a.join("quench_n4_delta+0.40.csv")).unwrap();
    assert!(head.starts_with("t,entropy,energy\n"));
}

#[test]
fn small_success_rate_scan_matches_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.json");
    fs::write(&cfg, r#"{"n_values": [6], "d_values": [2, 4]}"#).unwrap();
    assert_eq!(mpsqc("success_rate_scan", &cfg, dir.path()), 0);
    let text = fs::read_to_string(dir.path().join("success_rate.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,d,fit_fidelity,success_rate,measured_probability,abs_error");
    for l in lines {
        let err: f64 = l.split(',').last().unwrap().parse().unwrap();
        assert!(err < 1e-10, "{l}");
    }
}
