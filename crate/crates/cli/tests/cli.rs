use std::path::Path;
use std::process::Command;

fn ratreg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ratreg"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn arcsine_pipeline_is_regular() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "arcsine.json",
        r#"{"schema_version": 1, "measure": {"kind": "arcsine", "interval": [-2, 2]}, "poles": ["inf"], "n_max": 40}"#,
    );
    let out = tmp.path().join("out");
    let status = ratreg().arg("pipeline").arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    for f in ["kappa.csv", "coefficients.csv", "gmp.json", "potential.json", "discriminant.json", "summary.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let report = read_json(&out.join("regularity.json"));
    assert_eq!(report["verdict"], "consistent-with-regular");
}

#[test]
fn missing_measure_file_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.json",
        r#"{"schema_version": 1, "measure": {"kind": "file", "path": "nowhere.json"}, "poles": ["inf"], "n_max": 10}"#,
    );
    let out = tmp.path().join("out");
    let res = ratreg().arg("regularity").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    let record = read_json(&out.join("error.json"));
    assert_eq!(record["error"], "config");
    assert_eq!(record["exit_code"], 2);
    let stderr: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(stderr, record);
}

#[test]
fn unknown_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "typo.json",
        r#"{"schema_version": 1, "measure": {"kind": "arcsine", "interval": [-2, 2]}, "poles": ["inf"], "n_mx": 10}"#,
    );
    let res = ratreg().arg("orthonormalize").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn cesaro_decreases() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "cesaro.json",
        r#"{"schema_version": 1, "jacobi": {"kind": "harmonic-perturbation", "length": 1100},
            "torus": {"kind": "free-type", "interval": [-2, 2]}, "n": [100, 1000]}"#,
    );
    let out = tmp.path().join("out");
    let status = ratreg().arg("cesaro").arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let doc = read_json(&out.join("cesaro.json"));
    let l1: Vec<f64> = doc["stats"].as_array().unwrap().iter().map(|s| s["l1"].as_f64().unwrap()).collect();
    assert!(l1[1] < l1[0] && l1[1] < 0.01, "{l1:?}");
}

#[test]
fn fixed_precision_too_low_is_numerical_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "arcsine.json",
        r#"{"schema_version": 1, "measure": {"kind": "arcsine", "interval": [-2, 2]}, "poles": ["inf"], "n_max": 80}"#,
    );
    let res = ratreg()
        .args(["orthonormalize", "--precision-bits", "53", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}
