use std::path::PathBuf;

use ratreg::config::PipelineConfig;
use ratreg::pipeline;
use ratreg::regularity::Verdict;

fn out(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("pipeline").join(name)
}

#[test]
fn arcsine_end_to_end() {
    let cfg = PipelineConfig::from_json(
        r#"{"schema_version": 1, "measure": {"kind": "arcsine", "interval": [-2, 2]}, "poles": ["inf"], "n_max": 40}"#,
    )
    .unwrap();
    let dir = out("arcsine");
    let run = pipeline::run(&cfg, &dir).unwrap();
    assert!(matches!(run.summary.verdict, Some(Verdict::ConsistentWithRegular)));
    let kappa = std::fs::read_to_string(dir.join("kappa.csv")).unwrap();
    assert_eq!(kappa.lines().count(), 42);
    let gmp: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("gmp.json")).unwrap()).unwrap();
    assert!(gmp["lambda_identity_residual"].as_f64().unwrap() < 1e-12);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["verdict"], "consistent-with-regular");
    for a in &run.summary.artifacts {
        assert!(a.exists(), "{}", a.display());
    }
}

#[test]
fn atomic_measure_is_inconclusive() {
    let atoms: Vec<String> = (0..30).map(|k| format!("[{}, 1]", -1.0 + k as f64 / 15.0)).collect();
    let text = format!(
        r#"{{"schema_version": 1, "measure": {{"kind": "atomic", "atoms": [{}]}}, "poles": ["inf"], "n_max": 20,
            "stages": ["orthonormalize", "gmp", "potential", "regularity"]}}"#,
        atoms.join(", ")
    );
    let cfg = PipelineConfig::from_json(&text).unwrap();
    let run = pipeline::run(&cfg, &out("atomic")).unwrap();
    let report = run.report.unwrap();
    assert!(matches!(report.verdict, Verdict::Inconclusive));
    assert!(report.kappa.unwrap().note.is_some());
    assert!(report.growth.is_none());
}
