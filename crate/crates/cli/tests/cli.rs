use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "synthetic": {"n_institutions": 20, "n_years": 10, "hires_per_year": 8.0},
  "seed": 3, "topics": 4, "lda_iterations": 50, "mvr_restarts": 2, "mvr_samples": 5,
  "replicates": 4, "fit_restarts": 1, "fit_max_iter": 50, "runs": 5, "top_n": 10
}"#;

const ARTIFACTS: &[&str] = &[
    "config.json",
    "cohort.csv",
    "ranks.csv",
    "topics.csv",
    "productivity.csv",
    "greedy.csv",
    "fit.json",
    "placements/placements_0.csv",
    "model_check.csv",
    "institutions.csv",
    "institutions_bands.csv",
    "candidates.csv",
    "parity.csv",
    "descriptives_tables.csv",
    "forecast.csv",
];

fn facmarket(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facmarket"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn run_dir(out: &Output) -> PathBuf {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    PathBuf::from(String::from_utf8(out.stdout.clone()).unwrap().trim())
}

fn pipeline(base: &Path) -> PathBuf {
    std::fs::write(base.join("c.json"), SMALL).unwrap();
    run_dir(&facmarket(&["--config", "c.json", "--out", "out", "pipeline"], base))
}

#[test]
fn small_synthetic_pipeline_writes_every_artifact_reproducibly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let da = a.path().join(pipeline(a.path()));
    let db = b.path().join(pipeline(b.path()));
    assert_eq!(da.file_name(), db.file_name());
    for name in ARTIFACTS {
        let x = std::fs::read(da.join(name)).unwrap_or_else(|_| panic!("missing {name}"));
        let y = std::fs::read(db.join(name)).unwrap();
        assert!(!x.is_empty(), "{name} is empty");
        assert_eq!(x, y, "{name} differs between identical runs");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(t.path().join("c.json"), SMALL).unwrap();
    let a = run_dir(&facmarket(&["--config", "c.json", "ingest"], t.path()));
    let b = run_dir(&facmarket(&["--config", "c.json", "--seed", "4", "ingest"], t.path()));
    assert_ne!(a, b);
    let cfg: serde_json::Value =
        serde_json::from_slice(&std::fs::read(t.path().join(&b).join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["seed"], 4);
}

#[test]
fn missing_faculty_file_is_a_data_error_in_ingest() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(t.path().join("institutions.csv"), "institution_id,name,region\n").unwrap();
    std::fs::write(t.path().join("publications.csv"), "faculty_id,year,title\n").unwrap();
    std::fs::write(
        t.path().join("c.json"),
        r#"{"institutions": "institutions.csv", "faculty": "faculty.csv", "publications": "publications.csv"}"#,
    )
    .unwrap();
    let out = facmarket(&["--config", "c.json", "ingest"], t.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[ingest]"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(facmarket(&["bogus"], t.path()).status.code(), Some(1));
    assert_eq!(facmarket(&["fit", "--lambda", "x"], t.path()).status.code(), Some(1));
    std::fs::write(t.path().join("c.json"), r#"{"runs": 1}"#).unwrap();
    assert_eq!(facmarket(&["--config", "c.json", "ingest"], t.path()).status.code(), Some(1));
    assert_eq!(facmarket(&["--help"], t.path()).status.code(), Some(0));
}

#[test]
fn no_inputs_and_no_synthetic_block_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let out = facmarket(&["ingest"], t.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_writes_a_bundle() {
    let t = tempfile::tempdir().unwrap();
    let dir = run_dir(&facmarket(
        &["synth", "--institutions", "15", "--years", "5", "--hires", "6"],
        t.path(),
    ));
    for f in ["institutions.csv", "faculty.csv", "publications.csv"] {
        assert!(t.path().join(&dir).join(f).exists(), "missing {f}");
    }
}
