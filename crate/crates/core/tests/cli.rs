use std::fs;
use std::path::Path;
use std::process::Command;

use isingmis::em::EmOutcome;
use isingmis::ising::SpinMatrix;
use isingmis::rwl::RwlFit;

fn isingmis(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_isingmis")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn sample_perturb_fit_em_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("graph.json"), r#"{"p": 4, "edges": [[0, 1, 0.6], [1, 2, 0.6], [2, 3, 0.6]]}"#).unwrap();
    fs::write(d.join("law.json"), r#"{"mode": "perNode", "gammas": [0.0, 0.2, 0.0, 0.0]}"#).unwrap();

    isingmis(&["sample", "--graph", &path(d, "graph.json"), "--n", "400", "--seed", "3", "--out", &path(d, "clean.csv")]);
    isingmis(&["perturb", "--data", &path(d, "clean.csv"), "--law", &path(d, "law.json"), "--seed", "4", "--out", &path(d, "noisy.csv")]);
    let (clean, names) = SpinMatrix::read_csv(fs::File::open(d.join("clean.csv")).unwrap()).unwrap();
    let (noisy, _) = SpinMatrix::read_csv(fs::File::open(d.join("noisy.csv")).unwrap()).unwrap();
    assert_eq!((clean.n(), clean.p()), (400, 4));
    assert_eq!(names, SpinMatrix::default_names(4));
    // only node 1 may change
    for i in 0..400 {
        for s in [0, 2, 3] {
            assert_eq!(clean.get(i, s), noisy.get(i, s));
        }
    }

    isingmis(&["fit", "--data", &path(d, "noisy.csv"), "--lambda", "0.05", "--out", &path(d, "fit.json")]);
    let fit: RwlFit = serde_json::from_str(&fs::read_to_string(d.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit.p(), 4);

    isingmis(&["fit", "--data", &path(d, "noisy.csv"), "--lambda-grid", "0.02,0.2,0.1", "--out", &path(d, "path.json")]);
    let path_fits: Vec<RwlFit> = serde_json::from_str(&fs::read_to_string(d.join("path.json")).unwrap()).unwrap();
    assert_eq!(path_fits.len(), 3);
    assert_eq!(path_fits[0].lambda, 0.2);

    isingmis(&[
        "em", "--data", &path(d, "noisy.csv"), "--init-fit", &path(d, "fit.json"), "--law", &path(d, "law.json"),
        "--candidates", "auto:0.1", "--lambda", "0.05", "--iters", "2", "--audit-likelihood", "--out", &path(d, "em.json"),
    ]);
    let em: EmOutcome = serde_json::from_str(&fs::read_to_string(d.join("em.json")).unwrap()).unwrap();
    assert_eq!(em.history.len(), 2);
    assert!(em.history[0].nodes.iter().all(|s| s.likelihood_before.is_some()));

    isingmis(&["diagnose", "--graph", &path(d, "graph.json"), "--law", &path(d, "law.json"), "--n", "400", "--out", &path(d, "diag.json")]);
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("diag.json")).unwrap()).unwrap();
    assert!(diag["sMax"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scenarios/chain_small.json");
    for format in ["csv", "json"] {
        let out_dir = path(dir.path(), format);
        let out = Command::new(env!("CARGO_BIN_EXE_isingmis"))
            .args(["simulate", "--config", config, "--out-dir", &out_dir, "--format", format])
            .env("ISINGMIS_THREADS", "1")
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let listed = String::from_utf8(out.stdout).unwrap();
        assert!(listed.lines().any(|l| l.ends_with("report.json")));
        for line in listed.lines() {
            assert!(Path::new(line).exists());
        }
        let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&out_dir).join("report.json")).unwrap()).unwrap();
        assert_eq!(report["estimators"].as_array().unwrap().len(), 4);
    }
}

#[test]
fn errors_exit_nonzero() {
    let out = Command::new(env!("CARGO_BIN_EXE_isingmis"))
        .args(["fit", "--data", "/nonexistent.csv", "--lambda", "0.1", "--out", "/tmp/never.json"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
