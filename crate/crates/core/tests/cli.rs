use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_taxreform");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("TAXREFORM_CONFIG")
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Every file under `dir` by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn summary_rows(dir: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(dir.join("summary.csv"))
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn pipeline_smoke_writes_full_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    run_ok(&[
        "pipeline",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "2",
        "--n",
        "6000",
    ]);
    for f in [
        "panel.csv",
        "assignments.csv",
        "income_bins.csv",
        "balance.csv",
        "summary.csv",
        "diagnostics.csv",
        "manifest.json",
        "coefficients/low_log_wage.csv",
        "coefficients/medium_jjt_cum.csv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["seed"], 2);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(!out.join("error.json").exists());
    let balance = std::fs::read_to_string(out.join("balance.csv")).unwrap();
    for table in [
        "treated_vs_control_low",
        "treated_vs_control_medium",
        "employed86_vs_employed93_low_treated",
        "employed86_vs_employed93_low_control",
        "placebo",
    ] {
        assert!(balance.contains(table), "balance lacks {table}");
    }
}

#[test]
fn robustness_adds_four_low_group_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    run_ok(&[
        "pipeline",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "4",
        "--n",
        "6000",
    ]);
    let rows = summary_rows(&out);
    let variants: Vec<&str> = rows
        .iter()
        .filter(|r| &r[1] != "baseline")
        .map(|r| &r[1])
        .collect();
    assert_eq!(
        variants,
        [
            "low_115000_160000",
            "low_125000_160000",
            "low_120000_155000",
            "low_120000_165000"
        ]
    );
    assert!(rows
        .iter()
        .filter(|r| &r[1] != "baseline")
        .all(|r| &r[0] == "low" && &r[2] == "log_wage" && !r[16].is_empty()));

    let plain = tmp.path().join("plain");
    run_ok(&[
        "pipeline",
        "--out",
        plain.to_str().unwrap(),
        "--seed",
        "4",
        "--n",
        "6000",
        "--no-robustness",
    ]);
    assert_eq!(summary_rows(&plain).len() + 4, rows.len());
}

#[test]
fn same_seed_gives_byte_identical_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_ok(&[
        "pipeline",
        "--out",
        a.to_str().unwrap(),
        "--seed",
        "8",
        "--n",
        "5000",
        "--threads",
        "1",
    ]);
    run_ok(&[
        "pipeline",
        "--out",
        b.to_str().unwrap(),
        "--seed",
        "8",
        "--n",
        "5000",
        "--threads",
        "3",
    ]);
    assert_eq!(snapshot(&a), snapshot(&b));
    let c = tmp.path().join("c");
    run_ok(&[
        "pipeline",
        "--out",
        c.to_str().unwrap(),
        "--seed",
        "9",
        "--n",
        "5000",
    ]);
    assert_ne!(snapshot(&a)["panel.csv"], snapshot(&c)["panel.csv"]);
}

#[test]
fn stages_reproduce_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let whole = tmp.path().join("whole");
    let staged = tmp.path().join("staged");
    let (w, s) = (whole.to_str().unwrap(), staged.to_str().unwrap());
    run_ok(&["pipeline", "--out", w, "--seed", "5", "--n", "5000"]);
    run_ok(&["generate", "--out", s, "--seed", "5", "--n", "5000"]);
    for stage in ["assign", "balance", "estimate", "diagnose"] {
        run_ok(&[stage, "--out", s]);
    }
    let (a, b) = (snapshot(&whole), snapshot(&staged));
    for (name, bytes) in &a {
        if name != "manifest.json" {
            assert_eq!(Some(bytes), b.get(name), "{name} differs");
        }
    }
}

#[test]
fn file_mode_with_missing_csv_fails_and_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let missing = tmp.path().join("nowhere/panel.csv");
    let o = run(&[
        "pipeline",
        "--out",
        out.to_str().unwrap(),
        "--panel",
        missing.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("nowhere/panel.csv"), "{stderr}");
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "failed");
    assert!(report["error"]
        .as_str()
        .unwrap()
        .contains("nowhere/panel.csv"));
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn config_file_and_env_var() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 12\noutcomes = [\"log_wage\"]\nrobustness = false\n[dgp]\nn_individuals = 4000\n",
    )
    .unwrap();
    let a = tmp.path().join("a");
    run_ok(&[
        "pipeline",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
    ]);
    let rows = summary_rows(&a);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| &r[2] == "log_wage"));

    let b = tmp.path().join("b");
    let o = Command::new(BIN)
        .args(["pipeline", "--out", b.to_str().unwrap()])
        .env("TAXREFORM_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(snapshot(&a), snapshot(&b));
}

#[test]
fn invalid_flags_exit_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "pipeline",
        "--out",
        out.to_str().unwrap(),
        "--groups",
        "150000:170000,160000:280000",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(out.join("error.json").exists());
    let o = run(&[
        "pipeline",
        "--out",
        out.to_str().unwrap(),
        "--deflation-factor",
        "-1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
