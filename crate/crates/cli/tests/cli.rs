use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn twingap(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_twingap"));
    cmd.args(args).env_remove("TWINGAP_WORKERS");
    if let Some(w) = workers {
        cmd.env("TWINGAP_WORKERS", w);
    }
    cmd.output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config(dir: &Path, nd: usize, d: usize, seed: u64) -> PathBuf {
    let text = fs::read_to_string(configs().join("simulate.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["n_mothers"] = serde_json::json!({"ND": nd, "D": d});
    v["twin_rate"] = serde_json::json!(0.3);
    v["seed"] = serde_json::json!(seed);
    let path = dir.join(format!("sim_{nd}_{d}_{seed}.json"));
    fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    path
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn decompose_published_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.csv");
    let o = twingap(&["decompose", "--coeffs", s(&configs().join("published_gaps.json")), "--out", s(&out)], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    let expected = [
        [0.018, 0.027, 0.0, 0.037, 0.027, -0.037],
        [0.014, 0.022, 0.0, 0.036, 0.022, -0.013],
        [0.008, 0.010, 0.0, 0.018, 0.010, -0.042],
        [0.012, -0.008, 0.0, 0.015, -0.008, -0.023],
    ];
    assert_eq!(rows.len(), 4);
    for (r, e) in rows.iter().zip(expected) {
        for (a, b) in r.iter().zip(e) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("table.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "decompose");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = twingap(&["analyze", "--births", s(&missing), "--out", s(&dir.path().join("out"))], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.txt");
    let coeffs = configs().join("published_gaps.json");
    for args in [
        vec!["decompose", "--coeffs", s(&coeffs), "--out", s(&out), "--format", "xml"],
        vec!["decompose", "--coeffs", s(&coeffs)],
        vec!["frobnicate"],
        vec!["analyze", "--births", "a.csv", "--out", "o", "--missing", "missing-indicator"],
        vec!["report", "--fit-dir", ".", "--format", "yaml"],
    ] {
        let o = twingap(&args, None);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!out.exists());
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"n_mothers": {"ND": 1, "D": 1}, "twin_rate": 2.0}"#).unwrap();
    let o = twingap(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("b.csv"))], None);
    assert_eq!(o.status.code(), Some(1));
}

fn simulate_and_analyze(root: &Path, workers: &str) -> BTreeMap<String, Vec<u8>> {
    let cfg = small_config(root, 400, 400, 3);
    let births = root.join("births.csv");
    let o = twingap(&["simulate", "--config", s(&cfg), "--out", s(&births)], Some(workers));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = root.join("out");
    let o = twingap(
        &[
            "analyze",
            "--births",
            s(&births),
            "--out",
            s(&out),
            "--run-config",
            s(&configs().join("run.json")),
            "--bootstrap",
            "20",
        ],
        Some(workers),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut files = read_tree(&out);
    files.insert("births.csv".into(), fs::read(&births).unwrap());
    files.insert("births.manifest.json".into(), fs::read(root.join("births.manifest.json")).unwrap());
    files
}

#[test]
fn simulate_then_analyze_is_reproducible() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = simulate_and_analyze(a.path(), "1");
    let second = simulate_and_analyze(b.path(), "1");
    let wide = simulate_and_analyze(c.path(), "4");
    assert!(first.contains_key("manifest.json") && first.contains_key("decomposition.md"));
    assert!(first.keys().any(|k| k.contains("ND_NN_twin_fe.json")));
    assert_eq!(first, second);
    assert_eq!(first, wide);

    let manifest: serde_json::Value = serde_json::from_slice(&first["manifest.json"]).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config"]["bootstrap"], 20);

    let o = twingap(&["report", "--fit-dir", s(&a.path().join("out")), "--format", "csv"], None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("society,window,estimator,mode,theta,se,n_obs,n_clusters\n"));
    assert!(text.contains("D,CH,twin_fe,mf_pairs,"));

    let o = twingap(
        &["report", "--fit-dir", s(&a.path().join("out")), "--format", "md", "--table", "decomposition"],
        None,
    );
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("| Infant mortality |"));
}

#[test]
fn two_files_one_per_society() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let (nd, d) = (root.join("nd.csv"), root.join("d.csv"));
    for (cfg, out) in [(small_config(root, 300, 0, 1), &nd), (small_config(root, 0, 300, 2), &d)] {
        let o = twingap(&["simulate", "--config", s(&cfg), "--out", s(out)], None);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let out = root.join("out");
    let o = twingap(
        &["analyze", "--births", s(&nd), "--births2", s(&d), "--out", s(&out), "--windows", "I,NN"],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("decomposition.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);

    let o = twingap(&["analyze", "--births", s(&nd), "--births2", s(&nd), "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(2));
}
