use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cnnelm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cnnelm"))
        .args(args)
        .env_remove("CNNELM_DATA_DIR")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cnnelm(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Exports the synthetic map into `dir` and returns the manifest path.
fn export_synthetic(dir: &Path) -> PathBuf {
    let target = dir.join("syn");
    ok(&["ingest", "--dataset", "SYNTH", "--export", s(&target)]);
    target.join("manifest.json")
}

fn line_with<'a>(text: &'a str, prefix: &str) -> &'a str {
    text.lines()
        .find(|l| l.starts_with(prefix))
        .unwrap_or_else(|| panic!("no '{prefix}' line in:\n{text}"))
}

#[test]
fn train_then_predict_reproduces_training_hit_rates() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = export_synthetic(dir.path());
    let out_dir = dir.path().join("model");
    let stdout = ok(&[
        "train",
        "--dataset",
        s(&manifest),
        "--L",
        "120",
        "--c",
        "0.1",
        "--seed",
        "42",
        "--output-dir",
        s(&out_dir),
    ]);
    let train_rates = line_with(&stdout, "training-set hit rates:")
        .trim_start_matches("training-set hit rates: ")
        .to_string();
    assert!(line_with(&stdout, "train time:").ends_with(" s"));

    let train_csv = manifest.parent().unwrap().join("train.csv");
    let pred = dir.path().join("pred.csv");
    let out = cnnelm(&[
        "predict",
        "--model",
        s(&out_dir.join("model.json")),
        "--queries",
        s(&train_csv),
        "--output",
        s(&pred),
    ]);
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(
        line_with(&stderr, "hit rates:").trim_start_matches("hit rates: "),
        train_rates
    );
    let text = std::fs::read_to_string(&pred).unwrap();
    assert_eq!(text.lines().next(), Some("building,floor"));
    assert_eq!(text.lines().count(), 2001);

    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["config"]["L"], 120);
    assert_eq!(run["config"]["seed"], 42);
    assert_eq!(run["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn registry_defaults_and_config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"dataset": "SYNTH", "L": 40, "c": 0.5, "seed": 3}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("m");
    ok(&[
        "train",
        "--config",
        s(&cfg),
        "--L",
        "60",
        "--output-dir",
        s(&out_dir),
    ]);
    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["config"]["L"], 60);
    assert_eq!(run["config"]["hidden_source"], "flag");
    assert_eq!(run["config"]["c"], 0.5);
    assert_eq!(run["config"]["c_source"], "file");
    assert_eq!(run["config"]["seed"], 3);

    // nothing given: the registry entry decides
    let out = cnnelm(&[
        "train",
        "--dataset",
        "SYNTH",
        "--approach",
        "elm_only",
        "--output-dir",
        s(&out_dir),
    ]);
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains("L=530 (registry) c=0.1 (registry)"),
        "{stderr}"
    );
}

#[test]
fn auto_hidden_size_records_sweep_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("m");
    ok(&[
        "train",
        "--dataset",
        "SYNTH",
        "--L",
        "auto",
        "--l-max",
        "30",
        "--output-dir",
        s(&out_dir),
    ]);
    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    let grid: Vec<u64> = run["sweep"]["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["hidden"].as_u64().unwrap())
        .collect();
    assert_eq!(grid, vec![5, 10, 15, 20, 25, 30]);
    assert_eq!(run["config"]["L"], run["sweep"]["selected"]);
    assert_eq!(run["config"]["hidden_source"], "sweep");

    let stdout = ok(&["sweep", "--dataset", "SYNTH", "--l-max", "15"]);
    assert!(stdout.contains("selected L = "));
}

#[test]
fn quantized_and_empty_queries() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = export_synthetic(dir.path());
    let out_dir = dir.path().join("m");
    ok(&[
        "train",
        "--dataset",
        s(&manifest),
        "--L",
        "80",
        "--c",
        "0.1",
        "--quantize",
        "--output-dir",
        s(&out_dir),
    ]);
    let model = out_dir.join("model.json");
    let test_csv = manifest.parent().unwrap().join("test.csv");
    let float = ok(&["predict", "--model", s(&model), "--queries", s(&test_csv)]);
    let quant = ok(&[
        "predict",
        "--model",
        s(&model),
        "--queries",
        s(&test_csv),
        "--quantized",
    ]);
    let (f, q): (Vec<&str>, Vec<&str>) = (float.lines().collect(), quant.lines().collect());
    assert_eq!(f.len(), q.len());
    let agree = f.iter().zip(&q).filter(|(a, b)| a == b).count();
    assert!(
        agree as f64 >= 0.95 * f.len() as f64,
        "{agree} of {}",
        f.len()
    );

    let empty = dir.path().join("empty.csv");
    let header = std::fs::read_to_string(&test_csv)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    std::fs::write(&empty, header + "\n").unwrap();
    assert_eq!(
        ok(&["predict", "--model", s(&model), "--queries", s(&empty)]),
        "building,floor\n"
    );
}

#[test]
fn errors_exit_with_code_two() {
    let out = cnnelm(&[
        "train",
        "--dataset",
        "UJI1",
        "--data-dir",
        "/nonexistent/root",
        "--error-json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"]["kind"], "io");
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("/nonexistent/root/UJI1/train.csv"));

    let out = cnnelm(&["train", "--dataset", "NOWHERE"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown dataset"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("model.json");
    std::fs::write(&bad, "{not json").unwrap();
    let out = cnnelm(&["predict", "--model", s(&bad), "--queries", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));

    // query file narrower than the model's AP range
    let manifest = export_synthetic(dir.path());
    let out_dir = dir.path().join("m");
    ok(&[
        "train",
        "--dataset",
        s(&manifest),
        "--approach",
        "elm",
        "--L",
        "20",
        "--c",
        "1",
        "--output-dir",
        s(&out_dir),
    ]);
    let narrow = dir.path().join("narrow.csv");
    std::fs::write(&narrow, "A,B\n-40,-50\n").unwrap();
    let out = cnnelm(&[
        "predict",
        "--model",
        s(&out_dir.join("model.json")),
        "--queries",
        s(&narrow),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

fn non_timing_columns(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            // drop delta_tr_s, delta_te_s, norm_delta_tr, norm_delta_te
            cols.iter()
                .enumerate()
                .filter(|(i, _)| ![5, 6, 9, 10].contains(i))
                .map(|(_, c)| *c)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect()
}

#[test]
fn benchmark_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let stdout = ok(&[
            "benchmark",
            "--datasets",
            "SYNTH,UJI2",
            "--seeds",
            "1,2",
            "--output-dir",
            s(&out_dir),
            "--data-dir",
            "/nonexistent/root",
        ]);
        (out_dir, stdout)
    };
    let (a, table) = run("a");
    let (b, _) = run("b");
    assert!(table.contains("Avg."));
    assert!(table.contains("UJI2") && table.contains("failed"));
    let csv_a = std::fs::read_to_string(a.join("report.csv")).unwrap();
    let csv_b = std::fs::read_to_string(b.join("report.csv")).unwrap();
    assert!(csv_a.starts_with(
        "dataset,approach,seed,zeta_b,zeta_f,delta_tr_s,delta_te_s,norm_zeta_b,norm_zeta_f,norm_delta_tr,norm_delta_te,config_digest\n"
    ));
    // 3 approaches x 2 seeds, 3 averaged rows, 3 overall rows
    assert_eq!(csv_a.lines().filter(|l| l.starts_with("SYNTH,")).count(), 9);
    assert_eq!(non_timing_columns(&csv_a), non_timing_columns(&csv_b));

    let report = a.join("report.json");
    let csv = ok(&["report", "--input", s(&report), "--format", "csv"]);
    assert_eq!(non_timing_columns(&csv), non_timing_columns(&csv_a));
    assert!(ok(&["report", "--input", s(&report)]).contains("Avg."));

    let out = cnnelm(&[
        "benchmark",
        "--datasets",
        "SYNTH",
        "--seeds",
        "1",
        "--approaches",
        "knn",
        "--output-dir",
        s(&dir.path().join("c")),
        "--fail-under",
        "99.9",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
