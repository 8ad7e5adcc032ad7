use std::fs;
use std::path::Path;

use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str], stdin: &str) -> Run {
    let mut argv = vec!["namebias"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = namebias_cli::run(argv, &mut stdin.as_bytes(), &mut out, &mut err);
    Run { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn corpus(dir: &Path) -> String {
    let p = dir.join("plots.tsv");
    fs::write(
        &p,
        "a\tMike has been living in Belgium for five years. Mike misses his brother Donald.\n\
         b\tPriya flew from India to France with her friend Arjun.\n\
         c\tThe harbour was quiet and the boats stayed in.\n",
    )
    .unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn help_and_usage_errors() {
    let r = run(&["--help"], "");
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("measure"));

    let r = run(&["measure", "--no-such-flag"], "");
    assert_eq!(r.code, 2);

    let r = run(&["measure", "--backend", "hash"], "");
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("Usage: namebias measure"), "{}", r.stderr);
}

#[test]
fn runtime_errors_exit_one() {
    let r = run(&["measure", "--dataset", "/definitely/missing.tsv", "--backend", "hash"], "");
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("effective config:") || r.stderr.contains("error:"));
}

#[test]
fn anonymize_reads_stdin() {
    let r = run(&["anonymize"], "Mike met Donald in Belgium.");
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout.trim(), "met in .");

    let r = run(&["anonymize", "--strategy", "replace"], "Mike met Donald in Belgium.");
    assert_eq!(r.stdout.trim(), "CHAR_A met CHAR_B in LOC_A.");
}

#[test]
fn remote_anonymizer_needs_endpoint() {
    let r = run(&["anonymize", "--strategy", "remote-llm"], "Mike ran.");
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stderr.contains("--anon-endpoint"));
}

#[test]
fn perturb_writes_k_variants_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path());
    let r = run(&["perturb", "--dataset", &data, "--k", "4", "--seed", "3"], "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let lines: Vec<Value> = r.stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3 * 4);
    assert_eq!(r.stdout, run(&["perturb", "--dataset", &data, "--k", "4", "--seed", "3"], "").stdout);
}

#[test]
fn measure_report_and_config_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path());
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        format!(r#"{{"dataset": {data:?}, "perturbation": {{"k": 5, "seed": 9}}, "backend": {{"kind": "hash", "dim": 32}}}}"#),
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let r = run(&["measure", "--config", cfg.to_str().unwrap(), "--k", "6", "--out", out.to_str().unwrap()], "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["task"], "bias");
    assert_eq!(report["metrics"]["k"], 6.0);
    assert_eq!(report["metrics"]["sample_count"], 3.0);
    assert_eq!(report["metadata"]["seed"], "9");
    assert_eq!(report["backend"], "hash-deterministic:sha256:32");
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"sead": 3}"#).unwrap();
    let r = run(&["anonymize", "--config", cfg.to_str().unwrap()], "x");
    assert_ne!(r.code, 0);
}

#[test]
fn sts_csv_report() {
    let r = run(&["sts", "--backend", "bow", "--strategy", "remove", "--format", "csv"], "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let mut lines = r.stdout.lines();
    assert!(lines.next().unwrap().starts_with("task,backend,anonymization,auc_roc"));
    assert!(lines.next().unwrap().starts_with("sts,bag-of-words:bow,remove,0.74"));
}

#[test]
fn heatmap_matrix_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let template = dir.path().join("t.txt");
    let names = dir.path().join("n.txt");
    fs::write(&template, "CHARACTER_NAME opened the old shop on the corner.").unwrap();
    fs::write(&names, "Mike\nPriya\nHan\n").unwrap();
    let r = run(
        &["heatmap", "--template", template.to_str().unwrap(), "--names", names.to_str().unwrap(), "--backend", "hash"],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows: Vec<Vec<String>> = r.stdout.lines().map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 4);
    for (i, row) in rows.iter().enumerate().skip(1) {
        assert_eq!(row[i].parse::<f64>().unwrap(), 1.0);
        for (j, cell) in row.iter().enumerate().skip(1) {
            assert_eq!(cell, &rows[j][i]);
        }
    }
}
