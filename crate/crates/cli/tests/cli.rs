use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn uoht(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uoht"))
        .args(args)
        .env_remove("UOHT_THREADS")
        .output()
        .expect("binary runs")
}

fn ok_stdout(args: &[&str]) -> String {
    let out = uoht(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok_stdout(args)).unwrap()
}

/// CSV body without the `#` metadata lines.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(body.as_bytes());
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SIM_CONFIG: &str = r#"{
  "detector": {"kind": "univ-single"},
  "laws": {"pi": [0.7, 0.3], "mus": [[0.3, 0.7], [0.3, 0.7], [0.3, 0.7]]},
  "ns": [4, 8, 12],
  "trials": 300,
  "seed": 5
}"#;

#[test]
fn both_known_exponent() {
    let v = json(&[
        "exponent",
        "--kind",
        "both-known",
        "--mu",
        "0.3,0.7",
        "--pi",
        "0.7,0.3",
    ]);
    assert!((v["value"].as_f64().unwrap() - 0.174353).abs() < 1e-6);
    assert_eq!(v["solver"], "closed-form");
    assert_eq!(v["metadata"]["version"], env!("CARGO_PKG_VERSION"));
    assert!(v["metadata"]["git_hash"].is_string());
}

#[test]
fn univ_single_exponent_is_positive_and_capped() {
    let v = json(&[
        "exponent",
        "--kind",
        "univ-single",
        "--mu",
        "0.3,0.7",
        "--pi",
        "0.7,0.3",
        "--m",
        "3",
    ]);
    let x = v["value"].as_f64().unwrap();
    assert!(x > 0.0 && x <= 0.174353388, "{x}");
    assert_eq!(v["diagnostics"]["certification"], "upper-bound");
    assert_eq!(v["inputs"]["m"], 3);
}

#[test]
fn multi_kinds_accept_repeated_outlier_laws() {
    let v = json(&[
        "exponent",
        "--kind",
        "multi-typ-known",
        "--mu",
        "0.3,0.7",
        "--mu",
        "0.35,0.65",
        "--mu",
        "0.3,0.7",
        "--pi",
        "0.7,0.3",
    ]);
    let single = json(&[
        "exponent",
        "--kind",
        "both-known",
        "--mu",
        "0.35,0.65",
        "--pi",
        "0.7,0.3",
    ]);
    assert_eq!(v["value"], single["value"]);
    let b = json(&[
        "bound",
        "--kind",
        "univ-multi",
        "--mu",
        "0.3,0.7",
        "--pi",
        "0.7,0.3",
        "--m",
        "40",
        "--t",
        "2",
    ]);
    let lb = b["value"].as_f64().unwrap();
    assert!(lb > 0.0 && lb <= b["known_typical_exponent"].as_f64().unwrap());
}

#[test]
fn validation_failures_exit_2() {
    let cases: &[&[&str]] = &[
        &["exponent", "--kind", "both-known", "--mu", "0.3,0.7"],
        &[
            "exponent",
            "--kind",
            "both-known",
            "--mu",
            "0.3,0.6",
            "--pi",
            "0.7,0.3",
        ],
        &[
            "exponent",
            "--kind",
            "both-known",
            "--mu",
            "0.7,0.3",
            "--pi",
            "0.7,0.3",
        ],
        &[
            "exponent",
            "--kind",
            "univ-single",
            "--mu",
            "0.3,0.7",
            "--pi",
            "0.7,0.3",
        ],
        &[
            "exponent",
            "--kind",
            "univ-single",
            "--mu",
            "0.3,0.7",
            "--pi",
            "0.7,0.3",
            "--m",
            "2",
        ],
        &["figure", "--m-min", "2"],
        &[
            "oracle",
            "--detector",
            "multi-typ",
            "--mu",
            "0.3,0.7",
            "--pi",
            "0.7,0.3",
            "--m",
            "3",
            "--ns",
            "3",
        ],
        &[
            "detect",
            "--input",
            "/nonexistent.csv",
            "--detector",
            "univ-single",
        ],
        &[
            "exponent",
            "--kind",
            "both-known",
            "--mu",
            "0.3,0.7",
            "--pi",
            "0.7,0.3",
            "--threads",
            "0",
        ],
    ];
    for args in cases {
        let out = uoht(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn oracle_cap_exits_4() {
    let out = uoht(&[
        "oracle",
        "--detector",
        "univ-single",
        "--mu",
        "0.3,0.7",
        "--pi",
        "0.7,0.3",
        "--m",
        "3",
        "--ns",
        "50",
        "--cap",
        "1000",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn figure_rows_and_shape() {
    let rows = csv_rows(&ok_stdout(&["figure", "--m-min", "3", "--m-max", "10"]));
    assert_eq!(rows[0], ["pair", "M", "lower_bound", "two_B"]);
    assert_eq!(rows.len() - 1, 3 * 8);
    for pair in ["1", "2", "3"] {
        let mine: Vec<&Vec<String>> = rows[1..].iter().filter(|r| r[0] == pair).collect();
        assert_eq!(mine.len(), 8);
        let two_b: Vec<&String> = mine.iter().map(|r| &r[3]).collect();
        assert!(two_b.iter().all(|v| *v == two_b[0]));
        let lb: Vec<f64> = mine.iter().map(|r| r[2].parse().unwrap()).collect();
        assert!(lb.windows(2).all(|w| w[1] >= w[0]));
    }
    let custom = csv_rows(&ok_stdout(&[
        "figure",
        "--pair",
        "0.2,0.3,0.5;0.5,0.3,0.2",
        "--m-min",
        "50",
        "--m-max",
        "52",
    ]));
    assert_eq!(custom.len() - 1, 3);
    assert_eq!(custom[0], rows[0]);
}

#[test]
fn oracle_sweep_is_decreasing() {
    let text = ok_stdout(&[
        "oracle",
        "--detector",
        "ml-single",
        "--mu",
        "0.3,0.7",
        "--pi",
        "0.7,0.3",
        "--m",
        "3",
        "--ns",
        "10:60:10",
    ]);
    let rows = csv_rows(&text);
    assert_eq!(rows.len() - 1, 6);
    let errs: Vec<f64> = rows[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(text.contains("# fitted_slope: "));

    let v = json(&[
        "oracle",
        "--detector",
        "ml-single",
        "--mu",
        "0.3,0.7",
        "--pi",
        "0.7,0.3",
        "--m",
        "3",
        "--ns",
        "10:60:10",
        "--format",
        "json",
    ]);
    assert_eq!(v["profiles"].as_array().unwrap().len(), 6);
    assert!(v["fit"]["slope"].as_f64().unwrap() > 0.0);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "sim.json", SIM_CONFIG);
    let a = ok_stdout(&["simulate", "--config", &cfg, "--threads", "1"]);
    let b = ok_stdout(&["simulate", "--config", &cfg, "--threads", "3"]);
    let c = ok_stdout(&["simulate", "--config", &cfg]);
    assert_eq!(a, b);
    assert_eq!(a, c);
    let o1 = ok_stdout(&[
        "oracle",
        "--detector",
        "univ-single",
        "--mu",
        "0.3,0.7",
        "--pi",
        "0.7,0.3",
        "--m",
        "3",
        "--ns",
        "5,9",
        "--partitions",
        "4",
        "--threads",
        "1",
    ]);
    let o2 = ok_stdout(&[
        "oracle",
        "--detector",
        "univ-single",
        "--mu",
        "0.3,0.7",
        "--pi",
        "0.7,0.3",
        "--m",
        "3",
        "--ns",
        "5,9",
        "--partitions",
        "4",
        "--threads",
        "2",
    ]);
    assert_eq!(o1, o2);
}

#[test]
fn simulate_outputs_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "sim.json", SIM_CONFIG);
    let text = ok_stdout(&["simulate", "--config", &cfg]);
    assert!(text.contains("# seed: 5"));
    assert!(text.contains("# rng: "));
    let rows = csv_rows(&text);
    assert_eq!(rows.len() - 1, 3 * 3);
    assert_eq!(rows[1][0], "coordinate 1");

    let reseeded = ok_stdout(&["simulate", "--config", &cfg, "--seed", "6"]);
    assert_ne!(text, reseeded);

    let out = uoht(&["simulate", "--config", &cfg, "--trials", "0"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = config(
        dir.path(),
        "bad.json",
        r#"{"detector": {"kind": "univ-single"}, "ns": [3]}"#,
    );
    assert_eq!(uoht(&["simulate", "--config", &bad]).status.code(), Some(2));

    let v = json(&[
        "simulate", "--config", &cfg, "--ns", "4,8", "--format", "json",
    ]);
    assert_eq!(v["sweep"]["ns"], serde_json::json!([4, 8]));
    assert_eq!(v["metadata"]["seed"], "5");
}

#[test]
fn output_file_option() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.json");
    let out = uoht(&[
        "exponent",
        "--kind",
        "both-known",
        "--mu",
        "0.3,0.7",
        "--pi",
        "0.7,0.3",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert!(v["value"].is_number());
}

#[test]
fn detect_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let same = config(dir.path(), "same.csv", "0,1,1,0\n0,1,1,0\n0,1,1,0\n");
    let v = json(&["detect", "--input", &same, "--detector", "univ-single"]);
    assert_eq!(v["decision"], "coordinate 1 (tie)");
    assert_eq!(v["scores"].as_array().unwrap().len(), 3);

    let hand = config(dir.path(), "hand.csv", "# ML example\n0,1\n0,0\n0,0\n");
    let v = json(&[
        "detect",
        "--input",
        &hand,
        "--detector",
        "ml-single",
        "--mu",
        "0.5,0.5",
        "--pi",
        "0.9,0.1",
    ]);
    assert_eq!(v["decision"], "coordinate 1");
    let u1 = v["scores"][0]["score"].as_f64().unwrap();
    assert!((u1 - 2.0 * (1.0f64 / 0.9).ln()).abs() < 1e-11);

    let flat = config(
        dir.path(),
        "flat.csv",
        "0,1,0,1,0,1\n1,0,1,0,1,1\n0,1,1,0,0,1\n0,0,1,1,0,1\n",
    );
    let v = json(&[
        "detect",
        "--input",
        &flat,
        "--detector",
        "null-aware",
        "--lambda",
        "10",
    ]);
    assert_eq!(v["decision"], "null");
    assert_eq!(v["lambda"], 10.0);

    let malformed = config(dir.path(), "bad.csv", "0,1,x\n0,1,1\n0,0,1\n");
    assert_eq!(
        uoht(&["detect", "--input", &malformed, "--detector", "univ-single"])
            .status
            .code(),
        Some(2)
    );
    let ragged = config(dir.path(), "ragged.csv", "0,1\n0,1,1\n0,0,1\n");
    assert_eq!(
        uoht(&["detect", "--input", &ragged, "--detector", "univ-single"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        uoht(&[
            "detect",
            "--input",
            &same,
            "--detector",
            "univ-single",
            "--n",
            "5"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn detect_reads_binary_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for field in [3u32, 4, 2] {
        bytes.extend_from_slice(&field.to_le_bytes());
    }
    bytes.extend_from_slice(&[1, 1, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0]);
    let path = dir.path().join("obs.bin");
    std::fs::write(&path, bytes).unwrap();
    let v = json(&[
        "detect",
        "--input",
        path.to_str().unwrap(),
        "--detector",
        "univ-single",
        "--m",
        "3",
        "--k",
        "2",
    ]);
    assert_eq!(v["decision"], "coordinate 1");
    assert_eq!(v["n"], 4);
}
