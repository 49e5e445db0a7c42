//! End-to-end runs of every subcommand through the built binary.

use std::path::Path;
use std::process::{Command, Output};

use deep_stdp::io::config::Experiment;
use serde_json::Value;

fn deepstdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deepstdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = deepstdp(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON object")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn cost_kmeans_golden() {
    let v = json_ok(&[
        "cost", "kmeans", "--k", "100", "--d", "256", "--it", "20", "--n", "5000", "--epochs",
        "175",
    ]);
    assert!((v["energy_mj"].as_f64().unwrap() - 14.1).abs() / 14.1 < 0.005);
    assert!((v["total_mj"].as_f64().unwrap() - 2467.5).abs() / 2467.5 < 0.005);
}

#[test]
fn cost_stdp_from_layer_sizes() {
    let v = json_ok(&[
        "cost",
        "stdp",
        "--p-input",
        "0.5992",
        "--p-exc",
        "0.0019",
        "--w-exc",
        "25600",
        "--w-inh",
        "9900",
        "--n",
        "5000",
    ]);
    assert!((v["energy_mj"].as_f64().unwrap() - 55.34).abs() / 55.34 < 0.01);
    let sizes = json_ok(&[
        "cost",
        "stdp",
        "--p-input",
        "0.5",
        "--p-exc",
        "0.01",
        "--d",
        "16",
        "--k",
        "4",
        "--n",
        "10",
    ]);
    let explicit = json_ok(&[
        "cost",
        "stdp",
        "--p-input",
        "0.5",
        "--p-exc",
        "0.01",
        "--w-exc",
        "64",
        "--w-inh",
        "12",
        "--n",
        "10",
    ]);
    assert_eq!(sizes, explicit);
}

#[test]
fn blob_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs");
    let v = json_ok(&[
        "gen-synth",
        "--out",
        s(&data),
        "--kind",
        "blobs",
        "--classes",
        "3",
        "--per-class",
        "30",
        "--d",
        "8",
        "--sigma",
        "0.05",
        "--seed",
        "4",
    ]);
    assert_eq!(v["samples"], 90);
    let inputs = data.join("inputs.dstp");
    let truth = data.join("labels.dstp");

    let km = dir.path().join("km.dstp");
    let cfg = dir.path().join("k3.cfg");
    std::fs::write(&cfg, "kmeans.k = 3\nsnn.k = 6\nd_pca = 8\n").unwrap();
    let v = json_ok(&[
        "cluster",
        "--method",
        "kmeans",
        "--in",
        s(&inputs),
        "--config",
        s(&cfg),
        "--out",
        s(&km),
    ]);
    assert_eq!(v["k"], 3);
    assert!(v.get("p_exc").is_none());
    let p = json_ok(&[
        "metrics",
        "purity",
        "--labels",
        s(&km),
        "--truth",
        s(&truth),
    ]);
    assert!(p["purity"].as_f64().unwrap() > 0.95);
    let n = json_ok(&["metrics", "nmi", "--a", s(&km), "--b", s(&km)]);
    assert_eq!(n["nmi"], 1.0);

    let st = dir.path().join("stdp.dstp");
    let v = json_ok(&[
        "cluster",
        "--method",
        "stdp",
        "--in",
        s(&inputs),
        "--config",
        s(&cfg),
        "--out",
        s(&st),
    ]);
    assert_eq!(v["method"], "stdp");
    assert!(v["p_input"].as_f64().unwrap() > 0.0);

    let acc = json_ok(&[
        "probe",
        "--features",
        s(&inputs),
        "--labels",
        s(&truth),
        "--epochs",
        "50",
    ]);
    assert!(acc["accuracy"].as_f64().unwrap() > 0.9);

    let w = dir.path().join("weights.dstp");
    let v = json_ok(&[
        "export-weights",
        "--in",
        s(&inputs),
        "--config",
        s(&cfg),
        "--out",
        s(&w),
    ]);
    assert_eq!((v["d"].as_u64(), v["k"].as_u64()), (Some(8), Some(6)));
    let bytes = std::fs::read(&w).unwrap();
    assert_eq!(&bytes[..4], b"DSTP");
}

#[test]
fn image_training_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = Experiment::default();
    exp.run.epochs = 2;
    exp.run.probe_every = 1;
    exp.run.snn.k = 10;
    exp.data.per_class = 12;
    exp.data.classes = 3;
    exp.data.height = 8;
    exp.data.width = 8;
    exp.data.kind = deep_stdp::io::config::DataKind::Images;
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, exp.to_text()).unwrap();
    let data = dir.path().join("images");
    json_ok(&["gen-synth", "--config", s(&cfg), "--out", s(&data)]);

    let log = dir.path().join("log.jsonl");
    let ckpt = dir.path().join("net.dstp");
    let v = json_ok(&[
        "train",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--log",
        s(&log),
        "--checkpoint",
        s(&ckpt),
    ]);
    assert_eq!(v["epochs"], 2);
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0]["nmi_prev"].is_null());
    assert!(lines[1]["nmi_prev"].as_f64().is_some());

    let labels = dir.path().join("labels.dstp");
    let inputs = data.join("inputs.dstp");
    json_ok(&[
        "cluster",
        "--method",
        "stdp",
        "--in",
        s(&inputs),
        "--config",
        s(&cfg),
        "--out",
        s(&labels),
    ]);
    let f = json_ok(&[
        "metrics",
        "fim",
        "--checkpoint",
        s(&ckpt),
        "--data",
        s(&data),
        "--labels",
        s(&labels),
        "--config",
        s(&cfg),
    ]);
    assert!(f["fim_trace"].as_f64().unwrap() >= 0.0);
}

#[test]
fn errors_map_to_exit_codes() {
    let out = deepstdp(&[
        "metrics",
        "nmi",
        "--a",
        "/nonexistent/a",
        "--b",
        "/nonexistent/b",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: io:"), "{err}");

    assert_eq!(
        deepstdp(&["cost", "kmeans", "--k", "x"]).status.code(),
        Some(1)
    );
    assert_eq!(deepstdp(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(deepstdp(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "epochs = 3\nmystery = 1\n").unwrap();
    let out = deepstdp(&[
        "train",
        "--config",
        s(&cfg),
        "--data",
        s(dir.path()),
        "--log",
        "x",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}
