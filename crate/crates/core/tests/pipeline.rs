//! End-to-end runs of the command-line pipeline on small settings.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;

use trustgraph::cli::{self, Cli};
use trustgraph::eval::{train_and_score, Protocol};
use trustgraph::io::{generate_synthetic, load_checkpoint, load_dataset, SynthKnobs};
use trustgraph::relations::RelationConfig;
use trustgraph::trainer::TrainConfig;

fn run(args: &[&str]) -> trustgraph::Result<()> {
    cli::run(
        Cli::try_parse_from(std::iter::once("trustgraph").chain(args.iter().copied())).unwrap(),
    )
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

const SMALL: [&str; 4] = ["--set", "dim=16", "--epochs", "3"];

fn synth(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    run(&["synth", "--n", "30", "--seed", "2", "--out", &s(&data)]).unwrap();
    data
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let model = tmp.path().join("model");
    let graph = tmp.path().join("graph.json");
    run(&["build", "--data", &s(&data), "--out", &s(&graph)]).unwrap();
    let (d, m) = (s(&data), s(&model));
    let mut args = vec!["train", "--data", &d, "--out", &m];
    args.extend(SMALL);
    run(&args).unwrap();
    for f in [
        "loss.csv",
        "report.json",
        "checkpoint.bin",
        "embeddings.csv",
        "metadata.json",
        "train.manifest.json",
    ] {
        assert!(model.join(f).exists(), "missing {f}");
    }
    assert_eq!(
        fs::read_to_string(model.join("loss.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );

    let ckpt = s(&model.join("checkpoint.bin"));
    run(&[
        "rank",
        "--checkpoint",
        &ckpt,
        "--data",
        &d,
        "--initiator",
        "3",
        "--top",
        "5",
    ])
    .unwrap();
    let ranking = fs::read_to_string(model.join("ranking.csv")).unwrap();
    assert_eq!(
        ranking.lines().next(),
        Some("initiator,rank,device_id,trust")
    );
    assert_eq!(ranking.lines().count(), 6);

    for kind in ["ss", "hist", "project"] {
        run(&[
            "eval",
            kind,
            "--checkpoint",
            &ckpt,
            "--data",
            &d,
            "--initiator",
            "3",
            "--top",
            "4",
        ])
        .unwrap();
    }
    for f in [
        "ss.csv",
        "histogram.csv",
        "projection.csv",
        "eval-ss.manifest.json",
        "eval-projection.manifest.json",
    ] {
        assert!(model.join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(model.join("rank.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "rank");
}

#[test]
fn untrained_checkpoint_ranks() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let model = tmp.path().join("init");
    let (d, m) = (s(&data), s(&model));
    run(&[
        "train",
        "--data",
        &d,
        "--out",
        &m,
        "--untrained",
        "--set",
        "dim=16",
    ])
    .unwrap();
    assert!(!model.join("loss.csv").exists());
    let ckpt = load_checkpoint(model.join("checkpoint.bin")).unwrap();
    assert_eq!(ckpt.params.output_dim(), 16);
    run(&[
        "rank",
        "--checkpoint",
        &s(&model.join("checkpoint.bin")),
        "--data",
        &d,
        "--initiator",
        "0",
    ])
    .unwrap();
    assert_eq!(
        fs::read_to_string(model.join("ranking.csv"))
            .unwrap()
            .lines()
            .count(),
        30
    );
}

#[test]
fn single_cell_sweep_matches_train_and_score() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let out = tmp.path().join("sweep");
    let (d, o) = (s(&data), s(&out));
    run(&[
        "sweep", "--data", &d, "--grid", "0.3", "--out", &o, "--set", "dim=16", "--epochs", "3",
        "--seed", "5",
    ])
    .unwrap();
    let csv = fs::read_to_string(out.join("sensitivity.csv")).unwrap();
    let cell: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();

    let ds = load_dataset(&data).unwrap();
    let config = TrainConfig {
        dim: 16,
        epochs: 3,
        seed: 5,
        p_a: 0.3,
        p_h: 0.3,
        ..TrainConfig::default()
    };
    let direct = train_and_score(
        &ds,
        &RelationConfig::default(),
        &config,
        &Protocol::default(),
    )
    .unwrap();
    assert_eq!(cell, direct);
}

#[test]
fn config_file_and_env_fallback() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# small\ndim=8\nepochs=2\nactivation=tanh\n").unwrap();
    let model = tmp.path().join("model");
    let (d, m, c) = (s(&data), s(&model), s(&cfg));
    run(&["train", "--data", &d, "--out", &m, "--config", &c]).unwrap();
    let ckpt = load_checkpoint(model.join("checkpoint.bin")).unwrap();
    assert!(ckpt.config.contains("activation=tanh"));
    assert_eq!(ckpt.params.output_dim(), 8);

    fs::write(&cfg, "dim=8\nbogus\n").unwrap();
    let err = run(&["train", "--data", &d, "--out", &m, "--config", &c]).unwrap_err();
    assert!(err.to_string().contains(":2:"), "{err}");
}

#[test]
fn bad_inputs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let d = s(&data);
    let junk = tmp.path().join("junk.bin");
    fs::write(&junk, b"not a checkpoint").unwrap();
    assert!(run(&[
        "rank",
        "--checkpoint",
        &s(&junk),
        "--data",
        &d,
        "--initiator",
        "0"
    ])
    .is_err());
    assert!(run(&[
        "train",
        "--data",
        &s(&tmp.path().join("missing")),
        "--out",
        &d
    ])
    .is_err());
    assert!(run(&["sweep", "--data", &d, "--grid", "0.5,1.5", "--out", &d]).is_err());
}

#[test]
fn synthetic_export_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    let expected = generate_synthetic(30, 2, &SynthKnobs::default()).unwrap();
    assert_eq!(load_dataset(&data).unwrap(), expected);
}
