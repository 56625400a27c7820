//! `trustgraph` command line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, CONFIG_ENV};
use crate::error::{Error, Result};
use crate::eval::{
    default_bin_edges, histogram_csv, node_count_experiment, pca_2d, projection_csv, scaling_csv,
    sensitivity_sweep, trust_cluster_labels, trust_cluster_ss, trust_distribution, write_csv,
    Protocol, SsSpace,
};
use crate::hgnn::HgnnParams;
use crate::hypergraph::Hypergraph;
use crate::io::{
    embeddings_csv, export_dataset, generate_synthetic, load_checkpoint, load_dataset,
    loss_history_csv, ranking_csv, save_checkpoint, write_atomic, Checkpoint, Dataset,
    RankingReport, RunManifest, SynthKnobs, BENCHMARK_DEVICES, BENCHMARK_SEED,
};
use crate::relations::build_all;
use crate::trainer::{infer_embeddings, init_params, train};
use crate::trust::rank;

#[derive(Debug, Parser)]
#[command(
    name = "trustgraph",
    version,
    about = "Hypergraph trust evaluation for device collaboration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Build the relationship hypergraph and write it as JSON.
    Build(BuildArgs),
    /// Train embeddings and write a checkpoint.
    Train(TrainArgs),
    /// Rank collaborators of an initiator.
    Rank(RankArgs),
    /// Evaluation outputs: ss, hist or project.
    Eval(EvalArgs),
    /// Masking-probability sensitivity grid.
    Sweep(SweepArgs),
    /// Node-count scaling experiment.
    Scale(ScaleArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// key=value config file; defaults to $TRUSTGRAPH_CONFIG when set.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set epochs=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<(RunConfig, Option<PathBuf>)> {
        let path = self
            .config
            .clone()
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        let mut c = match &path {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            c.set(k.trim(), v)?;
        }
        if let Some(e) = self.epochs {
            c.train.epochs = e;
        }
        if let Some(s) = self.seed {
            c.train.seed = s;
        }
        c.validate()?;
        Ok((c, path))
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = BENCHMARK_DEVICES)]
    pub n: usize,
    #[arg(long, default_value_t = BENCHMARK_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub friend_prob: Option<f64>,
    #[arg(long)]
    pub link_prob: Option<f64>,
    #[arg(long)]
    pub n_collabs: Option<usize>,
    #[arg(long)]
    pub n_types: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Write the initial random parameters without training.
    #[arg(long)]
    pub untrained: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub initiator: usize,
    /// Keep only the K most trusted devices in the CSV.
    #[arg(long)]
    pub top: Option<usize>,
    /// Output directory; defaults to the checkpoint's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalKind {
    Ss,
    Hist,
    Project,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(value_enum)]
    pub kind: EvalKind,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub initiator: usize,
    #[arg(long, default_value_t = 8)]
    pub top: usize,
    /// Silhouette space: embedding (cosine) or pca2d (euclidean).
    #[arg(long, default_value = "embedding")]
    pub space: SsSpace,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// `start:stop:step` or a comma list of probabilities.
    #[arg(long, default_value = "0.1:0.9:0.1")]
    pub grid: String,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 5)]
    pub initiator: usize,
    #[arg(long, default_value_t = 8)]
    pub top: usize,
    #[arg(long, default_value = "embedding")]
    pub space: SsSpace,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "30,40,50,60,70")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub initiator: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

/// Parses `start:stop:step` (inclusive) or `a,b,c`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("bad grid {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let values: Vec<f64> = match spec.split(':').collect::<Vec<_>>()[..] {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step <= 0.0 || b < a {
                return Err(bad());
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            // snap to 12 decimals so 0.1 + 2 × 0.1 prints as 0.3
            (0..count)
                .map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12)
                .collect()
        }
        [_] => spec.split(',').map(num).collect::<Result<_>>()?,
        _ => return Err(bad()),
    };
    if values.is_empty() || values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Config(format!(
            "grid {spec:?} must list probabilities in [0, 1]"
        )));
    }
    Ok(values)
}

fn record_config(m: &mut RunManifest, c: &RunConfig, path: &Option<PathBuf>) {
    m.config = c.to_map();
    m.seed = Some(c.train.seed);
    if let Some(p) = path {
        m.input("config", p);
    }
}

fn load_graph(data: &Path, config: &RunConfig) -> Result<(Dataset, Hypergraph)> {
    let ds = load_dataset(data)?;
    let g = build_all(&ds, &config.relations)?;
    Ok((ds, g))
}

fn out_dir(out: &Option<PathBuf>, checkpoint: &Path) -> PathBuf {
    out.clone().unwrap_or_else(|| match checkpoint.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    })
}

/// Loads a checkpoint and the graph it was trained on.
fn restore(checkpoint: &Path, data: &Path) -> Result<(RunConfig, HgnnParams<f64>, Hypergraph)> {
    let ckpt = load_checkpoint(checkpoint)?;
    let config = RunConfig::parse(&ckpt.config)?;
    let (_, g) = load_graph(data, &config)?;
    if ckpt.params.input_dim() != g.num_devices() {
        return Err(Error::Checkpoint(format!(
            "checkpoint expects {} devices, dataset has {}",
            ckpt.params.input_dim(),
            g.num_devices()
        )));
    }
    Ok((config, ckpt.params, g))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Build(a) => build(a),
        Command::Train(a) => train_cmd(a),
        Command::Rank(a) => rank_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Scale(a) => scale_cmd(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut knobs = SynthKnobs::default();
    if let Some(v) = a.friend_prob {
        knobs.friend_prob = v;
    }
    if let Some(v) = a.link_prob {
        knobs.link_prob = v;
    }
    if let Some(v) = a.n_collabs {
        knobs.n_collabs = v;
    }
    if let Some(v) = a.n_types {
        knobs.n_types = v;
    }
    let ds = generate_synthetic(a.n, a.seed, &knobs)?;
    export_dataset(&ds, &a.out)?;

    let mut m = RunManifest::new("synth");
    m.seed = Some(a.seed);
    m.config.insert("n".into(), a.n.to_string());
    if let serde_json::Value::Object(map) = serde_json::to_value(knobs)? {
        for (k, v) in map {
            m.config.insert(k, v.to_string());
        }
    }
    for f in crate::io::DATASET_FILES {
        m.output(f, a.out.join(f))?;
    }
    m.write(a.out.join("synth.manifest.json"))?;
    println!("wrote {} devices to {}", ds.num_devices(), a.out.display());
    Ok(())
}

fn build(a: BuildArgs) -> Result<()> {
    let (config, path) = a.config.resolve()?;
    let (_, g) = load_graph(&a.data, &config)?;
    let mut text = serde_json::to_string_pretty(&g)?;
    text.push('\n');
    write_atomic(&a.out, text.as_bytes())?;

    for (kind, count) in g.kind_counts() {
        println!("{kind}\t{count}");
    }
    println!("total\t{}", g.num_hyperedges());

    let mut m = RunManifest::new("build");
    record_config(&mut m, &config, &path);
    m.input("data", &a.data);
    m.output("graph", &a.out)?;
    m.write(out_dir(&None, &a.out).join("build.manifest.json"))
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let (config, path) = a.config.resolve()?;
    let (_, g) = load_graph(&a.data, &config)?;
    let out = &a.out;

    let mut m = RunManifest::new("train");
    record_config(&mut m, &config, &path);
    m.input("data", &a.data);

    let params = if a.untrained {
        init_params::<f64>(g.num_devices(), &config.train)?
    } else {
        let report = train::<f64>(&g, &config.train)?;
        eprintln!(
            "trained {} epochs in {:.2}s, loss {:.6e} -> {:.6e}",
            report.history.len(),
            report.duration.as_secs_f64(),
            report.history[0].total,
            report.history.last().unwrap().total
        );
        write_atomic(
            out.join("loss.csv"),
            loss_history_csv(&report.history).as_bytes(),
        )?;
        let summary = serde_json::json!({
            "config": config.to_map(),
            "seed": report.seed,
            "epochs": report.history.len(),
            "history": report.history,
        });
        write_atomic(
            out.join("report.json"),
            (serde_json::to_string_pretty(&summary)? + "\n").as_bytes(),
        )?;
        m.output("loss", out.join("loss.csv"))?;
        m.output("report", out.join("report.json"))?;
        report.params
    };

    let ckpt = Checkpoint {
        config: config.to_kv(),
        params,
    };
    save_checkpoint(out.join("checkpoint.bin"), &ckpt)?;
    let emb = infer_embeddings(&g, &ckpt.params, config.train.activation)?;
    write_atomic(
        out.join("embeddings.csv"),
        embeddings_csv(&emb.devices).as_bytes(),
    )?;
    let meta = serde_json::json!({ "config": config.to_map(), "seed": config.train.seed, "untrained": a.untrained });
    write_atomic(
        out.join("metadata.json"),
        (serde_json::to_string_pretty(&meta)? + "\n").as_bytes(),
    )?;

    m.output("checkpoint", out.join("checkpoint.bin"))?;
    m.output("embeddings", out.join("embeddings.csv"))?;
    m.output("metadata", out.join("metadata.json"))?;
    m.write(out.join("train.manifest.json"))
}

fn rank_cmd(a: RankArgs) -> Result<()> {
    let (config, params, g) = restore(&a.checkpoint, &a.data)?;
    let emb = infer_embeddings(&g, &params, config.train.activation)?;
    let ranking = rank(a.initiator, &emb.devices)?;
    let out = out_dir(&a.out, &a.checkpoint);

    write_atomic(
        out.join("ranking.csv"),
        ranking_csv(&ranking, a.top).as_bytes(),
    )?;
    let report = RankingReport {
        ranking: ranking.clone(),
        config: config.to_map(),
        seed: config.train.seed,
    };
    write_atomic(
        out.join("ranking.json"),
        (serde_json::to_string_pretty(&report)? + "\n").as_bytes(),
    )?;
    for (i, e) in ranking
        .top(a.top.unwrap_or(ranking.entries.len()))
        .iter()
        .enumerate()
    {
        println!("{}\t{}\t{:.6}", i + 1, e.device, e.trust);
    }

    let mut m = RunManifest::new("rank");
    record_config(&mut m, &config, &None);
    m.input("checkpoint", &a.checkpoint);
    m.input("data", &a.data);
    m.config.insert("initiator".into(), a.initiator.to_string());
    m.output("ranking_csv", out.join("ranking.csv"))?;
    m.output("ranking_json", out.join("ranking.json"))?;
    m.write(out.join("rank.manifest.json"))
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let (config, params, g) = restore(&a.checkpoint, &a.data)?;
    let emb = infer_embeddings(&g, &params, config.train.activation)?;
    let x = &emb.devices;
    let out = out_dir(&a.out, &a.checkpoint);

    let mut m = RunManifest::new("eval");
    record_config(&mut m, &config, &None);
    m.input("checkpoint", &a.checkpoint);
    m.input("data", &a.data);
    m.config.insert("initiator".into(), a.initiator.to_string());

    let (name, file) = match a.kind {
        EvalKind::Ss => {
            let ss = trust_cluster_ss(x, a.initiator, a.top, a.space)?;
            println!("{ss:.6}");
            let body = format!(
                "initiator,top_k,space,ss\n{},{},{},{ss:?}\n",
                a.initiator, a.top, a.space
            );
            m.config.insert("space".into(), a.space.to_string());
            m.config.insert("top_k".into(), a.top.to_string());
            ("ss", write_eval(&out, "ss.csv", &body)?)
        }
        EvalKind::Hist => {
            let bins = trust_distribution(x, a.initiator, &default_bin_edges())?;
            (
                "histogram",
                write_eval(&out, "histogram.csv", &histogram_csv(&bins))?,
            )
        }
        EvalKind::Project => {
            let labels = trust_cluster_labels(x, a.initiator, a.top)?;
            let p = pca_2d(x)?;
            m.config.insert("top_k".into(), a.top.to_string());
            (
                "projection",
                write_eval(&out, "projection.csv", &projection_csv(&p, &labels))?,
            )
        }
    };
    m.output(name, &file)?;
    m.write(out.join(format!("eval-{name}.manifest.json")))
}

fn write_eval(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    write_csv(&path, body)?;
    Ok(path)
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let (config, path) = a.config.resolve()?;
    let ds = load_dataset(&a.data)?;
    let grid = parse_grid(&a.grid)?;
    let protocol = Protocol {
        initiator: a.initiator,
        top_k: a.top,
        space: a.space,
    };
    let result = sensitivity_sweep(
        &ds,
        &config.relations,
        &config.train,
        &grid,
        &protocol,
        a.workers,
    )?;
    let file = a.out.join("sensitivity.csv");
    write_csv(&file, &result.to_csv())?;
    print!("{}", result.to_csv());

    let mut m = RunManifest::new("sweep");
    record_config(&mut m, &config, &path);
    m.input("data", &a.data);
    m.config.insert("grid".into(), a.grid.clone());
    m.config.insert("initiator".into(), a.initiator.to_string());
    m.config.insert("top_k".into(), a.top.to_string());
    m.output("sensitivity", &file)?;
    m.write(a.out.join("sweep.manifest.json"))
}

fn scale_cmd(a: ScaleArgs) -> Result<()> {
    let (config, path) = a.config.resolve()?;
    let ds = load_dataset(&a.data)?;
    let rows = node_count_experiment(&ds, &a.sizes, &config.relations, &config.train, a.initiator)?;
    let file = a.out.join("scaling.csv");
    write_csv(&file, &scaling_csv(&rows))?;
    print!("{}", scaling_csv(&rows));

    let mut m = RunManifest::new("scale");
    record_config(&mut m, &config, &path);
    m.input("data", &a.data);
    m.config.insert("initiator".into(), a.initiator.to_string());
    m.output("scaling", &file)?;
    m.write(a.out.join("scale.manifest.json"))
}
