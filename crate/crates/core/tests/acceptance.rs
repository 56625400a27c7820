//! Acceptance suite. Runs every criterion, prints one line each, and fails
//! the process if any criterion failed.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trustgraph::augment::{
    make_views, mask_devices, mask_memberships, AugmentedView, MaskedIncidence,
};
use trustgraph::cli::{self, Cli};
use trustgraph::eval::{
    sensitivity_sweep, silhouette_score, trust_cluster_ss, Metric, Protocol, SsSpace,
};
use trustgraph::hgnn::{forward, forward_tape, Activation, HgnnParams};
use trustgraph::io::benchmark_dataset;
use trustgraph::numerics::{
    evaluate_with_gradients, finite_difference_gradient, max_relative_error, Matrix, Tape, Var,
};
use trustgraph::objective::{normalize_embeddings, ssl_loss_tape};
use trustgraph::relations::{build_all, RelationConfig};
use trustgraph::trainer::{
    epoch_rng, identity_features, infer_embeddings, init_params, train, TrainConfig,
};
use trustgraph::trust::{select_collaborator, trust};
use trustgraph::{Hypergraph, Rational, RelationKind};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const KINDS: [RelationKind; 6] = [
    RelationKind::Net,
    RelationKind::Phy,
    RelationKind::His,
    RelationKind::Res,
    RelationKind::Int,
    RelationKind::Fri,
];

/// Random graph plus the raw edge list it was built from (no duplicates).
fn random_graph(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    max_members: usize,
) -> (Hypergraph, Vec<(Vec<usize>, f64)>) {
    let mut g = Hypergraph::new(n);
    let mut seen = BTreeSet::new();
    let mut raw = Vec::new();
    while raw.len() < m {
        let size = rng.gen_range(1..=max_members.min(n));
        let members: BTreeSet<usize> = (0..size).map(|_| rng.gen_range(0..n)).collect();
        let members: Vec<usize> = members.into_iter().collect();
        if !seen.insert(members.clone()) {
            continue;
        }
        let weight = if rng.gen_bool(0.2) {
            0.0
        } else {
            rng.gen_range(1..=3) as f64
        };
        g.add_hyperedge(members.iter().copied(), weight, KINDS[raw.len() % 6])
            .unwrap();
        raw.push((members, weight));
    }
    (g, raw)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.gen_range(-scale..scale))
            .collect(),
    )
    .unwrap()
}

fn gradient_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (g, _) = random_graph(&mut rng, 5, 6, 3);
    let config = TrainConfig {
        dim: 4,
        layers: 2,
        ..TrainConfig::default()
    };
    let x = identity_features::<f64>(5);
    let (v1, v2) = make_views(&g, &x, config.p_a, config.p_h, &mut epoch_rng(3, 0)).map_err(err)?;
    let params = init_params::<f64>(5, &config).map_err(err)?.to_flat();
    let w = config.loss_weights();
    let loss = |tape: &mut Tape<f64>, vars: &[Var]| {
        let layers: Vec<(Var, Var)> = vars.chunks(2).map(|c| (c[0], c[1])).collect();
        let (a1, e1) = forward_tape(tape, &v1, &layers, Activation::Relu)?;
        let (a2, e2) = forward_tape(tape, &v2, &layers, Activation::Relu)?;
        Ok(ssl_loss_tape(tape, (a1, e1), (a2, e2), vars, &w)?.total)
    };
    let (_, analytic) = evaluate_with_gradients(loss, &params).map_err(err)?;
    let numeric = finite_difference_gradient(loss, &params, 1e-5).map_err(err)?;
    let rel = max_relative_error(&analytic, &numeric, 1e-6);
    let entries: usize = params.iter().map(Matrix::len).sum();
    let elapsed = started.elapsed();
    check(rel < 1e-4, format!("max relative error {rel:.3e}"))?;
    check(
        elapsed < Duration::from_secs(5),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "{entries} entries, max rel err {rel:.2e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn normalization_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut worst_mean, mut worst_std) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.gen_range(2..40);
        let d = rng.gen_range(1..20);
        let shift = rng.gen_range(-5.0..5.0);
        let x = random_matrix(&mut rng, n, d, 3.0).map(|v| v + shift);
        let z = normalize_embeddings(&x).map_err(err)?;
        for c in 0..d {
            let col: Vec<f64> = (0..n).map(|r| *z.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            worst_mean = worst_mean.max(mean.abs());
            worst_std = worst_std.max((var.sqrt() - 1.0 / (n as f64).sqrt()).abs());
        }
    }
    check(worst_mean < 1e-8, format!("column mean {worst_mean:.3e}"))?;
    check(
        worst_std < 1e-6,
        format!("std deviation from 1/sqrt(n) {worst_std:.3e}"),
    )?;
    Ok(format!(
        "100 matrices, |mean| <= {worst_mean:.1e}, |std - 1/sqrt n| <= {worst_std:.1e}"
    ))
}

fn brute_silhouette(points: &[Vec<f64>], labels: &[usize], metric: Metric) -> f64 {
    let dist = |a: &[f64], b: &[f64]| match metric {
        Metric::Euclidean => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        Metric::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            let cos = if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                dot / (na * nb).max(1e-12)
            };
            1.0 - cos.clamp(-1.0, 1.0)
        }
    };
    let classes: BTreeSet<usize> = labels.iter().copied().collect();
    let mut s = 0.0;
    for i in 0..points.len() {
        let mean_to = |c: usize| {
            let others: Vec<usize> = (0..points.len())
                .filter(|&j| j != i && labels[j] == c)
                .collect();
            others
                .iter()
                .map(|&j| dist(&points[i], &points[j]))
                .sum::<f64>()
                / others.len() as f64
        };
        let a = mean_to(labels[i]);
        let b = classes
            .iter()
            .filter(|&&c| c != labels[i])
            .map(|&c| mean_to(c))
            .fold(f64::INFINITY, f64::min);
        if a.max(b) > 0.0 {
            s += (b - a) / a.max(b);
        }
    }
    s / points.len() as f64
}

fn degree_and_silhouette_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst_ss = 0.0f64;
    for case in 0..100 {
        let n = rng.gen_range(2..=10);
        let m = rng.gen_range(1..=5usize.min((1 << n) - 1));
        let (g, raw) = random_graph(&mut rng, n, m, n);
        let mut dev = vec![0.0; n];
        for (members, w) in &raw {
            for &v in members {
                dev[v] += w;
            }
        }
        let edge: Vec<f64> = raw
            .iter()
            .map(|(members, _)| members.len() as f64)
            .collect();
        check(
            g.device_degrees() == dev,
            format!("case {case}: device degrees"),
        )?;
        check(
            g.hyperedge_degrees() == edge,
            format!("case {case}: hyperedge degrees"),
        )?;

        let points_n = rng.gen_range(4..=12);
        let dim = rng.gen_range(1..=4);
        let k = rng.gen_range(2..=(points_n / 2).min(4));
        let mut labels: Vec<usize> = (0..points_n).map(|i| i % k).collect();
        for i in (1..points_n).rev() {
            labels.swap(i, rng.gen_range(0..=i));
        }
        let points: Vec<Vec<f64>> = (0..points_n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        for metric in [Metric::Euclidean, Metric::Cosine] {
            let got = silhouette_score(&points, &labels, metric).map_err(err)?;
            let want = brute_silhouette(&points, &labels, metric);
            worst_ss = worst_ss.max((got - want).abs());
        }
    }
    check(
        worst_ss <= 1e-12,
        format!("silhouette off by {worst_ss:.3e}"),
    )?;
    Ok(format!(
        "100 instances, degrees exact, silhouette within {worst_ss:.1e}"
    ))
}

fn masking_statistics() -> Outcome {
    const TRIALS: usize = 10_000;
    let ones = Matrix::filled(TRIALS, 1, 1.0f64);
    // 100 distinct hyperedges of 100 members each: 10,000 memberships.
    let mut g = Hypergraph::new(101);
    for e in 0..100usize {
        g.add_hyperedge((0..101).filter(|&v| v != e), 1.0, RelationKind::Int)
            .map_err(err)?;
    }
    let total = g.num_memberships();
    let mut report = Vec::new();
    for (i, &p) in [0.1, 0.5, 0.9].iter().enumerate() {
        let mut r = ChaCha8Rng::seed_from_u64(14 + i as u64);
        let masked = mask_devices(&ones, p, &mut r).map_err(err)?;
        let dev_frac =
            masked.as_slice().iter().filter(|v| **v == 0.0).count() as f64 / TRIALS as f64;
        let kept = mask_memberships(&g, p, &mut r)
            .map_err(err)?
            .num_memberships();
        let mem_frac = (total - kept) as f64 / total as f64;
        let tol_dev = 3.0 * (p * (1.0 - p) / TRIALS as f64).sqrt();
        let tol_mem = 3.0 * (p * (1.0 - p) / total as f64).sqrt();
        check(
            (dev_frac - p).abs() <= tol_dev,
            format!("device fraction {dev_frac} at p={p}"),
        )?;
        check(
            (mem_frac - p).abs() <= tol_mem,
            format!("membership fraction {mem_frac} at p={p}"),
        )?;
        report.push(format!("p={p}: {dev_frac:.4}/{mem_frac:.4}"));
    }
    let mut r = ChaCha8Rng::seed_from_u64(17);
    let x = random_matrix(&mut r, 50, 7, 1.0);
    check(
        mask_devices(&x, 0.0, &mut r).map_err(err)? == x,
        "p=0 changed features",
    )?;
    check(
        mask_devices(&x, 1.0, &mut r).map_err(err)? == Matrix::zeros(50, 7),
        "p=1 left features",
    )?;
    check(
        mask_memberships(&g, 0.0, &mut r).map_err(err)? == MaskedIncidence::from_graph(&g),
        "p=0 changed memberships",
    )?;
    check(
        mask_memberships(&g, 1.0, &mut r)
            .map_err(err)?
            .num_memberships()
            == 0,
        "p=1 left memberships",
    )?;
    Ok(format!("{}, extremes exact", report.join(", ")))
}

struct Benchmark {
    graph: Hypergraph,
    config: TrainConfig,
}

fn benchmark() -> Benchmark {
    let ds = benchmark_dataset().expect("benchmark dataset");
    Benchmark {
        graph: build_all(&ds, &RelationConfig::default()).expect("benchmark graph"),
        config: TrainConfig::default(),
    }
}

fn training_descent(b: &Benchmark) -> Outcome {
    let started = Instant::now();
    let report = train::<f64>(&b.graph, &b.config).map_err(err)?;
    let elapsed = started.elapsed();
    let first = report.history[0].total;
    let last = report.history.last().unwrap().total;
    let ratio = last / first;
    check(
        ratio < 0.5,
        format!("loss {first:.1} -> {last:.1}, ratio {ratio:.3}"),
    )?;
    check(
        elapsed < Duration::from_secs(300),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "{} epochs, loss {first:.1} -> {last:.1} (ratio {ratio:.3}), {:.1}s",
        report.history.len(),
        elapsed.as_secs_f64()
    ))
}

fn trust_separation(b: &Benchmark) -> Outcome {
    let mut wins = 0;
    let mut cells = Vec::new();
    for seed in 0..5 {
        let config = TrainConfig {
            seed,
            ..b.config.clone()
        };
        let report = train::<f64>(&b.graph, &config).map_err(err)?;
        let trained = infer_embeddings(&b.graph, &report.params, config.activation).map_err(err)?;
        let untrained = infer_embeddings(
            &b.graph,
            &init_params::<f64>(b.graph.num_devices(), &config).map_err(err)?,
            config.activation,
        )
        .map_err(err)?;
        let ss = trust_cluster_ss(&trained.devices, 5, 8, SsSpace::Embedding).map_err(err)?;
        let ss0 = trust_cluster_ss(&untrained.devices, 5, 8, SsSpace::Embedding).map_err(err)?;
        if ss > ss0 {
            wins += 1;
        }
        cells.push(format!("{ss:.3}/{ss0:.3}"));
    }
    let summary = format!("{wins}/5 seeds, trained/untrained SS {}", cells.join(" "));
    check(wins == 5, summary.clone())?;
    Ok(summary)
}

fn sensitivity_shape() -> Outcome {
    let started = Instant::now();
    let ds = benchmark_dataset().map_err(err)?;
    let config = TrainConfig {
        epochs: 50,
        ..TrainConfig::default()
    };
    let grid = [0.1, 0.4, 0.5, 0.7, 0.9];
    let sweep = sensitivity_sweep(
        &ds,
        &RelationConfig::default(),
        &config,
        &grid,
        &Protocol::default(),
        1,
    )
    .map_err(err)?;
    let inner = |p: f64| (0.4..=0.7).contains(&p);
    let edge = |p: f64| p == 0.1 || p == 0.9;
    let mid = sweep
        .mean_where(|a, h| inner(a) && inner(h))
        .ok_or("no inner cells")?;
    let outer = sweep
        .mean_where(|a, h| edge(a) || edge(h))
        .ok_or("no edge cells")?;
    let elapsed = started.elapsed();
    let summary = format!(
        "mean SS inner {mid:.3} vs edge {outer:.3}, {:.0}s",
        elapsed.as_secs_f64()
    );
    check(mid >= outer, summary.clone())?;
    check(
        elapsed < Duration::from_secs(1800),
        format!("took {elapsed:?}"),
    )?;
    Ok(summary)
}

fn trust_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for i in 0..1000 {
        let d = rng.gen_range(1..=16);
        let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
        check(
            (trust(&a, &b) - trust(&b, &a)).abs() <= 1e-12,
            format!("pair {i}: asymmetric"),
        )?;
        check(
            (trust(&a, &a) - 1.0).abs() <= 1e-12,
            format!("pair {i}: self trust {}", trust(&a, &a)),
        )?;

        let mut rows = vec![a, b];
        rows.extend((0..4).map(|_| {
            (0..d)
                .map(|_| rng.gen_range(-10.0..10.0))
                .collect::<Vec<f64>>()
        }));
        let x = Matrix::from_rows(&rows).map_err(err)?;
        let c = 10f64.powf(rng.gen_range(-3.0..3.0));
        let before = select_collaborator(0, &x).map_err(err)?;
        let after = select_collaborator(0, &x.scale(&c)).map_err(err)?;
        check(
            before.device == after.device,
            format!("pair {i}: argmax moved under scale {c}"),
        )?;
        check(
            (before.trust - after.trust).abs() <= 1e-12,
            format!("pair {i}: trust moved under scale {c}"),
        )?;
    }
    Ok("1000 pairs: symmetric, self trust 1, argmax scale invariant".into())
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    cli::run(
        Cli::try_parse_from(std::iter::once("trustgraph").chain(args.iter().copied()))
            .map_err(err)?,
    )
    .map_err(err)
}

fn pipeline(dir: &Path) -> Result<Vec<u8>, String> {
    let p = |s: &str| dir.join(s).to_string_lossy().into_owned();
    let (data, graph, model) = (p("data"), p("graph.json"), p("model"));
    run_cli(&["synth", "--seed", "4", "--out", &data])?;
    run_cli(&["build", "--data", &data, "--out", &graph])?;
    run_cli(&[
        "train", "--data", &data, "--out", &model, "--epochs", "5", "--seed", "9",
    ])?;
    let ckpt = format!("{model}/checkpoint.bin");
    let ranking = p("ranking");
    run_cli(&[
        "rank",
        "--checkpoint",
        &ckpt,
        "--data",
        &data,
        "--initiator",
        "5",
        "--top",
        "10",
        "--out",
        &ranking,
    ])?;
    std::fs::read(format!("{ranking}/ranking.csv")).map_err(err)
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    let first = pipeline(a.path())?;
    let second = pipeline(b.path())?;
    check(!first.is_empty(), "empty ranking")?;
    check(first == second, "ranking CSVs differ")?;
    Ok(format!("two runs, {} identical bytes", first.len()))
}

fn permutation_equivariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for case in 0..30 {
        let n = 5;
        let m = rng.gen_range(2..=6);
        let (g, raw) = random_graph(&mut rng, n, m, 4);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let mut gp = Hypergraph::new(n);
        for (e, (members, w)) in raw.iter().enumerate() {
            gp.add_hyperedge(members.iter().map(|&v| perm[v]), *w, KINDS[e % 6])
                .map_err(err)?;
        }
        let d_in = 3;
        let x: Matrix<Rational> = random_matrix(&mut rng, n, d_in, 2.0).cast();
        let mut xp = x.clone();
        for v in 0..n {
            xp.row_mut(perm[v]).clone_from_slice(x.row(v));
        }
        let params: HgnnParams<Rational> = HgnnParams::<f64>::init(d_in, 4, 2, case)
            .map_err(err)?
            .cast();
        for act in [Activation::Relu, Activation::Identity] {
            let out = forward(
                &AugmentedView::clean(&g, x.clone()).map_err(err)?,
                &params,
                act,
            )
            .map_err(err)?;
            let outp = forward(
                &AugmentedView::clean(&gp, xp.clone()).map_err(err)?,
                &params,
                act,
            )
            .map_err(err)?;
            for v in 0..n {
                check(
                    out.devices.row(v) == outp.devices.row(perm[v]),
                    format!("case {case}: device {v} ({act})"),
                )?;
            }
            check(
                out.hyperedges == outp.hyperedges,
                format!("case {case}: hyperedges ({act})"),
            )?;
        }
    }
    Ok("30 rational instances, exact".into())
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored.
    let bench = benchmark();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("gradient oracle", Box::new(gradient_oracle)),
        ("normalization contract", Box::new(normalization_contract)),
        (
            "degree and silhouette oracles",
            Box::new(degree_and_silhouette_oracles),
        ),
        ("masking statistics", Box::new(masking_statistics)),
        ("training descent", Box::new(|| training_descent(&bench))),
        ("trust separation", Box::new(|| trust_separation(&bench))),
        ("sensitivity shape", Box::new(sensitivity_shape)),
        ("trust exactness", Box::new(trust_exactness)),
        ("determinism", Box::new(determinism)),
        (
            "permutation equivariance",
            Box::new(permutation_equivariance),
        ),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("acceptance {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("acceptance {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
