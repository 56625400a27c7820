//! Evaluation protocol: silhouette scores, trust histograms, the masking
//! sensitivity grid, the node-count experiment and a 2-D PCA projection.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_atomic, Dataset};
use crate::numerics::Matrix;
use crate::relations::{build_all, RelationConfig};
use crate::scalar::Real;
use crate::trainer::{infer_embeddings, train, TrainConfig};
use crate::trust::{rank, select_collaborator, trust};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Cosine => 1.0 - trust(a, b),
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Where [`trust_cluster_ss`] measures distances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SsSpace {
    /// Full embedding rows, cosine distance.
    #[default]
    Embedding,
    /// [`pca_2d`] coordinates, euclidean distance.
    Pca2d,
}

impl fmt::Display for SsSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SsSpace::Embedding => "embedding",
            SsSpace::Pca2d => "pca2d",
        })
    }
}

impl FromStr for SsSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(SsSpace::Embedding),
            "pca2d" | "pca" => Ok(SsSpace::Pca2d),
            other => Err(Error::InvalidArgument(format!(
                "unknown silhouette space '{other}'"
            ))),
        }
    }
}

/// Mean silhouette `(b − a) / max(a, b)` over all points.
///
/// Every label class needs at least two members and at least two classes
/// must be present.
pub fn silhouette_score(points: &[Vec<f64>], labels: &[usize], metric: Metric) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "silhouette: {} points but {} labels",
            points.len(),
            labels.len()
        )));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; classes];
    for &l in labels {
        sizes[l] += 1;
    }
    let present: Vec<usize> = (0..classes).filter(|&c| sizes[c] > 0).collect();
    if present.len() < 2 {
        return Err(Error::InvalidArgument(
            "silhouette needs at least two classes".into(),
        ));
    }
    if let Some(&c) = present.iter().find(|&&c| sizes[c] < 2) {
        return Err(Error::InvalidArgument(format!(
            "silhouette class {c} has fewer than 2 members"
        )));
    }

    let n = points.len();
    let mut total = 0.0;
    let mut sums = vec![0.0; classes];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[labels[j]] += metric.distance(&points[i], &points[j]);
            }
        }
        let own = labels[i];
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = present
            .iter()
            .filter(|&&c| c != own)
            .map(|&c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

fn rows_f64<T: Real>(x: &Matrix<T>) -> Vec<Vec<f64>> {
    (0..x.rows())
        .map(|r| x.row(r).iter().map(|v| v.to_f64_lossy()).collect())
        .collect()
}

/// Labels: 1 for the initiator and its `k` most trusted devices, 0 otherwise.
pub fn trust_cluster_labels<T: Real>(
    x: &Matrix<T>,
    initiator: usize,
    k: usize,
) -> Result<Vec<usize>> {
    let ranking = rank(initiator, x)?;
    if k == 0 || k + 1 >= x.rows() {
        return Err(Error::InvalidArgument(format!(
            "top-k of {k} needs 0 < k < {} devices - 1",
            x.rows()
        )));
    }
    let mut labels = vec![0; x.rows()];
    labels[initiator] = 1;
    for e in ranking.top(k) {
        labels[e.device] = 1;
    }
    Ok(labels)
}

pub fn trust_cluster_ss<T: Real>(
    x: &Matrix<T>,
    initiator: usize,
    k: usize,
    space: SsSpace,
) -> Result<f64> {
    let labels = trust_cluster_labels(x, initiator, k)?;
    match space {
        SsSpace::Embedding => silhouette_score(&rows_f64(x), &labels, Metric::Cosine),
        SsSpace::Pca2d => silhouette_score(
            &rows_f64(&pca_2d(&x.cast::<f64>())?),
            &labels,
            Metric::Euclidean,
        ),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub proportion: f64,
}

/// `[-1.0, -0.9, …, 1.0]`.
pub fn default_bin_edges() -> Vec<f64> {
    (0..=20).map(|i| (i as f64 - 10.0) / 10.0).collect()
}

/// Proportion of non-initiator trust values per `(lo, hi]` bin.
///
/// Values at or below the first edge land in the first bin and values
/// above the last edge in the last bin.
pub fn trust_distribution<T: Real>(
    x: &Matrix<T>,
    initiator: usize,
    edges: &[f64],
) -> Result<Vec<HistogramBin>> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "bin edges must be strictly increasing with at least 2 entries".into(),
        ));
    }
    let ranking = rank(initiator, x)?;
    let bins = edges.len() - 1;
    let mut counts = vec![0usize; bins];
    for e in &ranking.entries {
        counts[edges[1..bins].partition_point(|&edge| edge < e.trust)] += 1;
    }
    let total = ranking.entries.len().max(1) as f64;
    Ok((0..bins)
        .map(|b| HistogramBin {
            lo: edges[b],
            hi: edges[b + 1],
            proportion: counts[b] as f64 / total,
        })
        .collect())
}

/// Evaluation settings shared by the sweep and the scaling experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub initiator: usize,
    pub top_k: usize,
    pub space: SsSpace,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            initiator: 5,
            top_k: 8,
            space: SsSpace::Embedding,
        }
    }
}

/// Trains on `ds` and scores the trust clusters of the clean embeddings.
pub fn train_and_score(
    ds: &Dataset,
    relations: &RelationConfig,
    config: &TrainConfig,
    protocol: &Protocol,
) -> Result<f64> {
    let g = build_all(ds, relations)?;
    let report = train::<f64>(&g, config)?;
    let emb = infer_embeddings(&g, &report.params, config.activation)?;
    trust_cluster_ss(
        &emb.devices,
        protocol.initiator,
        protocol.top_k,
        protocol.space,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityGrid {
    pub p_a: Vec<f64>,
    pub p_h: Vec<f64>,
    /// `ss[i][j]` for `(p_a[i], p_h[j])`; `None` when training failed.
    pub ss: Vec<Vec<Option<f64>>>,
    pub seeds: Vec<Vec<u64>>,
}

impl SensitivityGrid {
    /// Mean over present cells whose `(p_a, p_h)` satisfies `keep`.
    pub fn mean_where(&self, keep: impl Fn(f64, f64) -> bool) -> Option<f64> {
        let mut vals = Vec::new();
        for (i, &pa) in self.p_a.iter().enumerate() {
            for (j, &ph) in self.p_h.iter().enumerate() {
                if let Some(v) = self.ss[i][j] {
                    if keep(pa, ph) {
                        vals.push(v);
                    }
                }
            }
        }
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("p_a,p_h,ss\n");
        for (i, pa) in self.p_a.iter().enumerate() {
            for (j, ph) in self.p_h.iter().enumerate() {
                let v = self.ss[i][j].map(|v| format!("{v:?}")).unwrap_or_default();
                writeln!(s, "{pa:?},{ph:?},{v}").unwrap();
            }
        }
        s
    }
}

/// Seed of grid cell `(i, j)`: `base + i · |p_h| + j`.
pub fn cell_seed(base: u64, i: usize, j: usize, cols: usize) -> u64 {
    base.wrapping_add((i * cols + j) as u64)
}

/// One train + score run per `(p_a, p_h)` cell, up to `workers` at a time.
pub fn sensitivity_sweep(
    ds: &Dataset,
    relations: &RelationConfig,
    config: &TrainConfig,
    p_values: &[f64],
    protocol: &Protocol,
    workers: usize,
) -> Result<SensitivityGrid> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!(
            "grid probability {p} outside [0, 1]"
        )));
    }
    let n = p_values.len();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let run = |&(i, j): &(usize, usize)| -> Option<f64> {
        let cfg = TrainConfig {
            p_a: p_values[i],
            p_h: p_values[j],
            seed: cell_seed(config.seed, i, j, n),
            ..config.clone()
        };
        match train_and_score(ds, relations, &cfg, protocol) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("sweep cell p_a={} p_h={} failed: {e}", cfg.p_a, cfg.p_h);
                None
            }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let values: Vec<Option<f64>> = pool.install(|| cells.par_iter().map(run).collect());

    Ok(SensitivityGrid {
        p_a: p_values.to_vec(),
        p_h: p_values.to_vec(),
        ss: values.chunks(n.max(1)).map(<[_]>::to_vec).collect(),
        seeds: (0..n)
            .map(|i| (0..n).map(|j| cell_seed(config.seed, i, j, n)).collect())
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub size: usize,
    pub selected: usize,
    pub trust: f64,
}

/// For each size: first-`size` devices, rebuilt graph, retrained model,
/// most trusted collaborator of the initiator.
pub fn node_count_experiment(
    ds: &Dataset,
    sizes: &[usize],
    relations: &RelationConfig,
    config: &TrainConfig,
    initiator: usize,
) -> Result<Vec<ScaleRow>> {
    let mut rows = Vec::new();
    for &size in sizes {
        if size < 2 {
            log::warn!("skipping size {size}: fewer than 2 devices");
            continue;
        }
        if size > ds.num_devices() {
            return Err(Error::InvalidArgument(format!(
                "size {size} exceeds the {} devices in the dataset",
                ds.num_devices()
            )));
        }
        if initiator >= size {
            return Err(Error::InvalidDevice {
                id: initiator,
                num_devices: size,
            });
        }
        let sub = ds.truncated(size);
        let g = build_all(&sub, relations)?;
        let report = train::<f64>(&g, config)?;
        let emb = infer_embeddings(&g, &report.params, config.activation)?;
        let best = select_collaborator(initiator, &emb.devices)?;
        rows.push(ScaleRow {
            size,
            selected: best.device,
            trust: best.trust,
        });
    }
    Ok(rows)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Top principal direction of centered `x` orthogonal to `previous`.
fn principal_direction(x: &Matrix<f64>, previous: &[Vec<f64>]) -> Vec<f64> {
    let (n, d) = x.shape();
    let deflate = |v: &mut Vec<f64>| {
        for p in previous {
            let c = dot(v, p);
            v.iter_mut().zip(p).for_each(|(a, b)| *a -= c * b);
        }
    };
    // start from the largest row, which is rarely orthogonal to the answer
    let start = (0..n)
        .max_by(|&a, &b| dot(x.row(a), x.row(a)).total_cmp(&dot(x.row(b), x.row(b))))
        .unwrap_or(0);
    let mut v: Vec<f64> = x.row(start).to_vec();
    deflate(&mut v);
    if normalize(&mut v) < 1e-300 {
        v = (0..d).map(|j| 1.0 + j as f64 / d as f64).collect();
        deflate(&mut v);
        if normalize(&mut v) < 1e-300 {
            return vec![0.0; d];
        }
    }
    for _ in 0..2000 {
        let xv: Vec<f64> = (0..n).map(|r| dot(x.row(r), &v)).collect();
        let mut next = vec![0.0; d];
        for (r, s) in xv.iter().enumerate() {
            next.iter_mut().zip(x.row(r)).for_each(|(a, b)| *a += s * b);
        }
        deflate(&mut next);
        if normalize(&mut next) < 1e-300 {
            return vec![0.0; d];
        }
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta < 1e-15 {
            break;
        }
    }
    // sign: largest-magnitude coordinate positive
    let pivot = (0..d)
        .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
        .unwrap_or(0);
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Centered projection onto the top two principal components.
pub fn pca_2d(x: &Matrix<f64>) -> Result<Matrix<f64>> {
    if x.rows() < 2 {
        return Err(Error::InvalidArgument(
            "projection needs at least 2 rows".into(),
        ));
    }
    let mean = x.row_mean()?;
    let mut centered = x.clone();
    for r in 0..x.rows() {
        centered
            .row_mut(r)
            .iter_mut()
            .zip(mean.row(0))
            .for_each(|(a, m)| *a -= m);
    }
    let v1 = principal_direction(&centered, &[]);
    let v2 = principal_direction(&centered, &[v1.clone()]);
    let mut out = Vec::with_capacity(2 * x.rows());
    for r in 0..x.rows() {
        out.push(dot(centered.row(r), &v1));
        out.push(dot(centered.row(r), &v2));
    }
    Matrix::from_vec(x.rows(), 2, out)
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut s = String::from("bin_lo,bin_hi,proportion\n");
    for b in bins {
        writeln!(s, "{:?},{:?},{:?}", b.lo, b.hi, b.proportion).unwrap();
    }
    s
}

pub fn scaling_csv(rows: &[ScaleRow]) -> String {
    let mut s = String::from("size,selected_id,trust\n");
    for r in rows {
        writeln!(s, "{},{},{:?}", r.size, r.selected, r.trust).unwrap();
    }
    s
}

/// `device_id,x,y,group` with the trust-cluster label as group.
pub fn projection_csv(points: &Matrix<f64>, labels: &[usize]) -> String {
    let mut s = String::from("device_id,x,y,group\n");
    for r in 0..points.rows() {
        writeln!(
            s,
            "{r},{:?},{:?},{}",
            points.get(r, 0),
            points.get(r, 1),
            labels[r]
        )
        .unwrap();
    }
    s
}

pub fn write_csv(path: impl AsRef<Path>, body: &str) -> Result<()> {
    write_atomic(path, body.as_bytes())
}
