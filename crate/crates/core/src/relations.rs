//! Builders for the six relationship hypergraphs and their union.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, RelationKind};
use crate::io::Dataset;
use crate::rng::{self, streams};

pub type Point2 = [f64; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAssignment {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Point2>,
    pub iterations: usize,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Within-cluster sum of squared distances.
    pub fn sse(&self, points: &[Point2]) -> f64 {
        points
            .iter()
            .zip(&self.assignments)
            .map(|(p, &c)| sq_dist(p, &self.centroids[c]))
            .sum()
    }

    /// Member lists per cluster, ascending ids.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &c) in self.assignments.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

fn sq_dist(a: &Point2, b: &Point2) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn nearest(p: &Point2, centroids: &[Point2]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, q) in centroids.iter().enumerate() {
        let d = sq_dist(p, q);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn kmeans_pp_seed(points: &[Point2], k: usize, rng: &mut rng::StreamRng) -> Vec<Point2> {
    let mut chosen = vec![rng::below(rng, points.len())];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p, &points[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng::uniform(rng) * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave `target` just above the final partial sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            (0..points.len()).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i]).collect()
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Stops once assignments are stable or after `max_iters` rounds. A cluster
/// that empties takes the point farthest from its centroid in the current
/// largest cluster.
pub fn kmeans(
    points: &[Point2],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterAssignment> {
    if k == 0 || max_iters == 0 {
        return Err(Error::InvalidArgument(
            "kmeans needs k >= 1 and max_iters >= 1".into(),
        ));
    }
    if k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "kmeans: k = {k} exceeds the number of points ({})",
            points.len()
        )));
    }
    let mut rng = rng::stream(seed, streams::KMEANS);
    let mut centroids = kmeans_pp_seed(points, k, &mut rng);
    let mut assignments: Vec<usize> = vec![usize::MAX; points.len()];
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        let stable = next == assignments;
        assignments = next;
        repair_empty(points, &mut assignments, &mut centroids);
        centroids = means(points, &assignments, k, &centroids);
        if stable {
            break;
        }
    }

    Ok(ClusterAssignment {
        assignments,
        centroids,
        iterations,
    })
}

fn repair_empty(points: &[Point2], assignments: &mut [usize], centroids: &mut [Point2]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let largest = (0..k)
            .max_by_key(|&c| (sizes[c], std::cmp::Reverse(c)))
            .unwrap();
        let far = (0..points.len())
            .filter(|&i| assignments[i] == largest)
            .max_by(|&i, &j| {
                sq_dist(&points[i], &centroids[largest])
                    .total_cmp(&sq_dist(&points[j], &centroids[largest]))
                    .then(j.cmp(&i))
            })
            .unwrap();
        assignments[far] = empty;
        centroids[empty] = points[far];
    }
}

fn means(points: &[Point2], assignments: &[usize], k: usize, prev: &[Point2]) -> Vec<Point2> {
    let mut sums = vec![[0.0, 0.0]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        sums[a][0] += p[0];
        sums[a][1] += p[1];
        counts[a] += 1;
    }
    (0..k)
        .map(|c| {
            if counts[c] == 0 {
                prev[c]
            } else {
                [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64]
            }
        })
        .collect()
}

/// Default cluster count: `max(2, round(√n))`, capped at `n`.
pub fn default_cluster_count(n: usize) -> usize {
    ((n as f64).sqrt().round() as usize).max(2).min(n.max(1))
}

/// One 2-member hyperedge per distinct undirected link. Returns the graph
/// and the number of skipped self-loops.
pub fn build_network(links: &[(usize, usize)], n: usize) -> Result<(Hypergraph, usize)> {
    let mut g = Hypergraph::new(n);
    let mut skipped = 0;
    for &(a, b) in links {
        if a == b {
            skipped += 1;
            continue;
        }
        g.add_hyperedge([a, b], 1.0, RelationKind::Net)?;
    }
    if skipped > 0 {
        warn!("network: skipped {skipped} self-loop link(s)");
    }
    Ok((g, skipped))
}

/// One hyperedge per proximity cluster.
pub fn build_proximity(
    positions: &[Point2],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Hypergraph> {
    let clusters = kmeans(positions, k, seed, max_iters)?;
    let mut g = Hypergraph::new(positions.len());
    for members in clusters.clusters() {
        g.add_hyperedge(members, 1.0, RelationKind::Phy)?;
    }
    Ok(g)
}

/// One hyperedge per collaboration record, weight 1 on success and 0 on
/// failure. Records with fewer than two distinct members are skipped.
pub fn build_collaboration(
    records: &[(Vec<usize>, bool)],
    n: usize,
) -> Result<(Hypergraph, usize)> {
    let mut g = Hypergraph::new(n);
    let mut skipped = 0;
    for (members, success) in records {
        let distinct: BTreeSet<usize> = members.iter().copied().collect();
        if distinct.len() < 2 {
            skipped += 1;
            continue;
        }
        g.add_hyperedge(
            distinct,
            if *success { 1.0 } else { 0.0 },
            RelationKind::His,
        )?;
    }
    if skipped > 0 {
        warn!("collaboration: skipped {skipped} record(s) with fewer than 2 members");
    }
    Ok((g, skipped))
}

/// One hyperedge per device type shared by at least two devices.
pub fn build_resource<S: AsRef<str>>(types: &[S]) -> Result<Hypergraph> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in types.iter().enumerate() {
        groups.entry(t.as_ref()).or_default().push(i);
    }
    let mut g = Hypergraph::new(types.len());
    for members in groups.into_values().filter(|m| m.len() >= 2) {
        g.add_hyperedge(members, 1.0, RelationKind::Res)?;
    }
    Ok(g)
}

/// One hyperedge per interest held by at least two devices.
pub fn build_interest(interests: &[BTreeSet<usize>], b_total: usize) -> Result<Hypergraph> {
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); b_total];
    for (dev, set) in interests.iter().enumerate() {
        for &b in set {
            if b >= b_total {
                return Err(Error::InvalidArgument(format!(
                    "interest id {b} of device {dev} is not below {b_total}"
                )));
            }
            holders[b].push(dev);
        }
    }
    let mut g = Hypergraph::new(interests.len());
    for members in holders.into_iter().filter(|m| m.len() >= 2) {
        g.add_hyperedge(members, 1.0, RelationKind::Int)?;
    }
    Ok(g)
}

/// For every device and every unordered pair of its friends, a hyperedge
/// joining that pair (the shared friend itself is not a member).
pub fn build_common_friend(friendships: &[(usize, usize)], n: usize) -> Result<Hypergraph> {
    let mut neighbors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(a, b) in friendships {
        for id in [a, b] {
            if id >= n {
                return Err(Error::InvalidDevice { id, num_devices: n });
            }
        }
        if a == b {
            continue;
        }
        neighbors[a].insert(b);
        neighbors[b].insert(a);
    }
    let mut g = Hypergraph::new(n);
    for nb in &neighbors {
        let nb: Vec<usize> = nb.iter().copied().collect();
        for (i, &j) in nb.iter().enumerate() {
            for &m in &nb[i + 1..] {
                g.add_hyperedge([j, m], 1.0, RelationKind::Fri)?;
            }
        }
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationConfig {
    /// Proximity cluster count; `None` picks [`default_cluster_count`].
    pub clusters: Option<usize>,
    pub seed: u64,
    pub kmeans_iters: usize,
}

impl Default for RelationConfig {
    fn default() -> Self {
        Self {
            clusters: None,
            seed: 0,
            kmeans_iters: 100,
        }
    }
}

/// Builds all six relationship hypergraphs and unions them.
pub fn build_all(ds: &Dataset, config: &RelationConfig) -> Result<Hypergraph> {
    let n = ds.num_devices();
    let positions: Vec<Point2> = ds.devices.iter().map(|d| [d.x, d.y]).collect();
    let k = config.clusters.unwrap_or_else(|| default_cluster_count(n));
    let records: Vec<(Vec<usize>, bool)> = ds
        .collaborations
        .iter()
        .map(|c| (c.members.clone(), c.success))
        .collect();
    let types: Vec<&str> = ds.devices.iter().map(|d| d.device_type.as_str()).collect();

    let parts = [
        build_network(&ds.links, n)?.0,
        build_proximity(&positions, k, config.seed, config.kmeans_iters)?,
        build_collaboration(&records, n)?.0,
        build_resource(&types)?,
        build_interest(&ds.interests, ds.interest_universe())?,
        build_common_friend(&ds.friendships, n)?,
    ];
    Hypergraph::union(&parts)
}
