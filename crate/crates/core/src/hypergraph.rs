//! Weighted hypergraph over devices with per-hyperedge relation provenance.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

/// The six relationship families a hyperedge can come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    /// Direct communication link.
    Net,
    /// Physical proximity cluster.
    Phy,
    /// Historical collaboration.
    His,
    /// Shared device type.
    Res,
    /// Shared interest.
    Int,
    /// Common friend.
    Fri,
}

impl RelationKind {
    pub const ALL: [RelationKind; 6] = [
        RelationKind::Net,
        RelationKind::Phy,
        RelationKind::His,
        RelationKind::Res,
        RelationKind::Int,
        RelationKind::Fri,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::Net => "net",
            RelationKind::Phy => "phy",
            RelationKind::His => "his",
            RelationKind::Res => "res",
            RelationKind::Int => "int",
            RelationKind::Fri => "fri",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RelationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown relation kind '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperedge {
    /// Sorted, distinct device ids.
    pub members: Vec<usize>,
    pub weight: f64,
    pub kind: RelationKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "HypergraphRepr", try_from = "HypergraphRepr")]
pub struct Hypergraph {
    num_devices: usize,
    edges: Vec<Hyperedge>,
    index: HashMap<(RelationKind, Vec<usize>), usize>,
}

impl PartialEq for Hypergraph {
    fn eq(&self, other: &Self) -> bool {
        self.num_devices == other.num_devices && self.edges == other.edges
    }
}

#[derive(Serialize, Deserialize)]
struct HypergraphRepr {
    num_devices: usize,
    hyperedges: Vec<Hyperedge>,
}

impl From<Hypergraph> for HypergraphRepr {
    fn from(g: Hypergraph) -> Self {
        HypergraphRepr {
            num_devices: g.num_devices,
            hyperedges: g.edges,
        }
    }
}

impl TryFrom<HypergraphRepr> for Hypergraph {
    type Error = Error;

    fn try_from(r: HypergraphRepr) -> Result<Self> {
        let mut g = Hypergraph::new(r.num_devices);
        for e in r.hyperedges {
            g.add_hyperedge(e.members, e.weight, e.kind)?;
        }
        Ok(g)
    }
}

impl Hypergraph {
    pub fn new(num_devices: usize) -> Self {
        Self {
            num_devices,
            edges: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn num_devices(&self) -> usize {
        self.num_devices
    }

    pub fn num_hyperedges(&self) -> usize {
        self.edges.len()
    }

    pub fn hyperedges(&self) -> &[Hyperedge] {
        &self.edges
    }

    pub fn hyperedge(&self, id: usize) -> &Hyperedge {
        &self.edges[id]
    }

    pub fn weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.weight).collect()
    }

    /// Total number of device–hyperedge memberships (non-zeros of H).
    pub fn num_memberships(&self) -> usize {
        self.edges.iter().map(|e| e.members.len()).sum()
    }

    /// Adds a hyperedge, or merges into an existing hyperedge of the same
    /// kind and member set (keeping the larger weight). Returns its id.
    pub fn add_hyperedge<I>(&mut self, members: I, weight: f64, kind: RelationKind) -> Result<usize>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut members: Vec<usize> = members.into_iter().collect();
        if members.is_empty() {
            return Err(Error::EmptyHyperedge);
        }
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "hyperedge weight must be finite and >= 0, got {weight}"
            )));
        }
        if let Some(&bad) = members.iter().find(|&&m| m >= self.num_devices) {
            return Err(Error::InvalidDevice {
                id: bad,
                num_devices: self.num_devices,
            });
        }
        members.sort_unstable();
        members.dedup();

        let key = (kind, members);
        if let Some(&id) = self.index.get(&key) {
            let e = &mut self.edges[id];
            e.weight = e.weight.max(weight);
            return Ok(id);
        }
        let id = self.edges.len();
        self.edges.push(Hyperedge {
            members: key.1.clone(),
            weight,
            kind,
        });
        self.index.insert(key, id);
        Ok(id)
    }

    /// `δ(a) = Σ_e w_e · h(a, e)`.
    pub fn device_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.num_devices];
        for e in &self.edges {
            for &m in &e.members {
                deg[m] += e.weight;
            }
        }
        deg
    }

    /// Member count of every hyperedge, regardless of weight.
    pub fn hyperedge_degrees(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.members.len() as f64).collect()
    }

    /// Dense `|A| × |E|` binary incidence matrix.
    pub fn incidence_dense<T: Scalar>(&self) -> Matrix<T> {
        let mut h = Matrix::zeros(self.num_devices, self.edges.len());
        for (j, e) in self.edges.iter().enumerate() {
            for &m in &e.members {
                h.set(m, j, T::one());
            }
        }
        h
    }

    /// Hyperedge counts per relation kind, in [`RelationKind::ALL`] order.
    pub fn kind_counts(&self) -> Vec<(RelationKind, usize)> {
        RelationKind::ALL
            .iter()
            .map(|&k| (k, self.edges.iter().filter(|e| e.kind == k).count()))
            .collect()
    }

    /// Concatenates hyperedge lists, deduplicating within each kind.
    pub fn union(graphs: &[Hypergraph]) -> Result<Hypergraph> {
        let first = graphs.first().ok_or_else(|| {
            Error::InvalidArgument("union of an empty list of hypergraphs".into())
        })?;
        let n = first.num_devices;
        let mut out = Hypergraph::new(n);
        for g in graphs {
            if g.num_devices != n {
                return Err(Error::InvalidArgument(format!(
                    "union: num_devices mismatch ({} vs {n})",
                    g.num_devices
                )));
            }
            for e in &g.edges {
                out.add_hyperedge(e.members.iter().copied(), e.weight, e.kind)?;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dedup_within_kind_only() {
        let mut g = Hypergraph::new(3);
        assert_eq!(g.add_hyperedge([0, 1], 1.0, RelationKind::Net).unwrap(), 0);
        assert_eq!(g.add_hyperedge([1, 0], 1.0, RelationKind::Net).unwrap(), 0);
        assert_eq!(g.num_hyperedges(), 1);
        assert_eq!(g.add_hyperedge([0, 1], 1.0, RelationKind::Fri).unwrap(), 1);
    }

    #[test]
    fn merge_keeps_max_weight() {
        let mut g = Hypergraph::new(2);
        g.add_hyperedge([0, 1], 0.0, RelationKind::His).unwrap();
        g.add_hyperedge([0, 1], 1.0, RelationKind::His).unwrap();
        g.add_hyperedge([0, 1], 0.0, RelationKind::His).unwrap();
        assert_eq!(g.hyperedge(0).weight, 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        let mut g = Hypergraph::new(2);
        assert!(matches!(
            g.add_hyperedge([0, 2], 1.0, RelationKind::Net),
            Err(Error::InvalidDevice { id: 2, .. })
        ));
        assert!(matches!(
            g.add_hyperedge(Vec::<usize>::new(), 1.0, RelationKind::Net),
            Err(Error::EmptyHyperedge)
        ));
        assert!(g.add_hyperedge([0], -1.0, RelationKind::Net).is_err());
    }

    #[test]
    fn degree_examples() {
        let mut g = Hypergraph::new(3);
        g.add_hyperedge([0, 1], 1.0, RelationKind::Net).unwrap();
        g.add_hyperedge([0, 1, 2], 0.5, RelationKind::Int).unwrap();
        assert_eq!(g.device_degrees(), vec![1.5, 1.5, 0.5]);
        assert_eq!(g.hyperedge_degrees(), vec![2.0, 3.0]);

        assert_eq!(Hypergraph::new(4).device_degrees(), vec![0.0; 4]);

        let mut single = Hypergraph::new(3);
        single.add_hyperedge([0], 3.0, RelationKind::Phy).unwrap();
        assert_eq!(single.device_degrees(), vec![3.0, 0.0, 0.0]);
        assert_eq!(single.hyperedge_degrees(), vec![1.0]);

        let mut zero = Hypergraph::new(2);
        zero.add_hyperedge([0, 1], 0.0, RelationKind::His).unwrap();
        assert_eq!(zero.hyperedge_degrees(), vec![2.0]);
        assert_eq!(zero.device_degrees(), vec![0.0, 0.0]);
    }

    #[test]
    fn union_counts() {
        let mut net = Hypergraph::new(5);
        net.add_hyperedge([0, 1], 1.0, RelationKind::Net).unwrap();
        net.add_hyperedge([1, 2], 1.0, RelationKind::Net).unwrap();
        let mut fri = Hypergraph::new(5);
        for pair in [[0, 1], [2, 3], [3, 4]] {
            fri.add_hyperedge(pair, 1.0, RelationKind::Fri).unwrap();
        }
        assert_eq!(
            Hypergraph::union(&[net.clone(), fri])
                .unwrap()
                .num_hyperedges(),
            5
        );
        assert_eq!(Hypergraph::union(&[net.clone(), net.clone()]).unwrap(), net);
        assert!(Hypergraph::union(&[]).is_err());
        assert!(Hypergraph::union(&[net, Hypergraph::new(4)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut g = Hypergraph::new(4);
        g.add_hyperedge([3, 1], 0.0, RelationKind::His).unwrap();
        g.add_hyperedge([0, 1, 2], 1.0, RelationKind::Res).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: Hypergraph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }

    fn arb_graph() -> impl Strategy<Value = Hypergraph> {
        (1usize..=8).prop_flat_map(|n| {
            let edge = (
                proptest::collection::btree_set(0..n, 1..=n),
                prop_oneof![Just(0.0), Just(0.5), Just(1.0), 0.0..4.0f64],
                0usize..6,
            );
            proptest::collection::vec(edge, 0..=10).prop_map(move |edges| {
                let mut g = Hypergraph::new(n);
                for (m, w, k) in edges {
                    g.add_hyperedge(m, w, RelationKind::ALL[k]).unwrap();
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn degrees_match_double_loop(g in arb_graph()) {
            let h = g.incidence_dense::<f64>();
            let w = g.weights();
            for a in 0..g.num_devices() {
                let mut d = 0.0;
                for e in 0..g.num_hyperedges() {
                    if g.hyperedge(e).members.contains(&a) {
                        d += w[e];
                    }
                }
                prop_assert_eq!(g.device_degrees()[a], d);
            }
            let edeg = g.hyperedge_degrees();
            for e in 0..g.num_hyperedges() {
                let ones = (0..g.num_devices()).filter(|&a| *h.get(a, e) == 1.0).count();
                prop_assert_eq!(edeg[e], ones as f64);
            }
        }

        #[test]
        fn union_idempotent(g in arb_graph()) {
            let u = Hypergraph::union(&[g.clone(), g.clone()]).unwrap();
            prop_assert_eq!(u, g);
        }
    }
}
