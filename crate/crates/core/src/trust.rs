//! Cosine trust between device embeddings and collaborator selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Real;

/// Floor on the norm product.
pub const TRUST_EPS: f64 = 1e-12;

/// Cosine similarity clamped to `[-1, 1]`; zero-norm rows give 0.
pub fn trust<T: Real>(xi: &[T], xj: &[T]) -> f64 {
    let (mut dot, mut ni, mut nj) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in xi.iter().zip(xj) {
        let (a, b) = (a.to_f64_lossy(), b.to_f64_lossy());
        dot += a * b;
        ni += a * a;
        nj += b * b;
    }
    if ni == 0.0 || nj == 0.0 {
        log::warn!("degenerate zero-norm embedding, trust set to 0");
        return 0.0;
    }
    (dot / (ni.sqrt() * nj.sqrt()).max(TRUST_EPS)).clamp(-1.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrustEntry {
    pub device: usize,
    pub trust: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrustRanking {
    pub initiator: usize,
    /// Descending trust, ties by ascending id.
    pub entries: Vec<TrustEntry>,
}

impl TrustRanking {
    pub fn top(&self, k: usize) -> &[TrustEntry] {
        &self.entries[..k.min(self.entries.len())]
    }
}

fn check_initiator<T: Real>(initiator: usize, x: &Matrix<T>) -> Result<()> {
    if initiator >= x.rows() {
        return Err(Error::InvalidDevice {
            id: initiator,
            num_devices: x.rows(),
        });
    }
    Ok(())
}

/// Sorts `(id, trust)` pairs: trust descending, then id ascending.
pub fn sort_entries(entries: &mut [TrustEntry]) {
    entries.sort_by(|a, b| b.trust.total_cmp(&a.trust).then(a.device.cmp(&b.device)));
}

/// Trust of `initiator` towards every other device row of `x`.
pub fn rank<T: Real>(initiator: usize, x: &Matrix<T>) -> Result<TrustRanking> {
    check_initiator(initiator, x)?;
    let me = x.row(initiator);
    let mut entries: Vec<TrustEntry> = (0..x.rows())
        .filter(|&j| j != initiator)
        .map(|j| TrustEntry {
            device: j,
            trust: trust(me, x.row(j)),
        })
        .collect();
    sort_entries(&mut entries);
    Ok(TrustRanking { initiator, entries })
}

/// The most trusted collaborator of `initiator`.
pub fn select_collaborator<T: Real>(initiator: usize, x: &Matrix<T>) -> Result<TrustEntry> {
    if x.rows() < 2 {
        return Err(Error::InvalidArgument(
            "collaborator selection needs at least 2 devices".into(),
        ));
    }
    Ok(rank(initiator, x)?.entries.swap_remove(0))
}
