//! Stochastic hypergraph views: device-feature masking and membership masking.

use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::numerics::{diag_inverse, Matrix, SparseMatrix};
use crate::rng;
use crate::scalar::Scalar;

/// Guard added to degrees before inversion.
pub const DEGREE_EPS: f64 = 1e-12;

/// Incidence structure after masking: surviving members per hyperedge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedIncidence {
    pub num_devices: usize,
    /// Ascending device ids per hyperedge; hyperedges may end up empty.
    pub members: Vec<Vec<usize>>,
}

impl MaskedIncidence {
    pub fn from_graph(g: &Hypergraph) -> Self {
        Self {
            num_devices: g.num_devices(),
            members: g.hyperedges().iter().map(|e| e.members.clone()).collect(),
        }
    }

    pub fn num_hyperedges(&self) -> usize {
        self.members.len()
    }

    pub fn num_memberships(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn to_dense<T: Scalar>(&self) -> Matrix<T> {
        let mut h = Matrix::zeros(self.num_devices, self.members.len());
        for (e, m) in self.members.iter().enumerate() {
            for &a in m {
                h.set(a, e, T::one());
            }
        }
        h
    }

    /// True when every surviving membership also exists in `g`.
    pub fn is_within(&self, g: &Hypergraph) -> bool {
        self.members.len() == g.num_hyperedges()
            && self
                .members
                .iter()
                .zip(g.hyperedges())
                .all(|(m, e)| m.iter().all(|a| e.members.binary_search(a).is_ok()))
    }
}

/// One augmented copy of the hypergraph, ready to feed the HGNN.
#[derive(Clone, Debug)]
pub struct AugmentedView<T> {
    pub features: Matrix<T>,
    pub incidence: MaskedIncidence,
    /// `δ'(a) = Σ_e w_e h'(a, e)`.
    pub device_degrees: Vec<T>,
    /// `δ'(e) = Σ_a h'(a, e)`.
    pub edge_degrees: Vec<T>,
    to_edges: Arc<SparseMatrix<T>>,
    to_devices: Arc<SparseMatrix<T>>,
}

impl<T: Scalar> AugmentedView<T> {
    pub fn new(g: &Hypergraph, features: Matrix<T>, incidence: MaskedIncidence) -> Result<Self> {
        let n = g.num_devices();
        if features.rows() != n {
            return Err(Error::Shape {
                op: "augmented_view",
                left: features.shape(),
                right: (n, g.num_hyperedges()),
            });
        }
        if incidence.num_devices != n || incidence.num_hyperedges() != g.num_hyperedges() {
            return Err(Error::InvalidArgument(
                "masked incidence does not match the hypergraph".into(),
            ));
        }
        let weights: Vec<T> = g
            .hyperedges()
            .iter()
            .map(|e| T::from_f64_lossy(e.weight))
            .collect();

        let mut device_degrees = vec![T::zero(); n];
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (e, members) in incidence.members.iter().enumerate() {
            for &a in members {
                device_degrees[a] = device_degrees[a].clone() + weights[e].clone();
                incident[a].push(e);
            }
        }
        let edge_degrees: Vec<T> = incidence
            .members
            .iter()
            .map(|m| T::from_usize(m.len()).unwrap())
            .collect();

        let eps = T::from_f64_lossy(DEGREE_EPS);
        let inv_e = diag_inverse(&edge_degrees, &eps);
        let inv_a = diag_inverse(&device_degrees, &eps);

        // D_e⁻¹ Hᵀ
        let to_edges = SparseMatrix::from_row_lists(
            n,
            incidence
                .members
                .iter()
                .zip(&inv_e)
                .map(|(m, inv)| m.iter().map(|&a| (a, inv.clone())).collect())
                .collect(),
        )?;
        // D_a⁻¹ H W
        let to_devices = SparseMatrix::from_row_lists(
            incidence.num_hyperedges(),
            incident
                .iter()
                .zip(&inv_a)
                .map(|(edges, inv)| {
                    edges
                        .iter()
                        .filter(|&&e| !weights[e].is_zero())
                        .map(|&e| (e, inv.clone() * weights[e].clone()))
                        .collect()
                })
                .collect(),
        )?;

        Ok(Self {
            features,
            incidence,
            device_degrees,
            edge_degrees,
            to_edges: Arc::new(to_edges),
            to_devices: Arc::new(to_devices),
        })
    }

    /// The unmasked view.
    pub fn clean(g: &Hypergraph, features: Matrix<T>) -> Result<Self> {
        Self::new(g, features, MaskedIncidence::from_graph(g))
    }

    pub fn num_devices(&self) -> usize {
        self.incidence.num_devices
    }

    pub fn num_hyperedges(&self) -> usize {
        self.incidence.num_hyperedges()
    }

    /// `D_e⁻¹ Hᵀ` as a sparse `|E| × |A|` operator.
    pub fn device_to_edge(&self) -> &Arc<SparseMatrix<T>> {
        &self.to_edges
    }

    /// `D_a⁻¹ H W` as a sparse `|A| × |E|` operator.
    pub fn edge_to_device(&self) -> &Arc<SparseMatrix<T>> {
        &self.to_devices
    }
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "{what} masking probability {p} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Zeroes each feature row independently with probability `p`.
pub fn mask_devices<T: Scalar, R: RngCore>(
    x: &Matrix<T>,
    p: f64,
    rng: &mut R,
) -> Result<Matrix<T>> {
    check_prob(p, "device")?;
    let mut out = x.clone();
    for r in 0..out.rows() {
        if rng::bernoulli(rng, p) {
            out.row_mut(r).fill(T::zero());
        }
    }
    Ok(out)
}

/// Drops each device–hyperedge membership independently with probability
/// `p`. Draws go hyperedge by hyperedge, members ascending.
pub fn mask_memberships<R: RngCore>(
    g: &Hypergraph,
    p: f64,
    rng: &mut R,
) -> Result<MaskedIncidence> {
    check_prob(p, "membership")?;
    let members = g
        .hyperedges()
        .iter()
        .map(|e| {
            e.members
                .iter()
                .copied()
                .filter(|_| !rng::bernoulli(rng, p))
                .collect()
        })
        .collect();
    Ok(MaskedIncidence {
        num_devices: g.num_devices(),
        members,
    })
}

/// Two independent views: (device mask, membership mask) for view 1, then view 2.
pub fn make_views<T: Scalar, R: RngCore>(
    g: &Hypergraph,
    x: &Matrix<T>,
    p_devices: f64,
    p_memberships: f64,
    rng: &mut R,
) -> Result<(AugmentedView<T>, AugmentedView<T>)> {
    let mut one = || -> Result<AugmentedView<T>> {
        let features = mask_devices(x, p_devices, rng)?;
        let incidence = mask_memberships(g, p_memberships, rng)?;
        AugmentedView::new(g, features, incidence)
    };
    let v1 = one()?;
    let v2 = one()?;
    Ok((v1, v2))
}
