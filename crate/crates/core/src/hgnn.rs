//! Parameter-sharing hypergraph neural network.
//!
//! Each layer runs two aggregation stages:
//!
//! ```text
//! X_E ← φ(D_e⁻¹ Hᵀ X_A Θ_E)
//! X_A ← φ(D_a⁻¹ H W X_E Θ_A)
//! ```
//!
//! The same [`HgnnParams`] drive every view.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentedView;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Tape, Var};
use crate::rng::{self, streams};
use crate::scalar::{Real, Scalar};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidArgument(format!(
                "unknown activation '{other}'"
            ))),
        }
    }
}

impl Activation {
    pub fn apply<T: Scalar>(self, tape: &mut Tape<T>, v: Var) -> Result<Var> {
        match self {
            Activation::Relu => Ok(tape.relu(v)),
            Activation::Tanh => tape.tanh(v),
            Activation::Identity => Ok(v),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    /// Device → hyperedge transform, `d_in × d_out`.
    pub theta_e: Matrix<T>,
    /// Hyperedge → device transform, `d_out × d_out`.
    pub theta_a: Matrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HgnnParams<T> {
    pub layers: Vec<LayerParams<T>>,
}

impl<T: Scalar> HgnnParams<T> {
    /// Checks that layer shapes chain.
    pub fn new(layers: Vec<LayerParams<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "an HGNN needs at least one layer".into(),
            ));
        }
        let mut d_in = layers[0].theta_e.rows();
        for (l, layer) in layers.iter().enumerate() {
            let (r, c) = layer.theta_e.shape();
            if r != d_in || layer.theta_a.shape() != (c, c) {
                return Err(Error::InvalidArgument(format!(
                    "layer {l}: theta_e {:?} / theta_a {:?} do not chain from width {d_in}",
                    layer.theta_e.shape(),
                    layer.theta_a.shape()
                )));
            }
            d_in = c;
        }
        Ok(Self { layers })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].theta_e.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().theta_a.cols()
    }

    /// `[Θ_E⁽¹⁾, Θ_A⁽¹⁾, Θ_E⁽²⁾, …]`.
    pub fn to_flat(&self) -> Vec<Matrix<T>> {
        self.layers
            .iter()
            .flat_map(|l| [l.theta_e.clone(), l.theta_a.clone()])
            .collect()
    }

    pub fn from_flat(flat: Vec<Matrix<T>>) -> Result<Self> {
        if flat.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} matrices do not pair into layers",
                flat.len()
            )));
        }
        let mut it = flat.into_iter();
        let mut layers = Vec::new();
        while let (Some(theta_e), Some(theta_a)) = (it.next(), it.next()) {
            layers.push(LayerParams { theta_e, theta_a });
        }
        Self::new(layers)
    }

    /// `Σ ‖Θ‖²_F` over every layer matrix.
    pub fn squared_norm(&self) -> T {
        self.layers.iter().fold(T::zero(), |acc, l| {
            acc + l.theta_e.frobenius_sq() + l.theta_a.frobenius_sq()
        })
    }

    pub fn cast<U: Scalar>(&self) -> HgnnParams<U> {
        HgnnParams {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    theta_e: l.theta_e.cast(),
                    theta_a: l.theta_a.cast(),
                })
                .collect(),
        }
    }
}

impl<T: Real> HgnnParams<T> {
    /// Glorot-uniform init: entries in `±√(6 / (fan_in + fan_out))`.
    pub fn init(input_dim: usize, width: usize, num_layers: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || width == 0 || num_layers == 0 {
            return Err(Error::InvalidArgument(format!(
                "HGNN dims must be positive (input {input_dim}, width {width}, layers {num_layers})"
            )));
        }
        let mut r = rng::stream(seed, streams::PARAM_INIT);
        let mut glorot = |rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| T::from_f64_lossy((2.0 * rng::uniform(&mut r) - 1.0) * bound))
                .collect();
            Matrix::from_vec(rows, cols, data).unwrap()
        };
        let mut layers = Vec::with_capacity(num_layers);
        let mut d_in = input_dim;
        for _ in 0..num_layers {
            let theta_e = glorot(d_in, width);
            let theta_a = glorot(width, width);
            layers.push(LayerParams { theta_e, theta_a });
            d_in = width;
        }
        Self::new(layers)
    }
}

/// Device and hyperedge embeddings from one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingPair<T> {
    pub devices: Matrix<T>,
    pub hyperedges: Matrix<T>,
}

/// One layer on the tape; returns `(x_e, x_a)`.
pub fn layer_forward_tape<T: Scalar>(
    tape: &mut Tape<T>,
    view: &AugmentedView<T>,
    x_a: Var,
    theta_e: Var,
    theta_a: Var,
    act: Activation,
) -> Result<(Var, Var)> {
    let projected = tape.matmul(x_a, theta_e)?;
    let pooled = tape.sparse_matmul(view.device_to_edge().clone(), projected)?;
    let x_e = act.apply(tape, pooled)?;

    let gathered = tape.sparse_matmul(view.edge_to_device().clone(), x_e)?;
    let mixed = tape.matmul(gathered, theta_a)?;
    let x_a = act.apply(tape, mixed)?;
    Ok((x_e, x_a))
}

/// Stacks every layer starting from the view's features; returns `(x_a, x_e)` of the last layer.
pub fn forward_tape<T: Scalar>(
    tape: &mut Tape<T>,
    view: &AugmentedView<T>,
    layers: &[(Var, Var)],
    act: Activation,
) -> Result<(Var, Var)> {
    let mut x_a = tape.constant(view.features.clone());
    let mut x_e = None;
    for &(te, ta) in layers {
        let (e, a) = layer_forward_tape(tape, view, x_a, te, ta, act)?;
        x_a = a;
        x_e = Some(e);
    }
    let x_e = x_e.ok_or_else(|| Error::InvalidArgument("forward with zero layers".into()))?;
    Ok((x_a, x_e))
}

/// Single layer outside training; returns `(x_e, x_a)`.
pub fn layer_forward<T: Scalar>(
    view: &AugmentedView<T>,
    x_a: &Matrix<T>,
    theta_e: &Matrix<T>,
    theta_a: &Matrix<T>,
    act: Activation,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let mut tape = Tape::new();
    let x = tape.constant(x_a.clone());
    let te = tape.constant(theta_e.clone());
    let ta = tape.constant(theta_a.clone());
    let (e, a) = layer_forward_tape(&mut tape, view, x, te, ta, act)?;
    Ok((tape.value(e).clone(), tape.value(a).clone()))
}

pub fn forward<T: Scalar>(
    view: &AugmentedView<T>,
    params: &HgnnParams<T>,
    act: Activation,
) -> Result<EmbeddingPair<T>> {
    if view.features.cols() != params.input_dim() {
        return Err(Error::Shape {
            op: "hgnn_forward",
            left: view.features.shape(),
            right: params.layers[0].theta_e.shape(),
        });
    }
    let mut tape = Tape::new();
    let vars: Vec<(Var, Var)> = params
        .layers
        .iter()
        .map(|l| {
            (
                tape.constant(l.theta_e.clone()),
                tape.constant(l.theta_a.clone()),
            )
        })
        .collect();
    let (a, e) = forward_tape(&mut tape, view, &vars, act)?;
    Ok(EmbeddingPair {
        devices: tape.value(a).clone(),
        hyperedges: tape.value(e).clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{Hypergraph, RelationKind};

    #[test]
    fn single_device_single_edge() {
        let mut g = Hypergraph::new(1);
        g.add_hyperedge([0], 1.0, RelationKind::Phy).unwrap();
        let view = AugmentedView::<f64>::clean(&g, Matrix::identity(1)).unwrap();
        let id = Matrix::identity(1);
        let (x_e, x_a) =
            layer_forward(&view, &Matrix::identity(1), &id, &id, Activation::Relu).unwrap();
        // 1 / (1 + 1e-12) per stage
        let stage = 1.0 / (1.0 + 1e-12);
        assert!((x_e.get(0, 0) - stage).abs() < 1e-15);
        assert!((x_a.get(0, 0) - stage * stage).abs() < 1e-15);
        assert!((x_a.get(0, 0) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn zero_features_give_zero_embeddings() {
        let mut g = Hypergraph::new(3);
        g.add_hyperedge([0, 1, 2], 1.0, RelationKind::Phy).unwrap();
        let view = AugmentedView::<f64>::clean(&g, Matrix::zeros(3, 3)).unwrap();
        let p = HgnnParams::init(3, 4, 2, 1).unwrap();
        let out = forward(&view, &p, Activation::Relu).unwrap();
        assert_eq!(out.devices, Matrix::zeros(3, 4));
        assert_eq!(out.hyperedges, Matrix::zeros(1, 4));
    }

    #[test]
    fn weight_zero_edge_annihilates_device_stage() {
        let mut g = Hypergraph::new(3);
        g.add_hyperedge([0, 1], 0.0, RelationKind::His).unwrap();
        let view = AugmentedView::<f64>::clean(&g, Matrix::identity(3)).unwrap();
        let ones = Matrix::filled(3, 2, 1.0);
        let (x_e, x_a) = layer_forward(
            &view,
            &Matrix::identity(3),
            &ones,
            &Matrix::identity(2),
            Activation::Relu,
        )
        .unwrap();
        assert!(x_e.as_slice().iter().all(|&v| v > 0.0));
        assert_eq!(x_a, Matrix::zeros(3, 2));
    }

    #[test]
    fn one_layer_forward_equals_layer_forward() {
        let mut g = Hypergraph::new(4);
        g.add_hyperedge([0, 1, 2], 1.0, RelationKind::Phy).unwrap();
        g.add_hyperedge([2, 3], 1.0, RelationKind::Net).unwrap();
        let view = AugmentedView::<f64>::clean(&g, Matrix::identity(4)).unwrap();
        let p = HgnnParams::init(4, 3, 1, 5).unwrap();
        let full = forward(&view, &p, Activation::Relu).unwrap();
        let (e, a) = layer_forward(
            &view,
            &view.features,
            &p.layers[0].theta_e,
            &p.layers[0].theta_a,
            Activation::Relu,
        )
        .unwrap();
        assert_eq!(full.devices, a);
        assert_eq!(full.hyperedges, e);
    }

    #[test]
    fn identity_params_match_two_hop_average() {
        let mut g = Hypergraph::new(4);
        g.add_hyperedge([0, 1, 2], 1.0, RelationKind::Phy).unwrap();
        g.add_hyperedge([2, 3], 0.5, RelationKind::Net).unwrap();
        g.add_hyperedge([1, 3], 1.0, RelationKind::Fri).unwrap();
        let x = Matrix::from_rows(&[[0.3, 1.0], [0.5, 0.2], [0.9, 0.4], [0.1, 0.7]]).unwrap();
        let view = AugmentedView::clean(&g, x.clone()).unwrap();
        let (_, x_a) = layer_forward(
            &view,
            &x,
            &Matrix::identity(2),
            &Matrix::identity(2),
            Activation::Relu,
        )
        .unwrap();

        // brute force over memberships
        let edges = g.hyperedges();
        let eps = crate::augment::DEGREE_EPS;
        for a in 0..4 {
            let mut acc = [0.0f64; 2];
            let mut deg = 0.0;
            for e in edges.iter().filter(|e| e.members.contains(&a)) {
                deg += e.weight;
                for c in 0..2 {
                    let mean: f64 = e.members.iter().map(|&m| x.get(m, c)).sum::<f64>()
                        / (e.members.len() as f64 + eps);
                    acc[c] += e.weight * mean;
                }
            }
            for c in 0..2 {
                let expected = acc[c] / (deg + eps);
                assert!((x_a.get(a, c) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn params_reject_broken_chain() {
        let bad = vec![LayerParams {
            theta_e: Matrix::<f64>::zeros(3, 4),
            theta_a: Matrix::zeros(3, 3),
        }];
        assert!(HgnnParams::new(bad).is_err());
        let p = HgnnParams::<f64>::init(5, 4, 2, 0).unwrap();
        assert_eq!(HgnnParams::from_flat(p.to_flat()).unwrap(), p);
    }
}
