//! Trust evaluation for collaborating devices.
//!
//! Six kinds of device relationship are merged into one hypergraph, a
//! two-stage hypergraph neural network is trained self-supervised on two
//! masked views of it, and trust between devices is the cosine similarity of
//! the learned embeddings.
//!
//! Numeric code is generic over [`Scalar`] (`f64`, `f32`, or exact
//! [`BigRational`](num_rational::BigRational) for the forward pass) and
//! [`Real`] where square roots are needed. The aliases below fix the common
//! choices.

pub mod augment;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod hgnn;
pub mod hypergraph;
pub mod io;
pub mod numerics;
pub mod objective;
pub mod relations;
pub mod rng;
pub mod scalar;
pub mod trainer;
pub mod trust;

pub use error::{Error, Result};
pub use hypergraph::{Hyperedge, Hypergraph, RelationKind};
pub use scalar::{Real, Scalar};

pub type Rational = num_rational::BigRational;

pub type MatrixF64 = numerics::Matrix<f64>;
pub type MatrixF32 = numerics::Matrix<f32>;
pub type MatrixExact = numerics::Matrix<Rational>;

pub type HgnnParamsF64 = hgnn::HgnnParams<f64>;
pub type HgnnParamsF32 = hgnn::HgnnParams<f32>;
pub type HgnnParamsExact = hgnn::HgnnParams<Rational>;

pub type EmbeddingsF64 = hgnn::EmbeddingPair<f64>;
pub type EmbeddingsExact = hgnn::EmbeddingPair<Rational>;

pub type ViewF64 = augment::AugmentedView<f64>;
pub type ViewExact = augment::AugmentedView<Rational>;

pub type TrainReportF64 = trainer::TrainReport<f64>;
