//! Self-supervised training loop.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::augment::{make_views, AugmentedView};
use crate::error::{Error, Result};
use crate::hgnn::{forward, forward_tape, Activation, EmbeddingPair, HgnnParams};
use crate::hypergraph::Hypergraph;
use crate::io::config_hash;
use crate::numerics::{AdamConfig, AdamState, Matrix, Tape, Var};
use crate::objective::{ssl_loss_tape, LossBreakdown, LossWeights};
use crate::rng::{self, StreamRng};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub p_a: f64,
    pub p_h: f64,
    pub lambda_dev: f64,
    pub lambda_hyp: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub layers: usize,
    pub dim: usize,
    pub seed: u64,
    pub weight_decay: f64,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            epochs: 200,
            lr: 1e-3,
            p_a: 0.5,
            p_h: 0.5,
            lambda_dev: w.lambda_dev,
            lambda_hyp: w.lambda_hyp,
            lambda1: w.lambda1,
            lambda2: w.lambda2,
            layers: 2,
            dim: 512,
            seed: 0,
            weight_decay: 1e-5,
            activation: Activation::Relu,
        }
    }
}

/// Keys accepted by [`TrainConfig::set`], in serialization order.
pub const CONFIG_KEYS: [&str; 13] = [
    "epochs",
    "lr",
    "p_a",
    "p_h",
    "lambda_dev",
    "lambda_hyp",
    "lambda1",
    "lambda2",
    "layers",
    "dim",
    "seed",
    "weight_decay",
    "activation",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_a", self.p_a), ("p_h", self.p_h)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.dim == 0 || self.layers == 0 {
            return Err(Error::Config("dim and layers must be at least 1".into()));
        }
        let reals = [
            ("lr", self.lr),
            ("lambda_dev", self.lambda_dev),
            ("lambda_hyp", self.lambda_hyp),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("weight_decay", self.weight_decay),
        ];
        for (name, v) in reals {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} = {v} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_dev: self.lambda_dev,
            lambda_hyp: self.lambda_hyp,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "epochs" => self.epochs.to_string(),
            "lr" => format!("{:?}", self.lr),
            "p_a" => format!("{:?}", self.p_a),
            "p_h" => format!("{:?}", self.p_h),
            "lambda_dev" => format!("{:?}", self.lambda_dev),
            "lambda_hyp" => format!("{:?}", self.lambda_hyp),
            "lambda1" => format!("{:?}", self.lambda1),
            "lambda2" => format!("{:?}", self.lambda2),
            "layers" => self.layers.to_string(),
            "dim" => self.dim.to_string(),
            "seed" => self.seed.to_string(),
            "weight_decay" => format!("{:?}", self.weight_decay),
            "activation" => self.activation.to_string(),
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "epochs" => self.epochs = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "p_a" => self.p_a = parse(key, value)?,
            "p_h" => self.p_h = parse(key, value)?,
            "lambda_dev" => self.lambda_dev = parse(key, value)?,
            "lambda_hyp" => self.lambda_hyp = parse(key, value)?,
            "lambda1" => self.lambda1 = parse(key, value)?,
            "lambda2" => self.lambda2 = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "activation" => self.activation = value.trim().parse()?,
            _ => return Err(Error::Config(format!("unknown training key {key:?}"))),
        }
        Ok(())
    }

    /// Flat `key=value` lines, one per field.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for k in CONFIG_KEYS {
            let _ = writeln!(out, "{k}={}", self.get(k).unwrap());
        }
        out
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        CONFIG_KEYS
            .iter()
            .map(|k| (k.to_string(), self.get(k).unwrap()))
            .collect()
    }

    /// [`config_hash`] of [`Self::to_kv`].
    pub fn hash(&self) -> u64 {
        config_hash(&self.to_kv())
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport<T> {
    pub history: Vec<LossBreakdown>,
    pub params: HgnnParams<T>,
    pub duration: Duration,
    pub config: TrainConfig,
    pub seed: u64,
}

/// One-hot device features, `n × n`.
pub fn identity_features<T: Real>(n: usize) -> Matrix<T> {
    Matrix::identity(n)
}

pub fn init_params<T: Real>(input_dim: usize, config: &TrainConfig) -> Result<HgnnParams<T>> {
    HgnnParams::init(input_dim, config.dim, config.layers, config.seed)
}

/// Augmentation stream for one epoch.
pub fn epoch_rng(seed: u64, epoch: usize) -> StreamRng {
    rng::stream(seed, rng::streams::AUGMENT + epoch as u64)
}

/// Loss and gradients for one pair of views at the given parameters.
pub fn loss_and_gradients<T: Real>(
    v1: &AugmentedView<T>,
    v2: &AugmentedView<T>,
    params: &[Matrix<T>],
    act: Activation,
    w: &LossWeights,
) -> Result<(LossBreakdown, Vec<Matrix<T>>)> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let layers: Vec<(Var, Var)> = vars.chunks(2).map(|c| (c[0], c[1])).collect();
    let (a1, e1) = forward_tape(&mut tape, v1, &layers, act)?;
    let (a2, e2) = forward_tape(&mut tape, v2, &layers, act)?;
    let terms = ssl_loss_tape(&mut tape, (a1, e1), (a2, e2), &vars, w)?;
    let breakdown = terms.breakdown(&tape, w)?;
    if !breakdown.is_finite() {
        return Ok((breakdown, Vec::new()));
    }
    let grads = tape.backward(terms.total)?;
    Ok((breakdown, grads))
}

pub fn train<T: Real>(g: &Hypergraph, config: &TrainConfig) -> Result<TrainReport<T>> {
    train_with_features(g, identity_features(g.num_devices()), config)
}

pub fn train_with_features<T: Real>(
    g: &Hypergraph,
    features: Matrix<T>,
    config: &TrainConfig,
) -> Result<TrainReport<T>> {
    config.validate()?;
    if g.num_devices() < 2 || g.num_hyperedges() < 2 {
        return Err(Error::InvalidArgument(format!(
            "training needs at least 2 devices and 2 hyperedges, got {} and {}",
            g.num_devices(),
            g.num_hyperedges()
        )));
    }
    let started = Instant::now();
    let params = init_params::<T>(features.cols(), config)?;
    let w = config.loss_weights();
    let mut flat = params.to_flat();
    let mut adam = AdamState::new(config.adam(), &flat);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut r = epoch_rng(config.seed, epoch);
        let (v1, v2) = make_views(g, &features, config.p_a, config.p_h, &mut r)?;
        let (loss, grads) = loss_and_gradients(&v1, &v2, &flat, config.activation, &w)?;
        if !loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                last_finite: history.last().copied(),
            });
        }
        adam.step(&mut flat, &grads)?;
        if epoch % 10 == 0 || epoch + 1 == config.epochs {
            log::info!("epoch {epoch}/{}: total {:.4e}", config.epochs, loss.total);
        } else {
            log::debug!("epoch {epoch}: total {:.6e}", loss.total);
        }
        history.push(loss);
    }

    Ok(TrainReport {
        history,
        params: HgnnParams::from_flat(flat)?,
        duration: started.elapsed(),
        config: config.clone(),
        seed: config.seed,
    })
}

/// Forward pass on the unmasked graph with one-hot features.
pub fn infer_embeddings<T: Real>(
    g: &Hypergraph,
    params: &HgnnParams<T>,
    act: Activation,
) -> Result<EmbeddingPair<T>> {
    infer_with_features(g, identity_features(g.num_devices()), params, act)
}

pub fn infer_with_features<T: Real>(
    g: &Hypergraph,
    features: Matrix<T>,
    params: &HgnnParams<T>,
    act: Activation,
) -> Result<EmbeddingPair<T>> {
    let view = AugmentedView::clean(g, features)?;
    forward(&view, params, act)
}
