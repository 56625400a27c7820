//! CCA-style self-supervised objective.
//!
//! Both views' embeddings are standardized per column (zero mean, standard
//! deviation `1/√n`), then compared with an invariance term
//! `‖X̂¹ − X̂²‖²_F` and kept from collapsing with a decorrelation term
//! `‖X̂¹ᵀX̂¹ − I‖²_F + ‖X̂²ᵀX̂² − I‖²_F`, at device and hyperedge level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgnn::{EmbeddingPair, HgnnParams};
use crate::numerics::{Matrix, Tape, Var};
use crate::scalar::Real;

/// Added to `std · √n` in the normalization denominator.
pub const NORM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_dev: f64,
    pub lambda_hyp: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_dev: 0.0002,
            lambda_hyp: 0.0035,
            lambda1: 1.0,
            lambda2: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub inv_dev: f64,
    pub dec_dev: f64,
    pub inv_hyp: f64,
    pub dec_hyp: f64,
    pub reg: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn combine(
        inv_dev: f64,
        dec_dev: f64,
        inv_hyp: f64,
        dec_hyp: f64,
        reg: f64,
        w: &LossWeights,
    ) -> Self {
        Self {
            inv_dev,
            dec_dev,
            inv_hyp,
            dec_hyp,
            reg,
            total: (inv_dev + w.lambda_dev * dec_dev)
                + w.lambda1 * (inv_hyp + w.lambda_hyp * dec_hyp)
                + w.lambda2 * reg,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.inv_dev,
            self.dec_dev,
            self.inv_hyp,
            self.dec_hyp,
            self.reg,
            self.total,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// How `‖XᵀX − I‖²_F` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GramRoute {
    /// Forms the `d × d` feature Gram matrix.
    Features,
    /// Uses `‖XXᵀ‖²_F − 2‖X‖²_F + d` with the `n × n` instance Gram matrix.
    Instances,
    /// Whichever Gram matrix is smaller.
    Auto,
}

/// `(x − mean) / (std · √n + ε)` per column, `n` = row count.
pub fn normalize_tape<T: Real>(tape: &mut Tape<T>, x: Var) -> Result<Var> {
    let n = tape.value(x).rows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "normalization needs at least 2 rows, got {n}"
        )));
    }
    let mean = tape.row_mean(x)?;
    let centered = tape.sub_row(x, mean)?;
    let std = tape.row_std(x)?;
    let scaled = tape.scale(std, T::from_usize(n).unwrap().sqrt());
    let denom = tape.add_scalar(scaled, T::from_f64_lossy(NORM_EPS));
    tape.div_row(centered, denom)
}

pub fn invariance_tape<T: Real>(tape: &mut Tape<T>, a: Var, b: Var) -> Result<Var> {
    let diff = tape.sub(a, b)?;
    Ok(tape.frobenius_sq(diff))
}

/// `‖XᵀX − I‖²_F` for one view.
pub fn gram_deviation_tape<T: Real>(tape: &mut Tape<T>, x: Var, route: GramRoute) -> Result<Var> {
    let (n, d) = tape.value(x).shape();
    let route = match route {
        GramRoute::Auto if n < d => GramRoute::Instances,
        GramRoute::Auto => GramRoute::Features,
        r => r,
    };
    let xt = tape.transpose(x);
    match route {
        GramRoute::Features => {
            let gram = tape.matmul(xt, x)?;
            let eye = tape.constant(Matrix::identity(d));
            let dev = tape.sub(gram, eye)?;
            Ok(tape.frobenius_sq(dev))
        }
        _ => {
            let gram = tape.matmul(x, xt)?;
            let g2 = tape.frobenius_sq(gram);
            let x2 = tape.frobenius_sq(x);
            let x2 = tape.scale(x2, T::from_f64_lossy(-2.0));
            let s = tape.add(g2, x2)?;
            Ok(tape.add_scalar(s, T::from_usize(d).unwrap()))
        }
    }
}

pub fn decorrelation_tape<T: Real>(tape: &mut Tape<T>, a: Var, b: Var) -> Result<Var> {
    if tape.value(a).cols() != tape.value(b).cols() {
        return Err(Error::Shape {
            op: "decorrelation",
            left: tape.value(a).shape(),
            right: tape.value(b).shape(),
        });
    }
    let da = gram_deviation_tape(tape, a, GramRoute::Auto)?;
    let db = gram_deviation_tape(tape, b, GramRoute::Auto)?;
    tape.add(da, db)
}

/// Tape nodes of every loss term.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub inv_dev: Var,
    pub dec_dev: Var,
    pub inv_hyp: Var,
    pub dec_hyp: Var,
    pub reg: Var,
    pub total: Var,
}

impl LossTerms {
    pub fn breakdown<T: Real>(&self, tape: &Tape<T>, w: &LossWeights) -> Result<LossBreakdown> {
        let v = |x: Var| -> Result<f64> { Ok(tape.scalar(x)?.to_f64_lossy()) };
        let mut b = LossBreakdown::combine(
            v(self.inv_dev)?,
            v(self.dec_dev)?,
            v(self.inv_hyp)?,
            v(self.dec_hyp)?,
            v(self.reg)?,
            w,
        );
        b.total = v(self.total)?;
        Ok(b)
    }
}

/// Builds the full objective from two views' `(devices, hyperedges)` nodes.
pub fn ssl_loss_tape<T: Real>(
    tape: &mut Tape<T>,
    view1: (Var, Var),
    view2: (Var, Var),
    params: &[Var],
    w: &LossWeights,
) -> Result<LossTerms> {
    let f = T::from_f64_lossy;

    let a1 = normalize_tape(tape, view1.0)?;
    let a2 = normalize_tape(tape, view2.0)?;
    let inv_dev = invariance_tape(tape, a1, a2)?;
    let dec_dev = decorrelation_tape(tape, a1, a2)?;

    let e1 = normalize_tape(tape, view1.1)?;
    let e2 = normalize_tape(tape, view2.1)?;
    let inv_hyp = invariance_tape(tape, e1, e2)?;
    let dec_hyp = decorrelation_tape(tape, e1, e2)?;

    let mut reg = None;
    for &p in params {
        let sq = tape.frobenius_sq(p);
        reg = Some(match reg {
            None => sq,
            Some(acc) => tape.add(acc, sq)?,
        });
    }
    let reg = match reg {
        Some(r) => r,
        None => tape.constant(Matrix::zeros(1, 1)),
    };

    let dev_dec = tape.scale(dec_dev, f(w.lambda_dev));
    let l_dev = tape.add(inv_dev, dev_dec)?;
    let hyp_dec = tape.scale(dec_hyp, f(w.lambda_hyp));
    let l_hyp = tape.add(inv_hyp, hyp_dec)?;
    let l_hyp = tape.scale(l_hyp, f(w.lambda1));
    let l_reg = tape.scale(reg, f(w.lambda2));
    let total = tape.add(l_dev, l_hyp)?;
    let total = tape.add(total, l_reg)?;

    Ok(LossTerms {
        inv_dev,
        dec_dev,
        inv_hyp,
        dec_hyp,
        reg,
        total,
    })
}

pub fn normalize_embeddings<T: Real>(x: &Matrix<T>) -> Result<Matrix<T>> {
    let mut tape = Tape::new();
    let v = tape.constant(x.clone());
    let out = normalize_tape(&mut tape, v)?;
    Ok(tape.value(out).clone())
}

pub fn invariance_loss<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    Ok(a.sub(b)?.frobenius_sq())
}

pub fn decorrelation_loss<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    let mut tape = Tape::new();
    let (va, vb) = (tape.constant(a.clone()), tape.constant(b.clone()));
    let out = decorrelation_tape(&mut tape, va, vb)?;
    tape.scalar(out)
}

/// Evaluates every term for given embeddings of both views.
pub fn total_loss<T: Real>(
    view1: &EmbeddingPair<T>,
    view2: &EmbeddingPair<T>,
    params: &HgnnParams<T>,
    w: &LossWeights,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    let c = |t: &mut Tape<T>, m: &Matrix<T>| t.constant(m.clone());
    let v1 = (
        c(&mut tape, &view1.devices),
        c(&mut tape, &view1.hyperedges),
    );
    let v2 = (
        c(&mut tape, &view2.devices),
        c(&mut tape, &view2.hyperedges),
    );
    let ps: Vec<Var> = params
        .to_flat()
        .iter()
        .map(|m| tape.constant(m.clone()))
        .collect();
    let terms = ssl_loss_tape(&mut tape, v1, v2, &ps, w)?;
    terms.breakdown(&tape, w)
}
