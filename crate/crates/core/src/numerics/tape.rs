//! Reverse-mode gradient tape over dense matrices.
//!
//! Nodes are appended in evaluation order, so walking the node list
//! backwards from the root is a reverse topological traversal. Every
//! backward rule uses field arithmetic only, so the tape also runs over
//! exact rationals; `row_std` needs a square root and lives in the `Real`
//! impl block.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SparseMatrix};
use crate::scalar::{Real, Scalar};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Hadamard(Var, Var),
    Relu(Var),
    Tanh(Var),
    RowMean(Var),
    RowStd(Var),
    SubRow(Var, Var),
    DivRow(Var, Var),
    FrobeniusSq(Var),
    Sum(Var),
    SparseMatMul(Arc<SparseMatrix<T>>, Var),
    ScaleRows(Var, Arc<Vec<T>>),
}

struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
    requires_grad: bool,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: Vec<Var>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a trainable parameter; gradients are returned in registration order.
    pub fn param(&mut self, value: Matrix<T>) -> Var {
        let v = self.push(value, Op::Leaf, true);
        self.params.push(v);
        v
    }

    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn params(&self) -> &[Var] {
        &self.params
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> Result<T> {
        let m = self.value(v);
        if m.shape() != (1, 1) {
            return Err(Error::Shape {
                op: "scalar",
                left: m.shape(),
                right: (1, 1),
            });
        }
        Ok(m.get(0, 0).clone())
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn unary(&mut self, a: Var, value: Matrix<T>, op: Op<T>) -> Var {
        let rg = self.rg(a);
        self.push(value, op, rg)
    }

    fn binary(&mut self, a: Var, b: Var, value: Matrix<T>, op: Op<T>) -> Var {
        let rg = self.rg(a) || self.rg(b);
        self.push(value, op, rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.binary(a, b, value, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.unary(a, value, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.binary(a, b, value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.binary(a, b, value, Op::Sub(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let value = self.value(a).scale(&s);
        self.unary(a, value, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: T) -> Var {
        let value = self.value(a).map(|v| v.clone() + s.clone());
        self.unary(a, value, Op::AddScalar(a))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        Ok(self.binary(a, b, value, Op::Hadamard(a, b)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).relu();
        self.unary(a, value, Op::Relu(a))
    }

    /// Elementwise `tanh`; fails for scalar types without one (exact rationals).
    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let mut data = Vec::with_capacity(x.len());
        for v in x.as_slice() {
            data.push(v.tanh_checked().ok_or_else(|| {
                Error::InvalidArgument(format!("tanh is not available for {}", T::NAME))
            })?);
        }
        let value = Matrix::from_vec(x.rows(), x.cols(), data)?;
        Ok(self.unary(a, value, Op::Tanh(a)))
    }

    /// Column means as a `1 × cols` node.
    pub fn row_mean(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).row_mean()?;
        Ok(self.unary(a, value, Op::RowMean(a)))
    }

    /// Subtracts a `1 × cols` row from every row of `a`.
    pub fn sub_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let value = self.broadcast(a, row, "sub_row", |x, r| x.clone() - r.clone())?;
        Ok(self.binary(a, row, value, Op::SubRow(a, row)))
    }

    /// Divides every row of `a` elementwise by a `1 × cols` row.
    pub fn div_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let value = self.broadcast(a, row, "div_row", |x, r| x.clone() / r.clone())?;
        Ok(self.binary(a, row, value, Op::DivRow(a, row)))
    }

    fn broadcast(
        &self,
        a: Var,
        row: Var,
        op: &'static str,
        f: impl Fn(&T, &T) -> T,
    ) -> Result<Matrix<T>> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.rows() != 1 || rv.cols() != av.cols() {
            return Err(Error::Shape {
                op,
                left: av.shape(),
                right: rv.shape(),
            });
        }
        let mut out = av.clone();
        for r in 0..out.rows() {
            for (o, rr) in out.row_mut(r).iter_mut().zip(rv.as_slice()) {
                *o = f(o, rr);
            }
        }
        Ok(out)
    }

    pub fn frobenius_sq(&mut self, a: Var) -> Var {
        let value = Matrix::filled(1, 1, self.value(a).frobenius_sq());
        self.unary(a, value, Op::FrobeniusSq(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::filled(1, 1, self.value(a).sum());
        self.unary(a, value, Op::Sum(a))
    }

    /// `s · a` for a constant sparse `s`.
    pub fn sparse_matmul(&mut self, s: Arc<SparseMatrix<T>>, a: Var) -> Result<Var> {
        let value = s.mul_dense(self.value(a))?;
        Ok(self.unary(a, value, Op::SparseMatMul(s, a)))
    }

    /// Multiplies row `i` of `a` by the constant `factors[i]`.
    pub fn scale_rows(&mut self, a: Var, factors: Arc<Vec<T>>) -> Result<Var> {
        let value = self.value(a).scale_rows(&factors)?;
        Ok(self.unary(a, value, Op::ScaleRows(a, factors)))
    }

    /// Gradients of the `1 × 1` node `root` with respect to every registered
    /// parameter, in registration order.
    pub fn backward(&self, root: Var) -> Result<Vec<Matrix<T>>> {
        let shape = self.value(root).shape();
        if shape != (1, 1) {
            return Err(Error::Shape {
                op: "backward (root must be scalar)",
                left: shape,
                right: (1, 1),
            });
        }
        let mut grads: Vec<Option<Matrix<T>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Matrix::filled(1, 1, T::one()));

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                grads[i] = Some(g);
                continue;
            }
            self.propagate(node, &g, &mut grads)?;
        }

        Ok(self
            .params
            .iter()
            .map(|p| {
                grads[p.0]
                    .take()
                    .unwrap_or_else(|| Matrix::zeros(self.value(*p).rows(), self.value(*p).cols()))
            })
            .collect())
    }

    fn accumulate(&self, grads: &mut [Option<Matrix<T>>], v: Var, g: Matrix<T>) -> Result<()> {
        if !self.rg(v) {
            return Ok(());
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g)?,
            slot @ None => *slot = Some(g),
        }
        Ok(())
    }

    fn propagate(
        &self,
        node: &Node<T>,
        g: &Matrix<T>,
        grads: &mut [Option<Matrix<T>>],
    ) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    let ga = g.matmul_nt(self.value(*b))?;
                    self.accumulate(grads, *a, ga)?;
                }
                if self.rg(*b) {
                    let gb = self.value(*a).matmul_tn(g)?;
                    self.accumulate(grads, *b, gb)?;
                }
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose())?,
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone())?;
                self.accumulate(grads, *b, g.clone())?;
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone())?;
                self.accumulate(grads, *b, g.map(|v| T::zero() - v.clone()))?;
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, g.scale(s))?,
            Op::AddScalar(a) => self.accumulate(grads, *a, g.clone())?,
            Op::Hadamard(a, b) => {
                if self.rg(*a) {
                    self.accumulate(grads, *a, g.hadamard(self.value(*b))?)?;
                }
                if self.rg(*b) {
                    self.accumulate(grads, *b, g.hadamard(self.value(*a))?)?;
                }
            }
            Op::Relu(a) => {
                let ga = g.zip_map(self.value(*a), "relu_backward", |gv, x| {
                    if *x > T::zero() {
                        gv.clone()
                    } else {
                        T::zero()
                    }
                })?;
                self.accumulate(grads, *a, ga)?;
            }
            Op::Tanh(a) => {
                let ga = g.zip_map(&node.value, "tanh_backward", |gv, y| {
                    gv.clone() * (T::one() - y.clone() * y.clone())
                })?;
                self.accumulate(grads, *a, ga)?;
            }
            Op::RowMean(a) => {
                let x = self.value(*a);
                let n = T::from_usize(x.rows()).unwrap();
                let scaled: Vec<T> = g.as_slice().iter().map(|v| v.clone() / n.clone()).collect();
                let mut ga = Matrix::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    ga.row_mut(r).clone_from_slice(&scaled);
                }
                self.accumulate(grads, *a, ga)?;
            }
            Op::RowStd(a) => {
                let x = self.value(*a);
                let mean = x.row_mean()?;
                let nm1 = T::from_usize(x.rows() - 1).unwrap();
                let coef: Vec<T> = g
                    .as_slice()
                    .iter()
                    .zip(node.value.as_slice())
                    .map(|(gv, s)| {
                        if s.is_zero() {
                            T::zero()
                        } else {
                            gv.clone() / (nm1.clone() * s.clone())
                        }
                    })
                    .collect();
                let mut ga = Matrix::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    for (c, o) in ga.row_mut(r).iter_mut().enumerate() {
                        *o = coef[c].clone() * (x.get(r, c).clone() - mean.get(0, c).clone());
                    }
                }
                self.accumulate(grads, *a, ga)?;
            }
            Op::SubRow(a, row) => {
                self.accumulate(grads, *a, g.clone())?;
                if self.rg(*row) {
                    let colsum = g.row_mean()?.scale(&T::from_usize(g.rows()).unwrap());
                    self.accumulate(grads, *row, colsum.map(|v| T::zero() - v.clone()))?;
                }
            }
            Op::DivRow(a, row) => {
                let rv = self.value(*row);
                if self.rg(*a) {
                    let mut ga = g.clone();
                    for r in 0..ga.rows() {
                        for (o, d) in ga.row_mut(r).iter_mut().zip(rv.as_slice()) {
                            *o = o.clone() / d.clone();
                        }
                    }
                    self.accumulate(grads, *a, ga)?;
                }
                if self.rg(*row) {
                    let x = self.value(*a);
                    let mut gr = Matrix::<T>::zeros(1, rv.cols());
                    for r in 0..x.rows() {
                        for c in 0..rv.cols() {
                            let cur = gr.get(0, c).clone();
                            gr.set(0, c, cur + g.get(r, c).clone() * x.get(r, c).clone());
                        }
                    }
                    let gr = gr.zip_map(rv, "div_row_backward", |s, d| {
                        T::zero() - s.clone() / (d.clone() * d.clone())
                    })?;
                    self.accumulate(grads, *row, gr)?;
                }
            }
            Op::FrobeniusSq(a) => {
                let two_g = g.get(0, 0).clone() + g.get(0, 0).clone();
                self.accumulate(grads, *a, self.value(*a).scale(&two_g))?;
            }
            Op::Sum(a) => {
                let x = self.value(*a);
                self.accumulate(
                    grads,
                    *a,
                    Matrix::filled(x.rows(), x.cols(), g.get(0, 0).clone()),
                )?;
            }
            Op::SparseMatMul(s, a) => {
                let x = self.value(*a);
                let mut ga = Matrix::zeros(x.rows(), x.cols());
                s.mul_transpose_into(g, &mut ga)?;
                self.accumulate(grads, *a, ga)?;
            }
            Op::ScaleRows(a, f) => self.accumulate(grads, *a, g.scale_rows(f)?)?,
        }
        Ok(())
    }
}

impl<T: Real> Tape<T> {
    /// Sample standard deviation of each column as a `1 × cols` node.
    pub fn row_std(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).row_std()?;
        Ok(self.unary(a, value, Op::RowStd(a)))
    }
}
