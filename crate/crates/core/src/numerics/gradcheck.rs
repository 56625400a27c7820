//! Whole-computation drivers: reverse-mode evaluation and a central
//! finite-difference oracle over the same closure.

use crate::error::Result;
use crate::numerics::{Matrix, Tape, Var};
use crate::scalar::Real;

/// Runs `computation` on a fresh tape with `params` registered as trainable
/// leaves (in order) and returns the scalar loss with its gradients.
pub fn evaluate_with_gradients<T, F>(
    computation: F,
    params: &[Matrix<T>],
) -> Result<(T, Vec<Matrix<T>>)>
where
    T: Real,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let root = computation(&mut tape, &vars)?;
    let loss = tape.scalar(root)?;
    let grads = tape.backward(root)?;
    Ok((loss, grads))
}

/// Forward-only evaluation of the same closure.
pub fn evaluate<T, F>(computation: &F, params: &[Matrix<T>]) -> Result<T>
where
    T: Real,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.constant(p.clone())).collect();
    let root = computation(&mut tape, &vars)?;
    tape.scalar(root)
}

/// Central differences `(f(θ+h) − f(θ−h)) / 2h`, one scalar entry at a time.
pub fn finite_difference_gradient<T, F>(
    computation: F,
    params: &[Matrix<T>],
    h: T,
) -> Result<Vec<Matrix<T>>>
where
    T: Real,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let mut work: Vec<Matrix<T>> = params.to_vec();
    let two_h = h + h;
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut grad = Matrix::zeros(params[p].rows(), params[p].cols());
        for idx in 0..params[p].len() {
            let orig = params[p].as_slice()[idx];
            work[p].as_mut_slice()[idx] = orig + h;
            let plus = evaluate(&computation, &work)?;
            work[p].as_mut_slice()[idx] = orig - h;
            let minus = evaluate(&computation, &work)?;
            work[p].as_mut_slice()[idx] = orig;
            grad.as_mut_slice()[idx] = (plus - minus) / two_h;
        }
        out.push(grad);
    }
    Ok(out)
}

/// Largest entrywise `|a − b| / max(|a|, |b|, floor)` across all matrices.
pub fn max_relative_error<T: Real>(a: &[Matrix<T>], b: &[Matrix<T>], floor: T) -> T {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.as_slice().iter().zip(y.as_slice()))
        .fold(T::zero(), |acc, (&u, &v)| {
            let scale = u.abs().max(v.abs()).max(floor);
            acc.max((u - v).abs() / scale)
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_matches_analytic() {
        let p = Matrix::from_rows(&[[0.3, -1.2], [2.0, 0.7]]).unwrap();
        let f = |t: &mut Tape<f64>, v: &[Var]| -> Result<Var> {
            let sq = t.frobenius_sq(v[0]);
            Ok(t.scale(sq, 0.5))
        };
        let (loss, g) = evaluate_with_gradients(f, std::slice::from_ref(&p)).unwrap();
        assert!((loss - 0.5 * p.frobenius_sq()).abs() < 1e-15);
        let fd = finite_difference_gradient(f, std::slice::from_ref(&p), 1e-5).unwrap();
        assert!(max_relative_error(&g, &fd, 1e-8) < 1e-6);
        assert_eq!(g[0], p);
    }

    #[test]
    fn linear_loss_is_exact() {
        // loss = sum(a ⊙ θ); central differences are exact up to rounding
        let a = Matrix::from_rows(&[[0.5, -2.0, 4.0]]).unwrap();
        let p = Matrix::from_rows(&[[1.0, 1.0, 1.0]]).unwrap();
        let a2 = a.clone();
        let f = move |t: &mut Tape<f64>, v: &[Var]| -> Result<Var> {
            let c = t.constant(a2.clone());
            let h = t.hadamard(c, v[0])?;
            Ok(t.sum(h))
        };
        let fd = finite_difference_gradient(f, &[p], 0.25).unwrap();
        assert_eq!(fd[0], a);
    }

    #[test]
    fn constant_loss_has_zero_fd() {
        let p = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let f = |t: &mut Tape<f64>, _v: &[Var]| -> Result<Var> {
            Ok(t.constant(Matrix::filled(1, 1, 3.0)))
        };
        let fd = finite_difference_gradient(f, &[p], 1e-5).unwrap();
        assert_eq!(fd[0], Matrix::zeros(1, 2));
    }
}
