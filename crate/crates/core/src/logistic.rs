//! Full-batch gradient descent for L2-regularized logistic regression.
//!
//! Columns are standardized internally; returned coefficients are on the
//! original scale.

use crate::scalar::Scalar;
use crate::stats;

#[derive(Debug, Clone, Copy)]
pub struct GdOptions<T> {
    /// Step size in standardized coordinates; `None` picks 1/L from a bound
    /// on the loss curvature.
    pub step: Option<T>,
    pub max_iter: usize,
    /// Stop once the gradient infinity norm falls below this.
    pub tol: T,
    pub l2: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit<T> {
    pub weights: Vec<T>,
    pub intercept: T,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: T,
}

pub fn fit<T: Scalar>(columns: &[Vec<T>], y: &[T], opts: GdOptions<T>) -> LogisticFit<T> {
    let n = y.len();
    let p = columns.len();
    let nf = T::of(n.max(1) as f64);
    let centers: Vec<T> = columns.iter().map(|c| stats::mean(c)).collect();
    let scales: Vec<T> = columns
        .iter()
        .map(|c| {
            let s = stats::std_dev(c);
            if s > T::zero() {
                s
            } else {
                T::one()
            }
        })
        .collect();
    // row-major standardized design for cache-friendly passes
    let z: Vec<Vec<T>> = (0..n)
        .map(|i| (0..p).map(|j| (columns[j][i] - centers[j]) / scales[j]).collect())
        .collect();

    let curvature = T::of(0.25) * T::of(p.max(1) as f64) + opts.l2;
    let step = opts.step.unwrap_or_else(|| T::one() / curvature);
    let mut w = vec![T::zero(); p];
    let mut b = T::zero();
    let mut grad_w = vec![T::zero(); p];
    let mut grad_norm = T::infinity();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        grad_w.iter_mut().for_each(|g| *g = T::zero());
        let mut grad_b = T::zero();
        for (row, &target) in z.iter().zip(y) {
            let eta = row.iter().zip(&w).fold(b, |acc, (&x, &wj)| acc + x * wj);
            let err = eta.logistic() - target;
            grad_b = grad_b + err;
            for (g, &x) in grad_w.iter_mut().zip(row) {
                *g = *g + err * x;
            }
        }
        grad_b = grad_b / nf;
        for (g, &wj) in grad_w.iter_mut().zip(&w) {
            *g = *g / nf + opts.l2 * wj;
        }
        grad_norm = grad_w.iter().fold(grad_b.abs(), |m, g| m.max(g.abs()));
        if grad_norm < opts.tol {
            converged = true;
            break;
        }
        b = b - step * grad_b;
        for (wj, &g) in w.iter_mut().zip(&grad_w) {
            *wj = *wj - step * g;
        }
        iterations += 1;
    }

    let weights: Vec<T> = w.iter().zip(&scales).map(|(&wj, &s)| wj / s).collect();
    let intercept = weights
        .iter()
        .zip(&centers)
        .fold(b, |acc, (&wj, &c)| acc - wj * c);
    LogisticFit {
        weights,
        intercept,
        iterations,
        converged,
        grad_norm,
    }
}
