//! L2-regularized logistic regression. Binary problems use a single sigmoid
//! score, three or more classes a softmax. The intercept is not penalized.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{check_fit_input, check_predict_input, classes_present, to_f64};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    /// Inverse regularization strength; the penalty is `1 / (2 C n)`.
    pub c: f64,
    /// Explicit penalty weight, overriding `c` when set.
    pub lambda: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            c: 1.0,
            lambda: None,
            tol: 1e-6,
            max_iter: 5000,
        }
    }
}

impl LogisticParams {
    pub fn with_lambda(lambda: f64) -> Self {
        LogisticParams {
            lambda: Some(lambda),
            ..Default::default()
        }
    }

    pub fn penalty(&self, n: usize) -> f64 {
        self.lambda.unwrap_or(1.0 / (2.0 * self.c * n as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub n_classes: usize,
    pub n_features: usize,
    /// `1 x d` for binary problems, `K x d` otherwise.
    pub coef: Array2<f64>,
    pub intercept: Array1<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticTrace {
    /// Objective value before the first step and after every accepted step.
    pub losses: Vec<f64>,
    pub final_grad_norm: f64,
}

/// Parameter vector length for a problem shape.
pub fn n_params(n_features: usize, n_classes: usize) -> usize {
    let k = score_rows(n_classes);
    k * n_features + k
}

fn score_rows(n_classes: usize) -> usize {
    if n_classes == 2 {
        1
    } else {
        n_classes
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Regularized mean cross-entropy and its gradient. `theta` holds the
/// row-major coefficient block followed by the intercepts.
pub fn loss_and_gradient(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    n_classes: usize,
    lambda: f64,
    theta: &[f64],
) -> (f64, Vec<f64>) {
    let (n, d) = x.dim();
    let k = score_rows(n_classes);
    let w = ndarray::ArrayView2::from_shape((k, d), &theta[..k * d]).expect("theta layout");
    let b = &theta[k * d..];
    let mut scores = x.dot(&w.t());
    for mut row in scores.axis_iter_mut(Axis(0)) {
        for (s, bi) in row.iter_mut().zip(b) {
            *s += bi;
        }
    }
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    // residuals overwrite scores: p - onehot(y)
    if k == 1 {
        for (i, s) in scores.column_mut(0).iter_mut().enumerate() {
            let z = *s;
            let yi = (y[i] == 1) as u8 as f64;
            loss += softplus(z) - yi * z;
            *s = sigmoid(z) - yi;
        }
    } else {
        for (i, mut row) in scores.axis_iter_mut(Axis(0)).enumerate() {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|&z| (z - m).exp()).sum();
            let lse = m + sum.ln();
            loss += lse - row[y[i]];
            for (c, z) in row.iter_mut().enumerate() {
                *z = (*z - lse).exp() - (c == y[i]) as u8 as f64;
            }
        }
    }
    loss *= inv_n;
    let reg: f64 = w.iter().map(|v| v * v).sum();
    loss += lambda * reg;

    let gw = scores.t().dot(&x);
    let mut grad = Vec::with_capacity(theta.len());
    for (g, wv) in gw.iter().zip(w.iter()) {
        grad.push(g * inv_n + 2.0 * lambda * wv);
    }
    for c in 0..k {
        grad.push(scores.column(c).sum() * inv_n);
    }
    (loss, grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Lbfgs {
    theta: Vec<f64>,
    iterations: usize,
    converged: bool,
    trace: LogisticTrace,
}

/// Limited-memory BFGS with Armijo backtracking; every accepted step lowers
/// the objective.
fn minimize<F>(mut f: F, theta0: Vec<f64>, tol: f64, max_iter: usize) -> Lbfgs
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    const MEMORY: usize = 10;
    let mut theta = theta0;
    let (mut fx, mut g) = f(&theta);
    let mut losses = vec![fx];
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        if norm(&g) <= tol {
            converged = true;
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, yv, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(yv) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = hist
            .back()
            .map_or(1.0 / norm(&g).max(1.0), |(s, yv, _)| dot(s, yv) / dot(yv, yv));
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, yv, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let bcoef = rho * dot(yv, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - bcoef) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((next, fnext, gnext)) = accepted else {
            break;
        };
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gnext.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * norm(&s) * norm(&yv) {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, yv, 1.0 / sy));
        }
        theta = next;
        let stalled = fx - fnext <= f64::EPSILON * fx.abs();
        fx = fnext;
        g = gnext;
        losses.push(fx);
        iterations += 1;
        if stalled && norm(&g) <= tol.sqrt() {
            converged = norm(&g) <= tol;
            break;
        }
    }
    if norm(&g) <= tol {
        converged = true;
    }
    let final_grad_norm = norm(&g);
    Lbfgs {
        theta,
        iterations,
        converged,
        trace: LogisticTrace {
            losses,
            final_grad_norm,
        },
    }
}

impl LogisticModel {
    pub fn fit<T: Scalar>(
        x: ArrayView2<'_, T>,
        y: &[usize],
        n_classes: usize,
        params: &LogisticParams,
    ) -> Result<Self> {
        Self::fit_traced(x, y, n_classes, params).map(|(m, _)| m)
    }

    pub fn fit_traced<T: Scalar>(
        x: ArrayView2<'_, T>,
        y: &[usize],
        n_classes: usize,
        params: &LogisticParams,
    ) -> Result<(Self, LogisticTrace)> {
        check_fit_input(x, y, n_classes)?;
        if classes_present(y, n_classes) < 2 {
            return Err(Error::DegenerateFit(
                "logistic regression needs at least 2 classes".into(),
            ));
        }
        if !(params.c > 0.0) || params.lambda.is_some_and(|l| !(l >= 0.0)) {
            return Err(Error::invalid("regularization must be positive"));
        }
        let xf = to_f64(x);
        let (n, d) = xf.dim();
        let lambda = params.penalty(n);
        let k = score_rows(n_classes);
        let run = minimize(
            |theta| loss_and_gradient(xf.view(), y, n_classes, lambda, theta),
            vec![0.0; n_params(d, n_classes)],
            params.tol,
            params.max_iter,
        );
        if !run.converged {
            log::debug!(
                "logistic regression stopped after {} iterations with gradient norm {:.3e}",
                run.iterations,
                run.trace.final_grad_norm
            );
        }
        let coef = Array2::from_shape_vec((k, d), run.theta[..k * d].to_vec()).expect("coef layout");
        let intercept = Array1::from(run.theta[k * d..].to_vec());
        Ok((
            LogisticModel {
                n_classes,
                n_features: d,
                coef,
                intercept,
                lambda,
                iterations: run.iterations,
                converged: run.converged,
            },
            run.trace,
        ))
    }

    pub fn predict_proba<T: Scalar>(&self, x: ArrayView2<'_, T>) -> Result<Array2<f64>> {
        check_predict_input(x, self.n_features)?;
        let xf = to_f64(x);
        let mut scores = xf.dot(&self.coef.t());
        for mut row in scores.axis_iter_mut(Axis(0)) {
            row += &self.intercept;
        }
        let n = xf.nrows();
        let mut p = Array2::zeros((n, self.n_classes));
        for i in 0..n {
            if self.n_classes == 2 {
                let q = sigmoid(scores[[i, 0]]);
                p[[i, 0]] = 1.0 - q;
                p[[i, 1]] = q;
            } else {
                let row = scores.row(i);
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = row.iter().map(|&z| (z - m).exp()).collect();
                let s: f64 = e.iter().sum();
                for (c, v) in e.iter().enumerate() {
                    p[[i, c]] = v / s;
                }
            }
        }
        Ok(p)
    }

    pub fn predict<T: Scalar>(&self, x: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        Ok(super::argmax_rows(&self.predict_proba(x)?))
    }

    pub fn coef_norm(&self) -> f64 {
        self.coef.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}
