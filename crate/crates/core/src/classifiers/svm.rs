//! RBF-kernel soft-margin SVM trained by sequential minimal optimization
//! with second-order working-set selection. Multi-class problems are
//! decomposed one-vs-rest.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_fit_input, check_predict_input, classes_present, to_f64};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    /// Kernel width; `None` means `1 / (d * var(X))`.
    pub gamma: Option<f64>,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iter: 10_000_000,
        }
    }
}

pub fn rbf_kernel(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// `1 / (d * var(X))` over all entries; 1 when the data has no spread.
pub fn default_gamma(x: ArrayView2<'_, f64>) -> f64 {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (x.ncols() as f64 * var)
    } else {
        1.0
    }
}

pub fn kernel_matrix(x: ArrayView2<'_, f64>, gamma: f64) -> Array2<f64> {
    let n = x.nrows();
    let sq: Vec<f64> = x.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect();
    let mut k = x.dot(&x.t());
    for i in 0..n {
        for j in 0..n {
            let d2 = (sq[i] + sq[j] - 2.0 * k[[i, j]]).max(0.0);
            k[[i, j]] = (-gamma * d2).exp();
        }
        k[[i, i]] = 1.0;
    }
    k
}

/// Dual objective `sum(a) - 0.5 * sum_ij a_i a_j y_i y_j K_ij` (to be maximized).
pub fn dual_objective(alpha: &[f64], y: &[f64], k: &Array2<f64>) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[[i, j]];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves the C-SVC dual for labels `y` in {-1, +1} given a kernel matrix.
pub fn solve_dual(k: &Array2<f64>, y: &[f64], c: f64, tol: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // gradient of 0.5 a'Qa - e'a
    let mut g = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if y[t] > 0.0 {
                if !upper(alpha[t]) && -g[t] >= gmax {
                    gmax = -g[t];
                    i = t;
                }
            } else if !lower(alpha[t]) && g[t] >= gmax {
                gmax = g[t];
                i = t;
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        let ki = k.row(i);
        for t in 0..n {
            let (grad_diff, violation) = if y[t] > 0.0 {
                if lower(alpha[t]) {
                    continue;
                }
                (gmax + g[t], g[t])
            } else {
                if upper(alpha[t]) {
                    continue;
                }
                (gmax - g[t], -g[t])
            };
            if violation >= gmax2 {
                gmax2 = violation;
            }
            if grad_diff > 0.0 {
                let quad = k[[i, i]] + k[[t, t]] - 2.0 * ki[t];
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= obj_min {
                    obj_min = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tol || j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let kij = ki[j];
        let mut quad = k[[i, i]] + k[[j, j]] - 2.0 * kij;
        if quad <= 0.0 {
            quad = TAU;
        }
        let (mut ai, mut aj);
        if y[i] != y[j] {
            let delta = (-g[i] - g[j]) / quad;
            let diff = ai_old - aj_old;
            ai = ai_old + delta;
            aj = aj_old + delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (g[i] - g[j]) / quad;
            let sum = ai_old + aj_old;
            ai = ai_old - delta;
            aj = aj_old + delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let dai = (ai - ai_old) * y[i];
        let daj = (aj - aj_old) * y[j];
        let kj = k.row(j);
        for t in 0..n {
            g[t] += y[t] * (ki[t] * dai + kj[t] * daj);
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * g[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    };
    DualSolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

/// One binary machine; positive decision means the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support_vectors: Array2<f64>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Array1<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BinarySvm {
    fn fit(x: ArrayView2<'_, f64>, k: &Array2<f64>, y: &[f64], params: &SvmParams) -> Self {
        let sol = solve_dual(k, y, params.c, params.tol, params.max_iter);
        let sv: Vec<usize> = (0..y.len()).filter(|&t| sol.alpha[t] > 0.0).collect();
        BinarySvm {
            support_vectors: x.select(Axis(0), &sv),
            dual_coef: sv.iter().map(|&t| sol.alpha[t] * y[t]).collect(),
            rho: sol.rho,
            iterations: sol.iterations,
            converged: sol.converged,
        }
    }

    fn decision(&self, x: ArrayView1<'_, f64>, gamma: f64) -> f64 {
        self.support_vectors
            .axis_iter(Axis(0))
            .zip(self.dual_coef.iter())
            .map(|(sv, c)| c * rbf_kernel(sv, x, gamma))
            .sum::<f64>()
            - self.rho
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub n_classes: usize,
    pub n_features: usize,
    pub c: f64,
    pub gamma: f64,
    /// One machine for binary problems (class 1 positive), else one per class.
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    pub fn fit<T: Scalar>(x: ArrayView2<'_, T>, y: &[usize], n_classes: usize, params: &SvmParams) -> Result<Self> {
        check_fit_input(x, y, n_classes)?;
        if classes_present(y, n_classes) < 2 {
            return Err(Error::DegenerateFit("SVM needs at least 2 classes".into()));
        }
        if !(params.c > 0.0) || params.gamma.is_some_and(|g| !(g > 0.0)) {
            return Err(Error::invalid("SVM C and gamma must be positive"));
        }
        let xf = to_f64(x);
        let gamma = params.gamma.unwrap_or_else(|| default_gamma(xf.view()));
        let k = kernel_matrix(xf.view(), gamma);
        let positives: Vec<usize> = if n_classes == 2 {
            vec![1]
        } else {
            (0..n_classes).collect()
        };
        let machines = positives
            .par_iter()
            .map(|&pos| {
                let ys: Vec<f64> = y.iter().map(|&c| if c == pos { 1.0 } else { -1.0 }).collect();
                BinarySvm::fit(xf.view(), &k, &ys, params)
            })
            .collect();
        Ok(SvmModel {
            n_classes,
            n_features: xf.ncols(),
            c: params.c,
            gamma,
            machines,
        })
    }

    /// Decision values, one column per machine.
    pub fn decision_function<T: Scalar>(&self, x: ArrayView2<'_, T>) -> Result<Array2<f64>> {
        check_predict_input(x, self.n_features)?;
        let xf = to_f64(x);
        let mut out = Array2::zeros((xf.nrows(), self.machines.len()));
        for (i, row) in xf.axis_iter(Axis(0)).enumerate() {
            for (m, svm) in self.machines.iter().enumerate() {
                out[[i, m]] = svm.decision(row, self.gamma);
            }
        }
        Ok(out)
    }

    pub fn predict<T: Scalar>(&self, x: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        let dec = self.decision_function(x)?;
        if self.n_classes == 2 {
            Ok(dec.column(0).iter().map(|&v| (v > 0.0) as usize).collect())
        } else {
            Ok(super::argmax_rows(&dec))
        }
    }

    pub fn n_support(&self) -> usize {
        self.machines.iter().map(|m| m.dual_coef.len()).sum()
    }
}
