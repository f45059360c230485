//! Weighted ridge regression and L2-penalized logistic regression.
//!
//! Both normalize the weights to sum to one, so the penalty is measured
//! against the weighted mean loss. This makes rescaling all weights a no-op
//! and makes duplicating a row equivalent to doubling its weight.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::DenseMatrix;
use super::linalg::solve_psd;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearParams {
    #[inline]
    pub fn eval(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }
}

fn normalized(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Minimize `sum_i w_i (y_i - b - x_i . beta)^2 + l2 * |beta|^2` with the
/// weights normalized to sum to one. The intercept is not penalized.
pub(crate) fn fit_ridge(x: &DenseMatrix, y: &[f64], weights: &[f64], l2: f64) -> Result<LinearParams> {
    let w = normalized(weights);
    let p = x.n_cols;
    let mut xbar = vec![0.0; p];
    let mut ybar = 0.0;
    for i in 0..x.n_rows {
        let row = x.row(i);
        for j in 0..p {
            xbar[j] += w[i] * row[j];
        }
        ybar += w[i] * y[i];
    }
    if p == 0 {
        return Ok(LinearParams {
            intercept: ybar,
            coefficients: Vec::new(),
        });
    }
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    let mut centered = vec![0.0; p];
    for i in 0..x.n_rows {
        if w[i] == 0.0 {
            continue;
        }
        let row = x.row(i);
        for j in 0..p {
            centered[j] = row[j] - xbar[j];
        }
        let r = y[i] - ybar;
        for j in 0..p {
            let wj = w[i] * centered[j];
            b[j] += wj * r;
            for k in j..p {
                a[(j, k)] += wj * centered[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[(j, k)] = a[(k, j)];
        }
        a[(j, j)] += l2;
    }
    let beta = solve_psd(a, &b)?;
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = ybar - coefficients.iter().zip(&xbar).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearParams {
        intercept,
        coefficients,
    })
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(z)) without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logistic_loss(x: &DenseMatrix, y: &[f64], w: &[f64], l2: f64, params: &LinearParams) -> f64 {
    let mut loss = 0.0;
    for i in 0..x.n_rows {
        if w[i] == 0.0 {
            continue;
        }
        let z = params.eval(x.row(i));
        // -[y log s(z) + (1-y) log(1 - s(z))] = softplus(z) - y z
        loss += w[i] * (softplus(z) - y[i] * z);
    }
    loss + l2 * params.coefficients.iter().map(|b| b * b).sum::<f64>()
}

/// Binary logistic regression on targets in {0, 1} by damped Newton steps.
pub(crate) fn fit_logistic(
    x: &DenseMatrix,
    y: &[f64],
    weights: &[f64],
    l2: f64,
    max_iter: usize,
) -> Result<LinearParams> {
    let w = normalized(weights);
    let p = x.n_cols;
    let dim = p + 1;
    let mean_y: f64 = w.iter().zip(y).map(|(wi, yi)| wi * yi).sum();
    let clipped = mean_y.clamp(1e-6, 1.0 - 1e-6);
    let mut params = LinearParams {
        intercept: (clipped / (1.0 - clipped)).ln(),
        coefficients: vec![0.0; p],
    };
    let mut loss = logistic_loss(x, y, &w, l2, &params);
    for _ in 0..max_iter {
        let mut grad = DVector::<f64>::zeros(dim);
        let mut hess = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..x.n_rows {
            if w[i] == 0.0 {
                continue;
            }
            let row = x.row(i);
            let prob = sigmoid(params.eval(row));
            let g = w[i] * (prob - y[i]);
            let h = w[i] * (prob * (1.0 - prob)).max(1e-12);
            grad[0] += g;
            hess[(0, 0)] += h;
            for j in 0..p {
                grad[j + 1] += g * row[j];
                hess[(0, j + 1)] += h * row[j];
                for k in j..p {
                    hess[(j + 1, k + 1)] += h * row[j] * row[k];
                }
            }
        }
        for j in 0..dim {
            for k in 0..j {
                hess[(j, k)] = hess[(k, j)];
            }
        }
        for j in 0..p {
            grad[j + 1] += 2.0 * l2 * params.coefficients[j];
            hess[(j + 1, j + 1)] += 2.0 * l2;
        }
        if grad.amax() < 1e-12 {
            break;
        }
        let step = solve_psd(hess, &grad)?;
        // Backtracking line search on the penalized loss.
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let candidate = LinearParams {
                intercept: params.intercept - t * step[0],
                coefficients: params
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(j, b)| b - t * step[j + 1])
                    .collect(),
            };
            let cand_loss = logistic_loss(x, y, &w, l2, &candidate);
            if cand_loss <= loss {
                let gain = loss - cand_loss;
                params = candidate;
                loss = cand_loss;
                improved = gain > 1e-15 * loss.abs().max(1e-300);
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> DenseMatrix {
        DenseMatrix {
            data: values.to_vec(),
            n_rows: values.len(),
            n_cols: 1,
        }
    }

    #[test]
    fn ridge_recovers_exact_line() {
        let xs = [-2.0, -1.0, 0.5, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let fit = fit_ridge(&column(&xs), &ys, &[1.0; 4], 0.0).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ridge_penalty_shrinks() {
        let xs = [-1.0, 1.0];
        let ys = [-1.0, 1.0];
        // Weighted variance of x is 1, covariance 1: beta = 1 / (1 + l2).
        let fit = fit_ridge(&column(&xs), &ys, &[1.0, 1.0], 1.0).unwrap();
        assert!((fit.coefficients[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn logistic_separates() {
        let xs = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let fit = fit_logistic(&column(&xs), &ys, &[1.0; 6], 1e-4, 100).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            let p = sigmoid(fit.eval(&[*x]));
            assert_eq!(p > 0.5, y > 0.5);
        }
    }
}
