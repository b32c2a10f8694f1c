//! L2-regularized logistic regression fit by damped Newton steps.
//!
//! Objective over a design matrix `x` (n × d, row-major):
//! `sum_i [log(1 + e^{z_i}) - y_i z_i] + (l2 / 2) |w|^2`, `z_i = w·x_i + b`.
//! The intercept is not penalized. Inputs are standardized with the training
//! mean and standard deviation before fitting.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub l2_penalty: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            l2_penalty: 1.0,
            max_iterations: 100,
            tolerance: 1e-8,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Regularized cross-entropy and its gradient. `coef` holds `d` weights then
/// the intercept.
pub fn loss_and_gradient(x: &[f64], y: &[f64], dim: usize, coef: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let (w, b) = coef.split_at(dim);
    let b = b[0];
    let mut loss = 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    let mut grad = vec![0.0; dim + 1];
    for (j, g) in grad.iter_mut().take(dim).enumerate() {
        *g = l2 * w[j];
    }
    for (row, &yi) in x.chunks_exact(dim).zip(y) {
        let z = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        loss += softplus(z) - yi * z;
        let r = sigmoid(z) - yi;
        for (g, xv) in grad.iter_mut().zip(row) {
            *g += r * xv;
        }
        grad[dim] += r;
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    mean: Vec<f64>,
    scale: Vec<f64>,
    coef: Vec<f64>,
    /// Objective value after each accepted iterate, starting from zero weights.
    pub loss_history: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        LogisticModel {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
            coef: vec![0.0; dim + 1],
            loss_history: Vec::new(),
        }
    }

    pub fn fit(x: &[f64], y: &[f64], dim: usize, params: &LogisticParams) -> Self {
        let n = y.len();
        let mut mean = vec![0.0; dim];
        let mut scale = vec![0.0; dim];
        for row in x.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n as f64;
            }
        }
        for row in x.chunks_exact(dim) {
            for ((s, v), m) in scale.iter_mut().zip(row).zip(&mean) {
                *s += (v - m).powi(2) / n as f64;
            }
        }
        for s in &mut scale {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }
        let z: Vec<f64> = x
            .chunks_exact(dim)
            .flat_map(|row| {
                row.iter()
                    .zip(&mean)
                    .zip(&scale)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect::<Vec<_>>()
            })
            .collect();

        let (coef, loss_history) = minimize(&z, y, dim, params);
        LogisticModel {
            mean,
            scale,
            coef,
            loss_history,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let dim = self.mean.len();
        let z: f64 = x
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .zip(&self.coef[..dim])
            .map(|(((v, m), s), w)| (v - m) / s * w)
            .sum::<f64>()
            + self.coef[dim];
        sigmoid(z)
    }
}

fn minimize(x: &[f64], y: &[f64], dim: usize, params: &LogisticParams) -> (Vec<f64>, Vec<f64>) {
    let l2 = params.l2_penalty;
    let mut coef = vec![0.0; dim + 1];
    let (mut loss, mut grad) = loss_and_gradient(x, y, dim, &coef, l2);
    let mut history = vec![loss];

    for _ in 0..params.max_iterations {
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm <= params.tolerance {
            break;
        }
        let hess = hessian(x, dim, &coef, l2);
        let dir = cholesky_solve(hess, &grad, dim + 1).unwrap_or_else(|| grad.clone());

        let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-12 {
            let trial: Vec<f64> = coef.iter().zip(&dir).map(|(c, d)| c - step * d).collect();
            let (tl, tg) = loss_and_gradient(x, y, dim, &trial, l2);
            if tl <= loss - 1e-4 * step * slope {
                accepted = Some((trial, tl, tg));
                break;
            }
            step *= 0.5;
        }
        let Some((c, l, g)) = accepted else { break };
        let improvement = loss - l;
        coef = c;
        loss = l;
        grad = g;
        history.push(loss);
        if improvement <= params.tolerance * loss.abs().max(1.0) {
            break;
        }
    }
    (coef, history)
}

fn hessian(x: &[f64], dim: usize, coef: &[f64], l2: f64) -> Vec<f64> {
    let m = dim + 1;
    let mut h = vec![0.0; m * m];
    for row in x.chunks_exact(dim) {
        let z = row.iter().zip(&coef[..dim]).map(|(a, b)| a * b).sum::<f64>() + coef[dim];
        let p = sigmoid(z);
        let w = p * (1.0 - p);
        for a in 0..m {
            let xa = if a < dim { row[a] } else { 1.0 };
            for b in 0..=a {
                let xb = if b < dim { row[b] } else { 1.0 };
                h[a * m + b] += w * xa * xb;
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            h[b * m + a] = h[a * m + b];
        }
        h[a * m + a] += if a < dim { l2 } else { 0.0 } + 1e-10;
    }
    h
}

fn cholesky_solve(mut a: Vec<f64>, b: &[f64], m: usize) -> Option<Vec<f64>> {
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d -= a[j * m + k] * a[j * m + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[j * m + j] = d;
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / d;
        }
    }
    let mut z = b.to_vec();
    for i in 0..m {
        for k in 0..i {
            z[i] -= a[i * m + k] * z[k];
        }
        z[i] /= a[i * m + i];
    }
    for i in (0..m).rev() {
        for k in i + 1..m {
            z[i] -= a[k * m + i] * z[k];
        }
        z[i] /= a[i * m + i];
    }
    Some(z)
}
