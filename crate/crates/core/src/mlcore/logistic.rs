use serde::{Deserialize, Serialize};

use super::boosting::sigmoid;
use super::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticParams {
    pub l2: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss plus `l2 / 2 * |w|^2` (bias unpenalized), with its gradient
/// with respect to `(w, b)`.
pub fn loss_and_gradient(x: &Matrix, y: &[f64], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.rows() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for i in 0..x.rows() {
        let row = x.row(i);
        let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        loss += softplus(z) - y[i] * z;
        let r = sigmoid(z) - y[i];
        gb += r;
        for (g, a) in gw.iter_mut().zip(row) {
            *g += r * a;
        }
    }
    loss /= n;
    gb /= n;
    let mut reg = 0.0;
    for (g, c) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * c;
        reg += c * c;
    }
    (loss + 0.5 * l2 * reg, gw, gb)
}

impl LogisticModel {
    /// Gradient descent with Armijo backtracking until the largest gradient
    /// component drops below `tolerance` or the iteration budget runs out.
    pub fn fit(x: &Matrix, y: &[f64], params: &LogisticParams) -> Self {
        let d = x.cols();
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let (mut loss, mut gw, mut gb) = loss_and_gradient(x, y, &w, b, params.l2);
        let mut step = 1.0;
        let mut converged = false;
        let mut it = 0;
        while it < params.max_iterations {
            let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
            if gmax < params.tolerance {
                converged = true;
                break;
            }
            let gnorm2 = gb * gb + gw.iter().map(|g| g * g).sum::<f64>();
            loop {
                let w_new: Vec<f64> = w.iter().zip(&gw).map(|(c, g)| c - step * g).collect();
                let b_new = b - step * gb;
                let (l_new, gw_new, gb_new) = loss_and_gradient(x, y, &w_new, b_new, params.l2);
                if l_new <= loss - 0.5 * step * gnorm2 || step < 1e-12 {
                    w = w_new;
                    b = b_new;
                    loss = l_new;
                    gw = gw_new;
                    gb = gb_new;
                    break;
                }
                step *= 0.5;
            }
            step = (step * 2.0).min(1e3);
            it += 1;
        }
        LogisticModel {
            weights: w,
            bias: b,
            iterations: it,
            converged,
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.bias + x.iter().zip(&self.weights).map(|(a, c)| a * c).sum::<f64>())
    }
}
