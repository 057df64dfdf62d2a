//! Principal component analysis by symmetric eigendecomposition.
//!
//! With more dimensions than samples the components come from the
//! `n x n` Gram matrix of the centered data (`v = Xc^T u / sqrt(lambda)`),
//! costing `O(n^2 d)`; otherwise from the `d x d` covariance matrix.
//! Components are sign-normalized so their largest-magnitude entry is
//! positive.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k x d`, orthonormal rows.
    pub components: Matrix,
    /// Sample variance (denominator `n - 1`) along each component, non-increasing.
    pub explained_variance: Vec<f64>,
    mean_projection: Vec<f64>,
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

fn normalize_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Orthogonalizes `v` against `basis` (modified Gram-Schmidt) and
/// normalizes it. Returns `false` if nothing of `v` survives.
fn orthonormalize(v: &mut [f64], basis: &[Vec<f64>]) -> bool {
    for _ in 0..2 {
        for b in basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            v.iter_mut().zip(b).for_each(|(a, c)| *a -= dot * c);
        }
    }
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm < 1e-6 {
        return false;
    }
    v.iter_mut().for_each(|a| *a /= norm);
    true
}

pub fn fit_pca(rows: &Matrix, k: usize) -> Result<PcaModel> {
    let n = rows.rows();
    let d = rows.cols();
    if k == 0 || k > n.min(d) {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {k} components of {n} samples x {d} dims"
        )));
    }
    if !rows.is_finite() {
        return Err(Error::InvalidArgument("PCA input has non-finite values".into()));
    }

    // Constant columns get zero loadings, so the decomposition can run on
    // the others alone unless the canonical completion may need them.
    let active: Vec<usize> = (0..d)
        .filter(|&c| (1..n).any(|r| rows.get(r, c) != rows.get(0, c)))
        .collect();
    if active.len() < d && k <= active.len() {
        let mut sub = Matrix::zeros(n, active.len());
        for r in 0..n {
            for (j, &c) in active.iter().enumerate() {
                sub.set(r, j, rows.get(r, c));
            }
        }
        let inner = fit_pca(&sub, k)?;
        let mut mean: Vec<f64> = rows.row(0).to_vec();
        let mut components = Matrix::zeros(k, d);
        for (j, &c) in active.iter().enumerate() {
            mean[c] = inner.mean[j];
            for i in 0..k {
                components.set(i, c, inner.components.get(i, j));
            }
        }
        return Ok(PcaModel {
            mean,
            components,
            explained_variance: inner.explained_variance,
            mean_projection: inner.mean_projection,
        });
    }

    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(rows.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |r, c| rows.get(r, c) - mean[c]);
    let denom = (n.max(2) - 1) as f64;

    let mut comps: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    if d <= n {
        let cov = centered.transpose() * &centered;
        let (vals, vecs) = sorted_eigen(cov);
        for i in 0..k {
            let mut v: Vec<f64> = vecs.column(i).iter().copied().collect();
            if !orthonormalize(&mut v, &comps) {
                complete_basis(&mut v, &comps, d);
            }
            comps.push(v);
            variances.push((vals[i] / denom).max(0.0));
        }
    } else {
        let gram = &centered * centered.transpose();
        let (vals, vecs) = sorted_eigen(gram);
        let top = vals.first().copied().unwrap_or(0.0).max(0.0);
        for i in 0..k {
            let lambda = vals[i];
            let mut v = vec![0.0; d];
            let mut ok = false;
            if lambda > 1e-10 * top && lambda > 0.0 {
                let u = vecs.column(i);
                for r in 0..n {
                    let ur = u[r];
                    if ur != 0.0 {
                        for (c, vc) in v.iter_mut().enumerate() {
                            *vc += centered[(r, c)] * ur;
                        }
                    }
                }
                ok = orthonormalize(&mut v, &comps);
            }
            if ok {
                variances.push(lambda / denom);
            } else {
                complete_basis(&mut v, &comps, d);
                variances.push(0.0);
            }
            comps.push(v);
        }
    }
    for c in comps.iter_mut() {
        normalize_sign(c);
    }

    let mean_projection = comps
        .iter()
        .map(|c| c.iter().zip(&mean).map(|(a, b)| a * b).sum())
        .collect();
    let components = Matrix::new(k, d, comps.concat())?;
    Ok(PcaModel {
        mean,
        components,
        explained_variance: variances,
        mean_projection,
    })
}

/// Fills `v` with a unit vector orthogonal to `basis`, taken from the
/// first canonical axis that is not already spanned.
fn complete_basis(v: &mut [f64], basis: &[Vec<f64>], d: usize) {
    for axis in 0..d {
        v.iter_mut().for_each(|a| *a = 0.0);
        v[axis] = 1.0;
        if orthonormalize(v, basis) {
            return;
        }
    }
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    pub fn dims(&self) -> usize {
        self.components.cols()
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_components())
            .map(|i| {
                self.components
                    .row(i)
                    .iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(c, (v, m))| c * (v - m))
                    .sum()
            })
            .collect()
    }

    /// Projection of a 0/1 vector given by the positions of its ones.
    pub fn transform_binary(&self, ones: &[u32]) -> Vec<f64> {
        (0..self.n_components())
            .map(|i| {
                let row = self.components.row(i);
                ones.iter().map(|&j| row[j as usize]).sum::<f64>() - self.mean_projection[i]
            })
            .collect()
    }

    /// Projection of a sparse vector given as `(position, value)` pairs.
    pub fn transform_sparse(&self, entries: &[(usize, f64)]) -> Vec<f64> {
        (0..self.n_components())
            .map(|i| {
                let row = self.components.row(i);
                entries.iter().map(|&(j, v)| row[j] * v).sum::<f64>() - self.mean_projection[i]
            })
            .collect()
    }

    pub fn inverse_transform(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (i, zi) in z.iter().enumerate() {
            for (xv, c) in x.iter_mut().zip(self.components.row(i)) {
                *xv += zi * c;
            }
        }
        x
    }
}
