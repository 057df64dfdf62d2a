//! Independent reference implementations for the ML core. Each check
//! returns a one-line summary on success and a description of the first
//! disagreement otherwise.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use typofill::mlcore::logistic::loss_and_gradient;
use typofill::mlcore::tree::{grow_tree, Criterion, SortedColumns, TreeParams};
use typofill::mlcore::{f1_score, fit_pca, Matrix};

fn gini_mass(n0: f64, n1: f64) -> f64 {
    let n = n0 + n1;
    if n == 0.0 {
        return 0.0;
    }
    n * (1.0 - (n0 / n).powi(2) - (n1 / n).powi(2))
}

/// Best root split by exhaustive search: `(dim, threshold, decrease)`,
/// ties to the lowest dim and then the lowest threshold.
pub fn brute_force_split(rows: &[Vec<f64>], y: &[u8]) -> Option<(usize, f64, f64)> {
    let n1 = y.iter().filter(|&&v| v == 1).count() as f64;
    let n0 = y.len() as f64 - n1;
    if y.len() < 2 || n0 == 0.0 || n1 == 0.0 {
        return None;
    }
    let parent = gini_mass(n0, n1);
    let d = rows.first().map_or(0, Vec::len);
    let mut best: Option<(usize, f64, f64)> = None;
    for dim in 0..d {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[dim]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let (mut l0, mut l1) = (0.0, 0.0);
            for (r, &label) in rows.iter().zip(y) {
                if r[dim] <= thr {
                    if label == 1 {
                        l1 += 1.0
                    } else {
                        l0 += 1.0
                    }
                }
            }
            let dec = parent - gini_mass(l0, l1) - gini_mass(n0 - l0, n1 - l1);
            if best.map_or(true, |b| dec > b.2 + 1e-9) {
                best = Some((dim, thr, dec));
            }
        }
    }
    best
}

fn tree_root_split(rows: &[Vec<f64>], y: &[u8]) -> Option<(usize, f64)> {
    let x = Matrix::from_rows(rows).unwrap();
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let params = TreeParams {
        criterion: Criterion::Gini,
        max_depth: Some(1),
        min_samples_split: 2,
        max_features: None,
    };
    let sorted = SortedColumns::new(&x);
    grow_tree(&x, &yf, &vec![1.0; rows.len()], &sorted, &params, None)
        .tree
        .root_split()
}

fn check_split(rows: &[Vec<f64>], y: &[u8]) -> Result<(), String> {
    let want = brute_force_split(rows, y);
    let got = tree_root_split(rows, y);
    match (want, got) {
        (None, None) => Ok(()),
        (Some((d, t, _)), Some((gd, gt))) if d == gd && t == gt => Ok(()),
        _ => Err(format!("rows {rows:?} labels {y:?}: oracle {want:?}, tree {got:?}")),
    }
}

/// Every dataset up to a size bound, plus random ones up to 4 dims × 16 rows.
pub fn gini_split_suite() -> Result<String, String> {
    let mut checked = 0usize;
    for (d, max_n) in [(1usize, 8usize), (2, 5), (3, 4), (4, 3)] {
        let cell = 1usize << (d + 1);
        for n in 1..=max_n {
            let total = cell.pow(n as u32);
            for code in 0..total {
                let mut c = code;
                let mut rows = Vec::with_capacity(n);
                let mut y = Vec::with_capacity(n);
                for _ in 0..n {
                    let v = c % cell;
                    c /= cell;
                    y.push((v & 1) as u8);
                    rows.push((0..d).map(|j| ((v >> (j + 1)) & 1) as f64).collect());
                }
                check_split(&rows, &y)?;
                checked += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20_000 {
        let d = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=16);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| f64::from(rng.gen_range(0..2u8))).collect())
            .collect();
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        check_split(&rows, &y)?;
        checked += 1;
    }
    Ok(format!("{checked} datasets agree with the exhaustive split search"))
}

/// Analytic gradient against central differences at random points.
pub fn logistic_gradient_suite() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for point in 0..20 {
        let n = rng.gen_range(5..40);
        let d = rng.gen_range(1..8);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let b = rng.gen_range(-1.0..1.0);
        let l2 = rng.gen_range(0.0..1.0);
        let (_, gw, gb) = loss_and_gradient(&x, &y, &w, b, l2);
        let h = 1e-5;
        let mut num = Vec::with_capacity(d + 1);
        for j in 0..d {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            num.push((loss_and_gradient(&x, &y, &wp, b, l2).0 - loss_and_gradient(&x, &y, &wm, b, l2).0) / (2.0 * h));
        }
        num.push((loss_and_gradient(&x, &y, &w, b + h, l2).0 - loss_and_gradient(&x, &y, &w, b - h, l2).0) / (2.0 * h));
        let analytic: Vec<f64> = gw.iter().copied().chain([gb]).collect();
        let diff = analytic.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = analytic
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(num.iter().map(|a| a * a).sum::<f64>().sqrt())
            .max(1e-8);
        let rel = diff / scale;
        if rel >= 1e-4 {
            return Err(format!("point {point}: relative gradient error {rel:.3e}"));
        }
        worst = worst.max(rel);
    }
    Ok(format!("20 points, worst relative error {worst:.2e}"))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix; eigenpairs in
/// descending order, eigenvectors as columns of the returned rows.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = order.iter().map(|&i| (0..n).map(|r| v[r][i]).collect()).collect();
    (vals, vecs)
}

fn covariance(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n as f64).collect();
    let cov = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect();
    (mean, cov)
}

fn pca_against_oracle(rows: &[Vec<f64>], k: usize, label: &str) -> Result<(), String> {
    let model = fit_pca(&Matrix::from_rows(rows).unwrap(), k).map_err(|e| e.to_string())?;
    let (_, cov) = covariance(rows);
    let (vals, vecs) = jacobi_eigen(cov);
    for i in 0..k {
        let got = model.components.row(i);
        let want = &vecs[i];
        let dot: f64 = got.iter().zip(want).map(|(a, b)| a * b).sum();
        let sign = if dot < 0.0 { -1.0 } else { 1.0 };
        let err = got.iter().zip(want).map(|(a, b)| (a - sign * b).abs()).fold(0.0, f64::max);
        if err > 1e-6 {
            return Err(format!("{label}: component {i} differs by {err:.2e}"));
        }
        let verr = (model.explained_variance[i] - vals[i]).abs();
        if verr > 1e-6 * vals[0].max(1.0) {
            return Err(format!("{label}: variance {i} differs by {verr:.2e}"));
        }
    }
    Ok(())
}

fn full_rank_checks(rows: &[Vec<f64>], label: &str) -> Result<(), String> {
    let x = Matrix::from_rows(rows).unwrap();
    let k = x.rows().min(x.cols());
    let model = fit_pca(&x, k).map_err(|e| e.to_string())?;
    for r in rows {
        let back = model.inverse_transform(&model.transform(r));
        let err = back.iter().zip(r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if err > 1e-8 {
            return Err(format!("{label}: reconstruction error {err:.2e}"));
        }
    }
    let (_, cov) = covariance(rows);
    let total: f64 = (0..cov.len()).map(|i| cov[i][i]).sum();
    let explained: f64 = model.explained_variance.iter().sum();
    if (total - explained).abs() > 1e-8 {
        return Err(format!("{label}: explained {explained} vs total variance {total}"));
    }
    Ok(())
}

/// Covariance and Gram routes against a Jacobi oracle, including inputs
/// with constant columns, plus full-rank reconstruction.
pub fn pca_suite() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cases = 0;
    for trial in 0..5 {
        let tall: Vec<Vec<f64>> = (0..30).map(|_| (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        pca_against_oracle(&tall, 3, &format!("tall {trial}"))?;
        full_rank_checks(&tall, &format!("tall {trial}"))?;
        let wide: Vec<Vec<f64>> = (0..5).map(|_| (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        pca_against_oracle(&wide, 2, &format!("wide {trial}"))?;
        full_rank_checks(&wide, &format!("wide {trial}"))?;
        // Sparse 0/1 rows where most columns never vary.
        let sparse: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..40).map(|c| if c < 10 { f64::from(rng.gen_range(0..2u8)) } else { f64::from(u8::from(c == 20)) }).collect())
            .collect();
        pca_against_oracle(&sparse, 2, &format!("sparse {trial}"))?;
        full_rank_checks(&sparse, &format!("sparse {trial}"))?;
        cases += 3;
    }
    Ok(format!("{cases} inputs match the Jacobi oracle and reconstruct at full rank"))
}

/// Hand-computed confusion tables.
pub fn f1_suite() -> Result<String, String> {
    let cases: [(&[u8], &[u8], f64); 6] = [
        (&[1, 0, 1], &[1, 0, 1], 100.0),
        (&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0], 200.0 / 3.0),
        (&[1, 0, 0], &[0, 0, 0], 0.0),
        (&[0, 0], &[0, 0], 100.0),
        (&[0, 0, 0], &[1, 1, 0], 0.0),
        (&[1, 1, 1, 1], &[1, 0, 0, 0], 40.0),
    ];
    for (pred, labels, want) in cases {
        let got = f1_score(pred, labels).map_err(|e| e.to_string())?;
        if (got - want).abs() > 1e-12 {
            return Err(format!("pred {pred:?} labels {labels:?}: {got} != {want}"));
        }
    }
    Ok(format!("{} confusion tables exact", cases.len()))
}
