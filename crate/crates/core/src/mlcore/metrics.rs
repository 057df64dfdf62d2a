use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// F1 of the positive class as a percentage.
///
/// 0 when there are no true positives but some errors; 100 when there are
/// no positives and none were predicted.
pub fn f1_score(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p == 1, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp + fp + fneg == 0 {
        return Ok(100.0);
    }
    Ok(100.0 * (2 * tp) as f64 / (2 * tp + fp + fneg) as f64)
}

pub fn mean_absolute_error(pred: &[f64], truth: &[f64]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum::<f64>() / pred.len() as f64
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with `seed` and cuts it into `k` folds; the first
/// `n % k` folds get one extra row. Index lists are sorted.
pub fn k_fold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds {n} rows")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test = perm[start..start + size].to_vec();
        test.sort_unstable();
        let mut in_test = vec![false; n];
        for &i in &test {
            in_test[i] = true;
        }
        let train = (0..n).filter(|&i| !in_test[i]).collect();
        folds.push(Fold { train, test });
        start += size;
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&[1, 0, 1], &[1, 0, 1]).unwrap(), 100.0);
        // TP=2, FP=1, FN=1
        let f = f1_score(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0]).unwrap();
        assert!((f - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(format!("{f:.2}"), "66.67");
        assert_eq!(f1_score(&[1, 0, 0], &[0, 0, 0]).unwrap(), 0.0);
        assert_eq!(f1_score(&[0, 0], &[0, 0]).unwrap(), 100.0);
        assert!(f1_score(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn fold_sizes() {
        let sizes: Vec<usize> = k_fold_split(10, 5, 1).unwrap().iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, vec![2; 5]);
        let sizes: Vec<usize> = k_fold_split(11, 5, 1).unwrap().iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
        assert!(k_fold_split(3, 5, 1).is_err());
        assert!(k_fold_split(3, 1, 1).is_err());
    }

    #[test]
    fn folds_deterministic_and_partition() {
        let a = k_fold_split(23, 4, 99).unwrap();
        assert_eq!(a, k_fold_split(23, 4, 99).unwrap());
        let mut all: Vec<usize> = a.iter().flat_map(|f| f.test.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        for f in &a {
            assert_eq!(f.train.len() + f.test.len(), 23);
            assert!(f.test.iter().all(|t| !f.train.contains(t)));
        }
    }
}
