use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Euclidean,
    Manhattan,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

/// Lazy k-nearest-neighbour vote over stored training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub metric: Metric,
    x: Matrix,
    y: Vec<u8>,
}

impl KnnModel {
    pub fn fit(x: &Matrix, y: &[u8], k: usize, metric: Metric) -> Self {
        KnnModel {
            k,
            metric,
            x: x.clone(),
            y: y.to_vec(),
        }
    }

    /// Fraction of the `k` nearest rows labelled 1. Distance ties go to the
    /// lower training index.
    pub fn predict_proba(&self, q: &[f64]) -> f64 {
        let n = self.x.rows();
        if n == 0 {
            return 0.0;
        }
        let k = self.k.min(n);
        let mut d: Vec<(f64, usize)> = (0..n).map(|i| (self.metric.distance(self.x.row(i), q), i)).collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            d.select_nth_unstable_by(k - 1, cmp);
        }
        let ones = d[..k].iter().filter(|(_, i)| self.y[*i] == 1).count();
        ones as f64 / k as f64
    }
}
