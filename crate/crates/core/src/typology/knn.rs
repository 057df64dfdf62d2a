//! Typology-only nearest-neighbour baseline.
//!
//! The distance between two languages is `1 - matches / co_observed` over
//! every feature except the one being predicted. Languages with no
//! co-observed feature are never neighbours.

use serde::{Deserialize, Serialize};

use crate::corpus::TypologyMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnBaselineConfig {
    pub k: usize,
}

impl Default for KnnBaselineConfig {
    fn default() -> Self {
        KnnBaselineConfig { k: 5 }
    }
}

/// Observed and value bits per language, 64 features per word.
pub struct CellBits {
    words: usize,
    observed: Vec<u64>,
    ones: Vec<u64>,
}

impl CellBits {
    pub fn new(matrix: &TypologyMatrix) -> Self {
        let words = matrix.n_feats().div_ceil(64).max(1);
        let mut observed = vec![0u64; words * matrix.n_langs()];
        let mut ones = vec![0u64; words * matrix.n_langs()];
        for l in 0..matrix.n_langs() {
            for (f, cell) in matrix.row(l).iter().enumerate() {
                if let Some(v) = cell {
                    observed[l * words + f / 64] |= 1 << (f % 64);
                    if *v {
                        ones[l * words + f / 64] |= 1 << (f % 64);
                    }
                }
            }
        }
        CellBits { words, observed, ones }
    }

    /// `(matches, co_observed)` between languages `a` and `b`, ignoring
    /// feature `skip`.
    pub fn overlap(&self, a: usize, b: usize, skip: usize) -> (u32, u32) {
        let (mut m, mut c) = (0, 0);
        for w in 0..self.words {
            let mut both = self.observed[a * self.words + w] & self.observed[b * self.words + w];
            if w == skip / 64 {
                both &= !(1u64 << (skip % 64));
            }
            let same = !(self.ones[a * self.words + w] ^ self.ones[b * self.words + w]);
            c += both.count_ones();
            m += (both & same).count_ones();
        }
        (m, c)
    }
}

/// Majority label of `feat` over `pool`; ties go to 1.
fn majority(matrix: &TypologyMatrix, feat: usize, pool: &[usize]) -> Result<u8> {
    let (mut pos, mut n) = (0usize, 0usize);
    for &l in pool {
        if let Some(v) = matrix.get(l, feat) {
            n += 1;
            pos += usize::from(v);
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData(format!(
            "feature `{}` has no present cells to learn from",
            matrix.features()[feat].feat_id
        )));
    }
    Ok(u8::from(2 * pos >= n))
}

/// Predicts `feat` for each language in `targets` from the languages in
/// `pool` that have it present (a target never neighbours itself).
///
/// Every candidate tied with the k-th nearest joins the vote, so the result
/// never depends on language names. Tied votes go to 1; a target with no
/// comparable neighbour gets the pool's majority label.
pub fn knn_baseline(
    matrix: &TypologyMatrix,
    bits: &CellBits,
    feat: usize,
    targets: &[usize],
    pool: &[usize],
    config: KnnBaselineConfig,
) -> Result<Vec<u8>> {
    if config.k == 0 {
        return Err(Error::InvalidArgument("knn baseline needs k >= 1".into()));
    }
    let pool: Vec<usize> = pool.iter().copied().filter(|&l| matrix.get(l, feat).is_some()).collect();
    let fallback = majority(matrix, feat, &pool)?;
    Ok(targets
        .iter()
        .map(|&t| {
            let mut cands: Vec<(f64, usize)> = pool
                .iter()
                .filter(|&&l| l != t)
                .filter_map(|&l| {
                    let (m, c) = bits.overlap(t, l, feat);
                    (c > 0).then(|| (1.0 - f64::from(m) / f64::from(c), l))
                })
                .collect();
            if cands.is_empty() {
                return fallback;
            }
            cands.sort_by(|a, b| a.0.total_cmp(&b.0));
            let cut = cands[config.k.min(cands.len()) - 1].0;
            let (mut pos, mut neg) = (0usize, 0usize);
            for &(_, l) in cands.iter().take_while(|c| c.0 <= cut) {
                if matrix.get(l, feat) == Some(true) {
                    pos += 1;
                } else {
                    neg += 1;
                }
            }
            match pos.cmp(&neg) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => 1,
            }
        })
        .collect())
}
