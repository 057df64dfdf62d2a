//! Estimating POS-tagger quality for languages without gold annotation.
//!
//! Per language we combine tag frequencies from its tagged corpus, tagger
//! statistics supplied in `pos_stats.tsv`, and Swadesh-list agreement with
//! English, then regress gold recall on them with a 200-tree forest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_file, LangCode, Loaded, PosCorpus, SwadeshList, Upos};
use crate::error::{Error, Result};
use crate::mlcore::forest::{Forest, ForestParams};
use crate::mlcore::tree::Criterion;
use crate::mlcore::{k_fold_split, mean_absolute_error, Matrix};
use crate::seed::{self, stream};

pub const POS_STATS_HEADER: [&str; 5] = ["iso639_3", "avg_confidence", "pct_unk", "avg_len_subwords", "avg_len_chars"];
pub const GOLD_HEADER: [&str; 2] = ["iso639_3", "recall"];
pub const ENGLISH: &str = "eng";
pub const N_TREES: usize = 200;
pub const MIN_LABELS: usize = 10;
pub const DEFAULT_THRESHOLD: f64 = 80.0;

/// Tagger-side statistics for one language.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosStats {
    pub avg_confidence: f64,
    pub pct_unk: f64,
    pub avg_len_subwords: f64,
    pub avg_len_chars: f64,
}

fn header_matches(line: &str, header: &[&str]) -> bool {
    line.split('\t').map(str::trim).eq(header.iter().copied())
}

fn parse_field(source: &str, line: usize, column: &str, text: &str) -> Result<f64> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(source, line, column, format!("`{text}` is not a number")))
}

pub fn load_pos_stats(path: impl AsRef<Path>) -> Result<BTreeMap<LangCode, PosStats>> {
    let path = path.as_ref();
    parse_pos_stats(&read_file(path)?, &path.display().to_string())
}

/// Tab-separated, with the [`POS_STATS_HEADER`] header line.
pub fn parse_pos_stats(text: &str, source: &str) -> Result<BTreeMap<LangCode, PosStats>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if header_matches(h, &POS_STATS_HEADER) => {}
        _ => {
            return Err(Error::parse(
                source,
                1,
                "*",
                format!("expected header `{}`", POS_STATS_HEADER.join("\\t")),
            ))
        }
    }
    let mut out = BTreeMap::new();
    for (i, raw) in lines {
        let lineno = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if f.len() != 5 {
            return Err(Error::parse(source, lineno, "*", format!("expected 5 fields, found {}", f.len())));
        }
        let code = LangCode::new(f[0]).map_err(|e| Error::parse(source, lineno, "iso639_3", e.to_string()))?;
        let mut vals = [0.0; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = parse_field(source, lineno, POS_STATS_HEADER[k + 1], f[k + 1])?;
        }
        let [avg_confidence, pct_unk, avg_len_subwords, avg_len_chars] = vals;
        let range_err = |col: &str, msg: &str| Err(Error::parse(source, lineno, col, msg.to_string()));
        if !(0.0..=1.0).contains(&avg_confidence) {
            return range_err("avg_confidence", "must lie in [0, 1]");
        }
        if !(0.0..=100.0).contains(&pct_unk) {
            return range_err("pct_unk", "must lie in [0, 100]");
        }
        if avg_len_subwords <= 0.0 {
            return range_err("avg_len_subwords", "must be positive");
        }
        if avg_len_chars <= 0.0 {
            return range_err("avg_len_chars", "must be positive");
        }
        let stats = PosStats {
            avg_confidence,
            pct_unk,
            avg_len_subwords,
            avg_len_chars,
        };
        if out.insert(code, stats).is_some() {
            return Err(Error::parse(source, lineno, "iso639_3", format!("duplicate language `{code}`")));
        }
    }
    Ok(out)
}

pub fn write_pos_stats(stats: &BTreeMap<LangCode, PosStats>) -> String {
    let mut out = POS_STATS_HEADER.join("\t");
    out.push('\n');
    for (c, s) in stats {
        let _ = writeln!(
            out,
            "{c}\t{}\t{}\t{}\t{}",
            s.avg_confidence, s.pct_unk, s.avg_len_subwords, s.avg_len_chars
        );
    }
    out
}

pub fn load_gold_recall(path: impl AsRef<Path>) -> Result<BTreeMap<LangCode, f64>> {
    let path = path.as_ref();
    parse_gold_recall(&read_file(path)?, &path.display().to_string())
}

/// `iso639_3<TAB>recall` with recall in `[0, 100]`; header optional.
pub fn parse_gold_recall(text: &str, source: &str) -> Result<BTreeMap<LangCode, f64>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        if raw.trim().is_empty() || (i == 0 && header_matches(raw, &GOLD_HEADER)) {
            continue;
        }
        let f: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if f.len() != 2 {
            return Err(Error::parse(source, lineno, "*", format!("expected 2 fields, found {}", f.len())));
        }
        let code = LangCode::new(f[0]).map_err(|e| Error::parse(source, lineno, "iso639_3", e.to_string()))?;
        let r = parse_field(source, lineno, "recall", f[1])?;
        if !(0.0..=100.0).contains(&r) {
            return Err(Error::parse(source, lineno, "recall", "must lie in [0, 100]"));
        }
        if out.insert(code, r).is_some() {
            return Err(Error::parse(source, lineno, "iso639_3", format!("duplicate language `{code}`")));
        }
    }
    Ok(out)
}

pub fn write_gold_recall(gold: &BTreeMap<LangCode, f64>) -> String {
    let mut out = GOLD_HEADER.join("\t");
    out.push('\n');
    for (c, r) in gold {
        let _ = writeln!(out, "{c}\t{r}");
    }
    out
}

/// Regressor inputs for one language.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosQualityFeatures {
    pub code: LangCode,
    /// Relative frequency of each tag, in [`Upos::ALL`] order.
    pub tag_freqs: [f64; Upos::COUNT],
    pub avg_confidence: f64,
    pub pct_unk_subwords: f64,
    pub avg_word_len_subwords: f64,
    pub avg_word_len_chars: f64,
    pub swadesh_agreement_pct: f64,
}

impl PosQualityFeatures {
    pub const WIDTH: usize = Upos::COUNT + 5;

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.tag_freqs.to_vec();
        v.extend([
            self.avg_confidence,
            self.pct_unk_subwords,
            self.avg_word_len_subwords,
            self.avg_word_len_chars,
            self.swadesh_agreement_pct,
        ]);
        v
    }
}

/// Tag frequencies over every token of the corpus; `None` if it has none.
pub fn tag_frequencies(sentences: &[Vec<Upos>]) -> Option<[f64; Upos::COUNT]> {
    let mut counts = [0u64; Upos::COUNT];
    for t in sentences.iter().flatten() {
        counts[t.index()] += 1;
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return None;
    }
    Some(counts.map(|c| c as f64 / total as f64))
}

/// Percentage of `code`'s entries whose tag equals the English entry's tag
/// for the same concept. `None` when no entry aligns.
pub fn swadesh_agreement(list: &SwadeshList, code: &LangCode, english: &LangCode) -> Option<f64> {
    let reference: BTreeMap<&str, Upos> = list
        .entries
        .iter()
        .filter(|e| e.code == *english)
        .map(|e| (e.concept_id.as_str(), e.english_upos))
        .collect();
    let (mut agree, mut total) = (0usize, 0usize);
    for e in list.entries.iter().filter(|e| e.code == *code) {
        if let Some(r) = reference.get(e.concept_id.as_str()) {
            total += 1;
            agree += usize::from(*r == e.english_upos);
        }
    }
    (total > 0).then(|| 100.0 * agree as f64 / total as f64)
}

/// Features for every corpus language that has tagger statistics and at
/// least one token. Languages without aligned Swadesh entries get 0
/// agreement; both cases raise warnings.
pub fn compute_quality_features(
    corpus: &PosCorpus,
    stats: &BTreeMap<LangCode, PosStats>,
    swadesh: &SwadeshList,
) -> Loaded<Vec<PosQualityFeatures>> {
    let english = LangCode::new(ENGLISH).expect("valid code");
    let results: Vec<std::result::Result<PosQualityFeatures, String>> = corpus
        .languages
        .par_iter()
        .map(|(code, sentences)| {
            let s = stats
                .get(code)
                .ok_or_else(|| format!("{code}: no entry in pos_stats, excluded"))?;
            let tag_freqs = tag_frequencies(sentences).ok_or_else(|| format!("{code}: empty corpus, excluded"))?;
            Ok(PosQualityFeatures {
                code: *code,
                tag_freqs,
                avg_confidence: s.avg_confidence,
                pct_unk_subwords: s.pct_unk,
                avg_word_len_subwords: s.avg_len_subwords,
                avg_word_len_chars: s.avg_len_chars,
                swadesh_agreement_pct: swadesh_agreement(swadesh, code, &english).unwrap_or(f64::NAN),
            })
        })
        .collect();
    let mut value = Vec::new();
    let mut warnings = Vec::new();
    for r in results {
        match r {
            Ok(mut f) => {
                if f.swadesh_agreement_pct.is_nan() {
                    warnings.push(format!("{}: no Swadesh entries aligned with English, agreement set to 0", f.code));
                    f.swadesh_agreement_pct = 0.0;
                }
                value.push(f);
            }
            Err(w) => warnings.push(w),
        }
    }
    Loaded { value, warnings }
}

/// Regression forest from quality features to tagger recall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityRegressor {
    pub forest: Forest,
    pub n_train: usize,
    /// Mean absolute error over pooled held-out folds.
    pub cv_mae: f64,
    pub folds: usize,
}

/// Unbounded trees on every row, a third of the inputs per split: training
/// points are reproduced exactly and the trees differ by their split
/// candidates alone.
fn forest_params() -> ForestParams {
    ForestParams {
        n_estimators: N_TREES,
        max_depth: None,
        min_samples_split: 2,
        max_features: Some(PosQualityFeatures::WIDTH / 3),
        bootstrap: false,
        criterion: Criterion::Variance,
    }
}

/// Fits on the languages present in both `features` and `gold`, in code
/// order. Held-out MAE comes from `min(5, n)`-fold cross-validation.
pub fn fit_quality_regressor(
    features: &[PosQualityFeatures],
    gold: &BTreeMap<LangCode, f64>,
    seed: u64,
) -> Result<QualityRegressor> {
    let mut rows: Vec<(&PosQualityFeatures, f64)> = features
        .iter()
        .filter_map(|f| gold.get(&f.code).map(|&g| (f, g)))
        .collect();
    rows.sort_by_key(|(f, _)| f.code);
    if rows.len() < MIN_LABELS {
        return Err(Error::InsufficientData(format!(
            "{} labelled languages, need at least {MIN_LABELS}",
            rows.len()
        )));
    }
    let x = Matrix::from_rows(&rows.iter().map(|(f, _)| f.to_vec()).collect::<Vec<_>>())?;
    let y: Vec<f64> = rows.iter().map(|(_, g)| *g).collect();
    let params = forest_params();

    let n_folds = 5.min(rows.len());
    let folds = k_fold_split(rows.len(), n_folds, seed::child(seed, stream::FOLDS, 0))?;
    let mut pred = vec![0.0; rows.len()];
    for (i, fold) in folds.iter().enumerate() {
        let yt: Vec<f64> = fold.train.iter().map(|&r| y[r]).collect();
        let f = Forest::fit(&x.select_rows(&fold.train), &yt, &params, seed::child(seed, stream::MODEL, i as u64 + 1));
        for &r in &fold.test {
            pred[r] = f.predict(x.row(r));
        }
    }
    let cv_mae = mean_absolute_error(&pred, &y);
    let forest = Forest::fit(&x, &y, &params, seed::child(seed, stream::MODEL, 0));
    Ok(QualityRegressor {
        forest,
        n_train: rows.len(),
        cv_mae,
        folds: n_folds,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityEstimate {
    pub code: LangCode,
    pub estimated_recall: f64,
}

impl QualityRegressor {
    pub fn predict(&self, f: &PosQualityFeatures) -> f64 {
        self.forest.predict(&f.to_vec()).clamp(0.0, 100.0)
    }

    pub fn estimate_all(&self, features: &[PosQualityFeatures]) -> Vec<QualityEstimate> {
        features
            .iter()
            .map(|f| QualityEstimate {
                code: f.code,
                estimated_recall: self.predict(f),
            })
            .collect()
    }
}

/// Languages whose estimate is strictly above `threshold`.
pub fn filter_languages(estimates: &[QualityEstimate], threshold: f64) -> BTreeSet<LangCode> {
    estimates
        .iter()
        .filter(|e| e.estimated_recall > threshold)
        .map(|e| e.code)
        .collect()
}

/// `iso639_3,estimated_recall,kept`, in code order.
pub fn quality_csv(estimates: &[QualityEstimate], threshold: f64) -> String {
    let mut sorted = estimates.to_vec();
    sorted.sort_by_key(|e| e.code);
    let mut out = String::from("iso639_3,estimated_recall,kept\n");
    for e in sorted {
        let _ = writeln!(
            out,
            "{},{:.4},{}",
            e.code,
            e.estimated_recall,
            u8::from(e.estimated_recall > threshold)
        );
    }
    out
}

/// Reads back the `kept` column of a `quality.csv`.
pub fn parse_quality_kept(text: &str, source: &str) -> Result<BTreeSet<LangCode>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "iso639_3,estimated_recall,kept" => {}
        _ => return Err(Error::parse(source, 1, "*", "expected header iso639_3,estimated_recall,kept")),
    }
    let mut out = BTreeSet::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(Error::parse(source, i + 1, "*", format!("expected 3 fields, found {}", f.len())));
        }
        if f[2] == "1" {
            out.insert(LangCode::new(f[0]).map_err(|e| Error::parse(source, i + 1, "iso639_3", e.to_string()))?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
