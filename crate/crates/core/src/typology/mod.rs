//! One classifier per target feature, the typology-only KNN baseline, both
//! evaluation setups and matrix completion.
//!
//! Features never share fitted state: each gets its own study, encoders and
//! model, seeded from the master seed and its feature id.

mod knn;
mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use knn::{knn_baseline, CellBits, KnnBaselineConfig};
pub use report::{EvalReport, FeatureEval, ImputedMatrix, Provenance, SkippedFeature};

use crate::corpus::TypologyMatrix;
use crate::error::{Error, Result};
use crate::featurize::{FeatureConfig, FeatureSources};
use crate::hpo::{self, default_space, run_study, Assignment, Sampler, SearchSpace, StudyResult, Task, Value};
use crate::mlcore::{f1_score, k_fold_split, mean, Fold, ModelKind, RowKey};
use crate::pipeline::{cross_validate, fit_pipeline, Pipeline};
use crate::presence::{MissingRanking, MissingReport};
use crate::seed::{self, hash_str, stream};

/// Where feature selection happens relative to the k-fold evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HpoMode {
    /// One study over all present cells; its best trial's fold scores are
    /// the reported F1. Optimistic.
    #[default]
    Outer,
    /// A fresh study inside every outer training fold.
    Nested,
}

impl HpoMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HpoMode::Outer => "outer",
            HpoMode::Nested => "nested",
        }
    }
}

impl std::str::FromStr for HpoMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outer" => Ok(HpoMode::Outer),
            "nested" => Ok(HpoMode::Nested),
            _ => Err(Error::InvalidArgument(format!("unknown HPO mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypologySettings {
    pub kind: ModelKind,
    pub n_trials: usize,
    pub folds: usize,
    /// Folds of the inner study in nested mode, capped by the training size.
    pub inner_folds: usize,
    pub sampler: Sampler,
    pub seed: u64,
    pub mode: HpoMode,
    pub knn: KnnBaselineConfig,
    /// Values for anything the space leaves out.
    pub base_config: FeatureConfig,
    /// Dimensions pinned to one value.
    pub fixed: Assignment,
}

impl Default for TypologySettings {
    fn default() -> Self {
        TypologySettings {
            kind: ModelKind::RandomForest,
            n_trials: 30,
            folds: 10,
            inner_folds: 3,
            sampler: Sampler::Random,
            seed: 0,
            mode: HpoMode::Outer,
            knn: KnnBaselineConfig::default(),
            base_config: FeatureConfig::all(),
            fixed: Assignment::new(),
        }
    }
}

impl TypologySettings {
    pub fn space(&self) -> Result<SearchSpace> {
        let mut space = default_space(Task::Typology, self.kind);
        for (name, v) in &self.fixed {
            space.fix(name, v.clone())?;
        }
        Ok(space)
    }

    fn feature_seed(&self, feat_id: &str) -> u64 {
        seed::child(self.seed, stream::FEATURE, hash_str(feat_id))
    }
}

/// The present cells of one feature: one row per language that has it.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetDataset {
    pub feat_id: String,
    pub feat: usize,
    pub langs: Vec<usize>,
    pub keys: Vec<RowKey>,
    pub labels: Vec<u8>,
}

impl TargetDataset {
    pub fn new(matrix: &TypologyMatrix, feat: usize) -> Self {
        Self::over(matrix, feat, matrix.present_langs(feat))
    }

    /// Rows for the given languages, which must all have the feature.
    fn over(matrix: &TypologyMatrix, feat: usize, langs: Vec<usize>) -> Self {
        let feat_id = matrix.features()[feat].feat_id.clone();
        let keys = langs
            .iter()
            .map(|&l| RowKey {
                lang: matrix.languages()[l],
                feat_id: feat_id.clone(),
            })
            .collect();
        let labels = langs
            .iter()
            .map(|&l| u8::from(matrix.get(l, feat).expect("present cell")))
            .collect();
        TargetDataset {
            feat_id,
            feat,
            langs,
            keys,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.langs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.langs.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> TargetDataset {
        TargetDataset {
            feat_id: self.feat_id.clone(),
            feat: self.feat,
            langs: idx.iter().map(|&i| self.langs[i]).collect(),
            keys: idx.iter().map(|&i| self.keys[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    fn has_both_classes(&self) -> bool {
        self.labels.contains(&0) && self.labels.contains(&1)
    }
}

fn feat_index(matrix: &TypologyMatrix, feat_id: &str) -> Result<usize> {
    matrix
        .feat_idx(feat_id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown feature `{feat_id}`")))
}

/// Why a feature cannot be trained with `folds` folds, if it cannot.
fn skip_reason(ds: &TargetDataset, folds: usize) -> Option<String> {
    if ds.len() < 2 * folds {
        Some(format!("{} present cells, need at least {}", ds.len(), 2 * folds))
    } else if !ds.has_both_classes() {
        Some("present cells hold a single class".into())
    } else {
        None
    }
}

fn run_feature_study(
    ds: &TargetDataset,
    folds: &[Fold],
    sources: FeatureSources<'_>,
    settings: &TypologySettings,
    study_seed: u64,
) -> Result<StudyResult> {
    let space = settings.space()?;
    let objective = |a: &Assignment, trial_seed: u64| {
        let cfg = hpo::feature_config(a, &settings.base_config)?;
        let hp = hpo::hyperparams(a, settings.kind)?;
        cross_validate(&ds.keys, &ds.labels, folds, &cfg, &hp, sources, trial_seed)
    };
    run_study(&space, objective, settings.n_trials, study_seed, settings.sampler)
}

/// Study + refit on `ds`; `None` if every trial failed.
fn select_and_fit(
    ds: &TargetDataset,
    n_folds: usize,
    sources: FeatureSources<'_>,
    settings: &TypologySettings,
    seed: u64,
) -> Result<(StudyResult, Pipeline)> {
    let folds = k_fold_split(ds.len(), n_folds, seed::child(seed, stream::FOLDS, 0))?;
    let study = run_feature_study(ds, &folds, sources, settings, seed::child(seed, stream::STUDY, 0))?;
    let best = study
        .best_trial()
        .ok_or_else(|| Error::InsufficientData(format!("every trial failed for `{}`", ds.feat_id)))?;
    let cfg = hpo::feature_config(&best.assignment, &settings.base_config)?;
    let hp = hpo::hyperparams(&best.assignment, settings.kind)?;
    let pipeline = fit_pipeline(&ds.keys, &ds.labels, &cfg, &hp, sources, seed::child(seed, stream::MODEL, 0))?;
    Ok((study, pipeline))
}

/// A trained per-feature classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub feat_id: String,
    pub cv_f1: f64,
    pub pipeline: Pipeline,
    pub study: StudyResult,
}

/// Runs the typology study for `feat_id` over all its present cells and
/// refits the best trial. Scarce or single-class features come back as
/// `Err(SkippedFeature)`.
pub fn train_feature_classifier(
    matrix: &TypologyMatrix,
    sources: FeatureSources<'_>,
    feat_id: &str,
    settings: &TypologySettings,
) -> Result<std::result::Result<FeatureModel, SkippedFeature>> {
    let ds = TargetDataset::new(matrix, feat_index(matrix, feat_id)?);
    if let Some(reason) = skip_reason(&ds, settings.folds) {
        return Ok(Err(SkippedFeature {
            feat_id: feat_id.to_string(),
            reason,
        }));
    }
    let (study, pipeline) = select_and_fit(&ds, settings.folds, sources, settings, settings.feature_seed(feat_id))?;
    Ok(Ok(FeatureModel {
        feat_id: feat_id.to_string(),
        cv_f1: study.best_trial().expect("fitted").score(),
        pipeline,
        study,
    }))
}

/// Trains every target feature in parallel; results in matrix order.
pub fn train_all(
    matrix: &TypologyMatrix,
    sources: FeatureSources<'_>,
    settings: &TypologySettings,
) -> Result<(Vec<FeatureModel>, Vec<SkippedFeature>)> {
    let outcomes: Vec<_> = matrix
        .target_indices()
        .into_par_iter()
        .map(|f| train_feature_classifier(matrix, sources, &matrix.features()[f].feat_id, settings))
        .collect::<Result<_>>()?;
    let mut models = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(m) => models.push(m),
            Err(s) => skipped.push(s),
        }
    }
    Ok((models, skipped))
}

fn knn_f1(
    matrix: &TypologyMatrix,
    bits: &CellBits,
    train: &TargetDataset,
    test: &TargetDataset,
    config: KnnBaselineConfig,
) -> Result<f64> {
    let pred = knn_baseline(matrix, bits, train.feat, &test.langs, &train.langs, config)?;
    f1_score(&pred, &test.labels)
}

fn ours_f1(p: &Pipeline, test: &TargetDataset, sources: FeatureSources<'_>) -> Result<f64> {
    f1_score(&p.predict(&test.keys, sources)?, &test.labels)
}

fn selected_config(study: &StudyResult, settings: &TypologySettings) -> Result<FeatureConfig> {
    let best = study.best_trial().expect("study has a best trial");
    hpo::feature_config(&best.assignment, &settings.base_config)
}

fn evaluate_feature_kfold(
    matrix: &TypologyMatrix,
    bits: &CellBits,
    sources: FeatureSources<'_>,
    feat: usize,
    settings: &TypologySettings,
) -> Result<std::result::Result<FeatureEval, SkippedFeature>> {
    let ds = TargetDataset::new(matrix, feat);
    if let Some(reason) = skip_reason(&ds, settings.folds) {
        return Ok(Err(SkippedFeature {
            feat_id: ds.feat_id,
            reason,
        }));
    }
    let fseed = settings.feature_seed(&ds.feat_id);
    let folds = k_fold_split(ds.len(), settings.folds, seed::child(fseed, stream::FOLDS, 0))?;

    let mut knn_scores = Vec::with_capacity(folds.len());
    for fold in &folds {
        knn_scores.push(knn_f1(matrix, bits, &ds.subset(&fold.train), &ds.subset(&fold.test), settings.knn)?);
    }

    let (ours, config) = match settings.mode {
        HpoMode::Outer => {
            let study = run_feature_study(&ds, &folds, sources, settings, seed::child(fseed, stream::STUDY, 0))?;
            let best = study
                .best_trial()
                .ok_or_else(|| Error::InsufficientData(format!("every trial failed for `{}`", ds.feat_id)))?;
            (best.score(), selected_config(&study, settings)?)
        }
        HpoMode::Nested => {
            let per_fold: Vec<(f64, FeatureConfig)> = folds
                .par_iter()
                .enumerate()
                .map(|(i, fold)| {
                    let train = ds.subset(&fold.train);
                    let inner = settings.inner_folds.min(train.len() / 2).max(2);
                    let (study, p) =
                        select_and_fit(&train, inner, sources, settings, seed::child(fseed, stream::OUTER_FOLD, i as u64))?;
                    Ok((ours_f1(&p, &ds.subset(&fold.test), sources)?, selected_config(&study, settings)?))
                })
                .collect::<Result<_>>()?;
            let scores: Vec<f64> = per_fold.iter().map(|(s, _)| *s).collect();
            (mean(&scores), per_fold[0].1.clone())
        }
    };
    let n = ds.len();
    Ok(Ok(FeatureEval {
        feat_id: ds.feat_id,
        missing_ratio: None,
        knn_f1: mean(&knn_scores),
        ours_f1: ours,
        config,
        n_train: n,
        n_test: n,
    }))
}

/// k-fold evaluation of the baseline and our method for every target
/// feature, in matrix order.
pub fn evaluate_kfold(
    matrix: &TypologyMatrix,
    sources: FeatureSources<'_>,
    settings: &TypologySettings,
) -> Result<EvalReport> {
    let bits = CellBits::new(matrix);
    let outcomes: Vec<_> = matrix
        .target_indices()
        .into_par_iter()
        .map(|f| evaluate_feature_kfold(matrix, &bits, sources, f, settings))
        .collect::<Result<_>>()?;
    Ok(EvalReport::assemble(format!("kfold-{}", settings.mode.as_str()), outcomes))
}

/// Evaluates features whose missing ratio exceeds `ratio_threshold`,
/// testing on their flagged present cells and training on the rest.
pub fn evaluate_likely_missing(
    matrix: &TypologyMatrix,
    sources: FeatureSources<'_>,
    ranking: &MissingRanking,
    report: &MissingReport,
    ratio_threshold: f64,
    settings: &TypologySettings,
) -> Result<EvalReport> {
    let mut flagged: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for c in ranking.cells.iter().filter(|c| c.flagged) {
        let l = matrix
            .lang_idx(&c.lang)
            .ok_or_else(|| Error::Contract(format!("ranked language `{}` not in the matrix", c.lang)))?;
        flagged.entry(c.feat_id.as_str()).or_default().push(l);
    }
    let selected: Vec<(usize, f64)> = report
        .features
        .iter()
        .filter_map(|r| r.ratio.filter(|&x| x > ratio_threshold).map(|x| (r.feat_id.as_str(), x)))
        .map(|(id, x)| Ok((feat_index(matrix, id)?, x)))
        .collect::<Result<_>>()?;

    let bits = CellBits::new(matrix);
    let outcomes: Vec<_> = selected
        .into_par_iter()
        .map(|(feat, ratio)| {
            let all = TargetDataset::new(matrix, feat);
            let test_langs = flagged.get(all.feat_id.as_str()).cloned().unwrap_or_default();
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
                (0..all.len()).partition(|&i| test_langs.contains(&all.langs[i]));
            let (train, test) = (all.subset(&train_idx), all.subset(&test_idx));
            let n_folds = settings.folds.min(train.len() / 2);
            if n_folds < 2 || test.is_empty() {
                return Ok(Err(SkippedFeature {
                    feat_id: all.feat_id,
                    reason: format!("{} training and {} test cells", train.len(), test.len()),
                }));
            }
            let knn = knn_f1(matrix, &bits, &train, &test, settings.knn)?;
            let fseed = settings.feature_seed(&all.feat_id);
            let (study, p) = select_and_fit(&train, n_folds, sources, settings, fseed)?;
            Ok(Ok(FeatureEval {
                feat_id: all.feat_id.clone(),
                missing_ratio: Some(ratio),
                knn_f1: knn,
                ours_f1: ours_f1(&p, &test, sources)?,
                config: selected_config(&study, settings)?,
                n_train: train.len(),
                n_test: test.len(),
            }))
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport::assemble("likely-missing".into(), outcomes))
}

/// Fills every missing target cell: with the feature's model when one is
/// given, otherwise with the KNN baseline over all present languages.
/// Observed cells and non-target features pass through unchanged.
pub fn impute_all(
    matrix: &TypologyMatrix,
    sources: FeatureSources<'_>,
    models: &BTreeMap<String, Pipeline>,
    knn: KnnBaselineConfig,
) -> Result<ImputedMatrix> {
    let bits = CellBits::new(matrix);
    let n_langs = matrix.n_langs();
    let columns: Vec<(usize, Vec<(usize, Option<bool>, Provenance)>)> = matrix
        .target_indices()
        .into_par_iter()
        .map(|f| {
            let missing: Vec<usize> = (0..n_langs).filter(|&l| matrix.get(l, f).is_none()).collect();
            if missing.is_empty() {
                return Ok((f, Vec::new()));
            }
            let feat_id = &matrix.features()[f].feat_id;
            let filled = match models.get(feat_id) {
                Some(p) => {
                    let keys: Vec<RowKey> = missing
                        .iter()
                        .map(|&l| RowKey {
                            lang: matrix.languages()[l],
                            feat_id: feat_id.clone(),
                        })
                        .collect();
                    let probs = p.predict_proba(&keys, sources)?;
                    missing
                        .iter()
                        .zip(probs)
                        .map(|(&l, pr)| (l, Some(pr >= 0.5), Provenance::Model(pr)))
                        .collect()
                }
                None => {
                    let present = matrix.present_langs(f);
                    if present.is_empty() {
                        missing.iter().map(|&l| (l, None, Provenance::Missing)).collect()
                    } else {
                        let pred = knn_baseline(matrix, &bits, f, &missing, &present, knn)?;
                        missing
                            .iter()
                            .zip(pred)
                            .map(|(&l, v)| (l, Some(v == 1), Provenance::Knn))
                            .collect()
                    }
                }
            };
            Ok((f, filled))
        })
        .collect::<Result<_>>()?;

    let mut completed = matrix.clone();
    let mut provenance: Vec<Provenance> = (0..n_langs)
        .flat_map(|l| {
            matrix
                .row(l)
                .iter()
                .map(|c| if c.is_some() { Provenance::Observed } else { Provenance::Missing })
                .collect::<Vec<_>>()
        })
        .collect();
    let n_feats = matrix.n_feats();
    for (f, cells) in columns {
        for (l, v, prov) in cells {
            completed.set(l, f, v);
            provenance[l * n_feats + f] = prov;
        }
    }
    Ok(ImputedMatrix {
        matrix: completed,
        provenance,
    })
}

/// Pins a feature-group boolean in the typology space.
pub fn pin_group(settings: &mut TypologySettings, group: crate::featurize::Group, on: bool) {
    settings.fixed.insert(hpo::group_dim_name(group), Value::Bool(on));
}
