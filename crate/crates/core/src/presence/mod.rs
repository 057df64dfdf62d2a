//! Presence classification: is a (language, feature) cell recorded at all?
//!
//! A classifier is trained on present-vs-missing over every cell of the
//! covered features, then applied to the present cells only. The present
//! cells it finds most missing-like are flagged, globally, as likely
//! missing; per-feature missing ratios follow from the flagged set.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::corpus::{LangCode, TypologyMatrix};
use crate::error::{Error, Result};
use crate::featurize::{FeatureConfig, FeatureSources, Group};
use crate::hpo::{self, default_space, run_study, Sampler, StudyResult, Task};
use crate::mlcore::{k_fold_split, ModelKind, RowKey};
use crate::pipeline::{cross_validate, fit_pipeline, Pipeline};
use crate::seed::{self, stream};

pub const DEFAULT_FRACTION: f64 = 0.2;
pub const HIST_BINS: usize = 20;

/// Which features the presence dataset covers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    #[default]
    Targets,
    All,
}

/// One row per (language, covered feature); label 1 = present.
#[derive(Clone, Debug, PartialEq)]
pub struct PresenceDataset {
    pub keys: Vec<RowKey>,
    pub labels: Vec<u8>,
    pub languages: Vec<LangCode>,
    pub features: Vec<String>,
}

impl PresenceDataset {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn features_per_language(&self) -> usize {
        self.features.len()
    }
}

fn covered_features(matrix: &TypologyMatrix, coverage: Coverage) -> Vec<usize> {
    match coverage {
        Coverage::Targets => matrix.target_indices(),
        Coverage::All => (0..matrix.n_feats()).collect(),
    }
}

/// Rejects configs that use text-derived groups.
pub fn check_presence_config(config: &FeatureConfig) -> Result<()> {
    match config.enabled().find(|g| g.is_textual()) {
        Some(g) => Err(Error::Contract(format!("presence features cannot use the text-derived group `{g}`"))),
        None => Ok(()),
    }
}

/// Rows for every (language, covered feature) pair, optionally over a
/// seeded sample of `size` languages (kept in matrix order).
pub fn build_presence_dataset(
    matrix: &TypologyMatrix,
    config: &FeatureConfig,
    coverage: Coverage,
    language_sample: Option<(usize, u64)>,
) -> Result<PresenceDataset> {
    check_presence_config(config)?;
    let feats = covered_features(matrix, coverage);
    if feats.is_empty() {
        return Err(Error::InsufficientData("no features to cover".into()));
    }
    let mut langs: Vec<usize> = (0..matrix.n_langs()).collect();
    if let Some((size, s)) = language_sample {
        if size > langs.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot sample {size} languages from {}",
                langs.len()
            )));
        }
        let mut rng = seed::rng(seed::child(s, stream::LANG_SAMPLE, 0));
        langs = sample(&mut rng, langs.len(), size).into_vec();
        langs.sort_unstable();
    }
    let mut keys = Vec::with_capacity(langs.len() * feats.len());
    let mut labels = Vec::with_capacity(keys.capacity());
    for &l in &langs {
        for &f in &feats {
            keys.push(RowKey {
                lang: matrix.languages()[l],
                feat_id: matrix.features()[f].feat_id.clone(),
            });
            labels.push(u8::from(matrix.get(l, f).is_some()));
        }
    }
    Ok(PresenceDataset {
        keys,
        labels,
        languages: langs.iter().map(|&l| matrix.languages()[l]).collect(),
        features: feats.iter().map(|&f| matrix.features()[f].feat_id.clone()).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresenceSettings {
    /// Candidate model kinds; each gets its own study.
    pub kinds: Vec<ModelKind>,
    pub n_trials: usize,
    pub folds: usize,
    pub sampler: Sampler,
    pub seed: u64,
    /// Values for groups and component counts the space does not search.
    pub base_config: FeatureConfig,
}

impl Default for PresenceSettings {
    fn default() -> Self {
        let mut base_config = FeatureConfig::all();
        base_config.set(Group::PosNgrams, false);
        PresenceSettings {
            kinds: vec![ModelKind::GradientBoosting],
            n_trials: 10,
            folds: 5,
            sampler: Sampler::Random,
            seed: 0,
            base_config,
        }
    }
}

/// Presence space for `kind`: the default presence space for gradient
/// boosting, otherwise the group booleans plus that kind's dimensions.
pub fn presence_space(kind: ModelKind) -> hpo::SearchSpace {
    if kind == ModelKind::GradientBoosting {
        return default_space(Task::Presence, kind);
    }
    let mut space = default_space(Task::Presence, ModelKind::GradientBoosting);
    let gb: Vec<String> = hpo::model_space(ModelKind::GradientBoosting)
        .dims
        .into_iter()
        .map(|(n, _)| n)
        .collect();
    space.dims.retain(|(n, _)| !gb.contains(n));
    space.extend(hpo::model_space(kind)).expect("disjoint names")
}

/// The trained presence classifier and how it was chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresenceModel {
    pub kind: ModelKind,
    pub coverage: Coverage,
    pub cv_f1: f64,
    pub pipeline: Pipeline,
}

impl PresenceModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Per-kind studies, in `settings.kinds` order.
#[derive(Clone, Debug, PartialEq)]
pub struct PresenceTraining {
    pub model: PresenceModel,
    pub studies: Vec<(ModelKind, StudyResult)>,
}

/// Runs one study per candidate kind, keeps the best trial overall (ties to
/// the earlier kind) and refits it on every row.
pub fn train_presence(
    data: &PresenceDataset,
    coverage: Coverage,
    sources: FeatureSources<'_>,
    settings: &PresenceSettings,
) -> Result<PresenceTraining> {
    if !data.labels.contains(&0) || !data.labels.contains(&1) {
        return Err(Error::InsufficientData(
            "presence training needs both present and missing cells".into(),
        ));
    }
    if settings.kinds.is_empty() {
        return Err(Error::InvalidArgument("no model kinds to try".into()));
    }
    let folds = k_fold_split(data.len(), settings.folds, seed::child(settings.seed, stream::FOLDS, 0))?;
    let mut studies = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (ki, &kind) in settings.kinds.iter().enumerate() {
        let space = presence_space(kind);
        let objective = |a: &hpo::Assignment, trial_seed: u64| {
            let cfg = hpo::feature_config(a, &settings.base_config)?;
            check_presence_config(&cfg)?;
            let hp = hpo::hyperparams(a, kind)?;
            cross_validate(&data.keys, &data.labels, &folds, &cfg, &hp, sources, trial_seed)
        };
        let study_seed = seed::child(settings.seed, stream::STUDY, ki as u64);
        let study = run_study(&space, objective, settings.n_trials, study_seed, settings.sampler)?;
        if let Some(t) = study.best_trial() {
            log::info!("presence {}: best CV F1 {:.2} (trial {})", kind.as_str(), t.score(), t.index);
            if best.map_or(true, |(_, s)| t.score() > s) {
                best = Some((ki, t.score()));
            }
        }
        studies.push((kind, study));
    }
    let (ki, cv_f1) = best.ok_or_else(|| Error::InsufficientData("every presence trial failed".into()))?;
    let (kind, study) = &studies[ki];
    let trial = study.best_trial().expect("best exists");
    let cfg = hpo::feature_config(&trial.assignment, &settings.base_config)?;
    let hp = hpo::hyperparams(&trial.assignment, *kind)?;
    let pipeline = fit_pipeline(
        &data.keys,
        &data.labels,
        &cfg,
        &hp,
        sources,
        seed::child(settings.seed, stream::MODEL, 0),
    )?;
    Ok(PresenceTraining {
        model: PresenceModel {
            kind: *kind,
            coverage,
            cv_f1,
            pipeline,
        },
        studies,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCell {
    pub lang: LangCode,
    pub feat_id: String,
    pub p_missing: f64,
    pub flagged: bool,
}

/// Present cells by descending `p_missing`; the first
/// `ceil(fraction * len)` are flagged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissingRanking {
    pub fraction: f64,
    pub cells: Vec<RankedCell>,
}

/// `ceil(fraction * n)`, robust to `fraction * n` landing a hair above an
/// integer through rounding.
pub fn flag_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let c = (x - 1e-9 * x.abs().max(1.0)).ceil();
    (c.max(0.0) as usize).min(n)
}

/// Orders cells by `p_missing` descending, ties by `(feat_id, lang)`, and
/// flags the top fraction.
pub fn rank_cells(mut cells: Vec<(LangCode, String, f64)>, fraction: f64) -> Result<MissingRanking> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("fraction {fraction} outside (0, 1]")));
    }
    cells.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.0.cmp(&b.0))
    });
    let n_flag = flag_count(fraction, cells.len());
    Ok(MissingRanking {
        fraction,
        cells: cells
            .into_iter()
            .enumerate()
            .map(|(i, (lang, feat_id, p))| RankedCell {
                lang,
                feat_id,
                p_missing: p,
                flagged: i < n_flag,
            })
            .collect(),
    })
}

/// Scores every present cell of the covered features with
/// `1 - P(present)`.
pub fn rank_missing(
    model: &PresenceModel,
    matrix: &TypologyMatrix,
    sources: FeatureSources<'_>,
    fraction: f64,
) -> Result<MissingRanking> {
    let mut keys = Vec::new();
    for f in covered_features(matrix, model.coverage) {
        for l in matrix.present_langs(f) {
            keys.push(RowKey {
                lang: matrix.languages()[l],
                feat_id: matrix.features()[f].feat_id.clone(),
            });
        }
    }
    let p_present = model.pipeline.predict_proba(&keys, sources)?;
    let cells = keys
        .into_iter()
        .zip(p_present)
        .map(|(k, p)| (k.lang, k.feat_id, 1.0 - p))
        .collect();
    rank_cells(cells, fraction)
}

impl MissingRanking {
    pub fn n_flagged(&self) -> usize {
        self.cells.iter().filter(|c| c.flagged).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iso639_3,feat_id,p_missing,flagged\n");
        for c in &self.cells {
            let _ = writeln!(out, "{},{},{:.6},{}", c.lang, c.feat_id, c.p_missing, u8::from(c.flagged));
        }
        out
    }

    /// Parses `to_csv` output; `fraction` is recomputed from the flags.
    pub fn from_csv(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "iso639_3,feat_id,p_missing,flagged" => {}
            _ => return Err(Error::parse(source, 1, "1", "expected header iso639_3,feat_id,p_missing,flagged")),
        }
        let mut cells = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::parse(source, i + 1, "1", format!("expected 4 fields, found {}", f.len())));
            }
            let lang = f[0].parse().map_err(|e: Error| Error::parse(source, i + 1, "iso639_3", e.to_string()))?;
            let p_missing: f64 = f[2]
                .parse()
                .map_err(|_| Error::parse(source, i + 1, "p_missing", format!("bad probability `{}`", f[2])))?;
            let flagged = match f[3] {
                "0" => false,
                "1" => true,
                other => return Err(Error::parse(source, i + 1, "flagged", format!("bad flag `{other}`"))),
            };
            cells.push(RankedCell {
                lang,
                feat_id: f[1].to_string(),
                p_missing,
                flagged,
            });
        }
        let n_flag = cells.iter().filter(|c| c.flagged).count();
        let fraction = if cells.is_empty() { 0.0 } else { n_flag as f64 / cells.len() as f64 };
        Ok(MissingRanking { fraction, cells })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRatio {
    pub feat_id: String,
    pub flagged: usize,
    pub present: usize,
    /// `None` when the feature has no present cells.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissingReport {
    pub features: Vec<FeatureRatio>,
}

/// Flagged / present per covered feature, in matrix feature order.
pub fn missing_ratio(ranking: &MissingRanking, matrix: &TypologyMatrix, coverage: Coverage) -> Result<MissingReport> {
    let mut flagged: BTreeMap<&str, usize> = BTreeMap::new();
    for c in ranking.cells.iter().filter(|c| c.flagged) {
        let f = matrix
            .feat_idx(&c.feat_id)
            .ok_or_else(|| Error::Contract(format!("ranked feature `{}` not in the matrix", c.feat_id)))?;
        let l = matrix
            .lang_idx(&c.lang)
            .ok_or_else(|| Error::Contract(format!("ranked language `{}` not in the matrix", c.lang)))?;
        if matrix.get(l, f).is_none() {
            return Err(Error::Contract(format!("flagged cell ({}, {}) is not present", c.lang, c.feat_id)));
        }
        *flagged.entry(c.feat_id.as_str()).or_insert(0) += 1;
    }
    let features = covered_features(matrix, coverage)
        .into_iter()
        .map(|f| {
            let feat_id = matrix.features()[f].feat_id.clone();
            let present = matrix.present_langs(f).len();
            let n = flagged.get(feat_id.as_str()).copied().unwrap_or(0);
            FeatureRatio {
                ratio: (present > 0).then(|| n as f64 / present as f64),
                feat_id,
                flagged: n,
                present,
            }
        })
        .collect();
    Ok(MissingReport { features })
}

impl MissingReport {
    pub fn ratio_of(&self, feat_id: &str) -> Option<f64> {
        self.features.iter().find(|f| f.feat_id == feat_id)?.ratio
    }

    /// Counts per bin `[i/20, (i+1)/20)`, the last bin closed. Features with
    /// no present cells are left out.
    pub fn histogram(&self) -> [usize; HIST_BINS] {
        let mut bins = [0usize; HIST_BINS];
        for f in self.features.iter().filter(|f| f.present > 0) {
            let b = (f.flagged * HIST_BINS / f.present).min(HIST_BINS - 1);
            bins[b] += 1;
        }
        bins
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feat_id,flagged,present,ratio\n");
        for f in &self.features {
            let ratio = f.ratio.map(|r| format!("{r:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", f.feat_id, f.flagged, f.present, ratio);
        }
        out
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for (i, c) in self.histogram().iter().enumerate() {
            let _ = writeln!(
                out,
                "{:.2},{:.2},{}",
                i as f64 / HIST_BINS as f64,
                (i + 1) as f64 / HIST_BINS as f64,
                c
            );
        }
        out
    }
}
