//! One function per subcommand. Stages talk to each other only through
//! files in the output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use typofill::corpus::{
    load_language_meta, load_phylogeny, load_pos_corpus, load_swadesh, load_typology, LangCode, LanguageMeta,
    PhylogenyVector, TargetManifest, TypologyMatrix,
};
use typofill::featurize::{extract_pos_ngrams, FeatureConfig, FeatureSources, Group, NGramCounts};
use typofill::pipeline::Pipeline;
use typofill::posquality::{
    compute_quality_features, filter_languages, fit_quality_regressor, load_gold_recall, load_pos_stats,
    parse_quality_kept, quality_csv,
};
use typofill::presence::{
    build_presence_dataset, missing_ratio, rank_missing, train_presence, Coverage, MissingRanking, PresenceModel,
    PresenceSettings,
};
use typofill::typology::{
    evaluate_kfold, evaluate_likely_missing, impute_all, pin_group, train_all, KnnBaselineConfig, TypologySettings,
};

use crate::config::RunConfig;
use crate::manifest;
use crate::synth::{self, SynthParams};

pub const PRESENCE_MODEL: &str = "presence_model.json";
pub const RANKING: &str = "ranking.csv";
pub const MISSING_RATIO: &str = "missing_ratio.csv";
pub const MISSING_HIST: &str = "missing_ratio_hist.csv";
pub const TABLE1: &str = "table1.csv";
pub const TABLE1_SKIPPED: &str = "table1_skipped.csv";
pub const TABLE2: &str = "table2.csv";
pub const TABLE2_SKIPPED: &str = "table2_skipped.csv";
pub const COMPLETED: &str = "completed.csv";
pub const PROVENANCE: &str = "provenance.csv";
pub const IMPUTE_SKIPPED: &str = "impute_skipped.csv";
pub const QUALITY: &str = "quality.csv";
pub const QUALITY_JSON: &str = "pos_quality.json";
pub const VALIDATE_JSON: &str = "validate.json";
pub const SUMMARY: &str = "summary.csv";
pub const REPORT_JSON: &str = "report.json";

/// Collects the files a stage reads and writes for its manifest entry.
struct Stage<'a> {
    name: &'static str,
    cfg: &'a RunConfig,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl<'a> Stage<'a> {
    fn new(name: &'static str, cfg: &'a RunConfig) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
        Ok(Stage {
            name,
            cfg,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.out(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        self.outputs.push(path);
        Ok(())
    }

    /// Reads an earlier stage's artifact, naming that stage if it is absent.
    fn require(&mut self, name: &str, producer: &str) -> Result<String> {
        let path = self.out(name);
        if !path.is_file() {
            bail!(
                "missing {}: run `typofill {producer}` first",
                path.display()
            );
        }
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(path);
        Ok(text)
    }

    fn finish(mut self, data: Option<&Data>, detail: Option<serde_json::Value>) -> Result<()> {
        if let Some(d) = data {
            self.inputs.extend(d.read.iter().cloned());
        }
        self.inputs.sort();
        self.inputs.dedup();
        manifest::record(&self.cfg.out_dir, self.name, self.cfg, &self.inputs, &self.outputs, detail)?;
        Ok(())
    }
}

/// Everything the typology-side stages read from the data directory.
pub struct Data {
    pub meta: BTreeMap<LangCode, LanguageMeta>,
    pub matrix: TypologyMatrix,
    pub phylogeny: BTreeMap<LangCode, PhylogenyVector>,
    pub ngrams: Option<NGramCounts>,
    pub read: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl Data {
    pub fn sources(&self) -> FeatureSources<'_> {
        FeatureSources {
            meta: &self.meta,
            phylogeny: &self.phylogeny,
            ngrams: self.ngrams.as_ref(),
        }
    }
}

/// Loads the database, metadata and phylogeny, and the n-gram corpus when
/// `with_corpus` is set. A `quality.csv` from `pos-quality` restricts the
/// corpus to the languages it keeps.
pub fn load_data(cfg: &RunConfig, with_corpus: bool) -> Result<Data> {
    let inp = &cfg.inputs;
    let mut read = Vec::new();
    let mut warnings = Vec::new();

    let targets_path = inp.resolve(&inp.targets);
    let targets = if targets_path.is_file() {
        read.push(targets_path.clone());
        Some(TargetManifest::load(&targets_path)?)
    } else {
        log::info!("no {}; S_/P_ features are targets", targets_path.display());
        None
    };
    let typology_path = inp.resolve(&inp.typology);
    let matrix = load_typology(&typology_path, targets.as_ref())?;
    read.push(typology_path);

    let languages_path = inp.resolve(&inp.languages);
    let loaded = load_language_meta(&languages_path)?;
    warnings.extend(loaded.warnings);
    read.push(languages_path);
    let meta: BTreeMap<LangCode, LanguageMeta> = loaded.value.into_iter().map(|m| (m.code, m)).collect();

    let phylo_path = inp.resolve(&inp.phylogeny);
    let phylogeny = load_phylogeny(&phylo_path)?;
    read.push(phylo_path);

    for code in matrix.languages() {
        if !meta.contains_key(code) {
            warnings.push(format!("{code}: no metadata record"));
        }
        if !phylogeny.contains_key(code) {
            warnings.push(format!("{code}: no phylogeny vector"));
        }
    }

    let ngrams = if with_corpus {
        let pos_dir = inp.resolve(&inp.pos_dir);
        if pos_dir.is_dir() {
            let corpus = load_pos_corpus(&pos_dir)?;
            warnings.extend(corpus.warnings);
            read.push(pos_dir);
            let mut counts = extract_pos_ngrams(&corpus.value);
            let quality = cfg.out_dir.join(QUALITY);
            if quality.is_file() {
                let text = std::fs::read_to_string(&quality)?;
                let kept = parse_quality_kept(&text, &quality.display().to_string())?;
                counts.retain(|c| kept.contains(c));
                log::info!("n-gram corpus restricted to {} languages kept by {}", kept.len(), quality.display());
                read.push(quality);
            }
            Some(counts)
        } else {
            log::info!("no {}; the n-gram block is disabled", pos_dir.display());
            None
        }
    } else {
        None
    };

    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Data {
        meta,
        matrix,
        phylogeny,
        ngrams,
        read,
        warnings,
    })
}

fn presence_settings(cfg: &RunConfig) -> PresenceSettings {
    PresenceSettings {
        kinds: cfg.presence_kinds.clone(),
        n_trials: cfg.presence_trials,
        folds: cfg.presence_folds,
        sampler: cfg.sampler,
        seed: cfg.seed,
        ..PresenceSettings::default()
    }
}

pub fn typology_settings(cfg: &RunConfig, has_corpus: bool) -> TypologySettings {
    let mut s = TypologySettings {
        kind: cfg.typology_kind,
        n_trials: cfg.typology_trials,
        folds: cfg.typology_folds,
        inner_folds: cfg.inner_folds,
        sampler: cfg.sampler,
        seed: cfg.seed,
        mode: cfg.hpo_mode,
        knn: KnnBaselineConfig { k: cfg.knn_k },
        base_config: FeatureConfig::all(),
        ..TypologySettings::default()
    };
    if !has_corpus {
        s.base_config.set(Group::PosNgrams, false);
        pin_group(&mut s, Group::PosNgrams, false);
    }
    s
}

#[derive(Serialize)]
struct ValidateReport {
    languages: usize,
    features: usize,
    target_features: usize,
    observed_cells: usize,
    observed_fraction: f64,
    metadata_records: usize,
    phylogeny_vectors: usize,
    corpus_languages: Option<usize>,
    warnings: Vec<String>,
}

pub fn validate(cfg: &RunConfig) -> Result<()> {
    let mut stage = Stage::new("validate", cfg)?;
    let data = load_data(cfg, true)?;
    let m = &data.matrix;
    let report = ValidateReport {
        languages: m.n_langs(),
        features: m.n_feats(),
        target_features: m.target_indices().len(),
        observed_cells: m.observed_count(),
        observed_fraction: (m.observed_fraction() * 1e6).round() / 1e6,
        metadata_records: data.meta.len(),
        phylogeny_vectors: data.phylogeny.len(),
        corpus_languages: data.ngrams.as_ref().map(|n| n.per_language.len()),
        warnings: data.warnings.clone(),
    };
    println!(
        "{} languages, {} features ({} targets), observed fraction {:.4}, {} warnings",
        report.languages,
        report.features,
        report.target_features,
        report.observed_fraction,
        report.warnings.len()
    );
    stage.write(VALIDATE_JSON, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    stage.finish(Some(&data), None)
}

pub fn presence(cfg: &RunConfig) -> Result<()> {
    let mut stage = Stage::new("presence", cfg)?;
    let data = load_data(cfg, false)?;
    let settings = presence_settings(cfg);
    let sample = cfg.presence_sample.map(|n| (n, cfg.seed));
    let ds = build_presence_dataset(&data.matrix, &settings.base_config, Coverage::Targets, sample)?;
    log::info!("presence dataset: {} rows over {} languages", ds.len(), ds.languages.len());
    let trained = train_presence(&ds, Coverage::Targets, data.sources(), &settings)?;
    for (kind, study) in &trained.studies {
        stage.write(&format!("study_presence_{}.json", kind.as_str()), &(study.to_json()? + "\n"))?;
    }
    stage.write(PRESENCE_MODEL, &(trained.model.to_json()? + "\n"))?;
    println!(
        "presence classifier: {} with CV F1 {:.2}",
        trained.model.kind.as_str(),
        trained.model.cv_f1
    );
    stage.finish(Some(&data), None)
}

pub fn rank(cfg: &RunConfig) -> Result<()> {
    let mut stage = Stage::new("rank", cfg)?;
    let model = PresenceModel::from_json(&stage.require(PRESENCE_MODEL, "presence")?)
        .with_context(|| format!("parsing {PRESENCE_MODEL}"))?;
    let data = load_data(cfg, false)?;
    let ranking = rank_missing(&model, &data.matrix, data.sources(), cfg.top_fraction)?;
    let report = missing_ratio(&ranking, &data.matrix, model.coverage)?;
    stage.write(RANKING, &ranking.to_csv())?;
    stage.write(MISSING_RATIO, &report.to_csv())?;
    stage.write(MISSING_HIST, &report.histogram_csv())?;
    let above = report
        .features
        .iter()
        .filter(|r| r.ratio.is_some_and(|x| x > cfg.ratio_threshold))
        .count();
    println!(
        "flagged {} of {} present cells; {} features above ratio {}",
        ranking.n_flagged(),
        ranking.cells.len(),
        above,
        cfg.ratio_threshold
    );
    stage.finish(Some(&data), None)
}

pub fn eval_kfold(cfg: &RunConfig) -> Result<()> {
    let mut stage = Stage::new("eval-kfold", cfg)?;
    let data = load_data(cfg, true)?;
    let settings = typology_settings(cfg, data.ngrams.is_some());
    let report = evaluate_kfold(&data.matrix, data.sources(), &settings)?;
    stage.write(TABLE1, &report.table1_csv())?;
    stage.write(TABLE1_SKIPPED, &report.skipped_csv())?;
    println!(
        "{}: {} features, average F1 KNN {:.2} vs ours {:.2}; {} skipped",
        report.setup,
        report.rows.len(),
        report.avg_knn,
        report.avg_ours,
        report.skipped.len()
    );
    stage.finish(Some(&data), None)
}

pub fn eval_missing(cfg: &RunConfig) -> Result<()> {
    let mut stage = Stage::new("eval-missing", cfg)?;
    let ranking_path = stage.out(RANKING);
    let ranking = MissingRanking::from_csv(&stage.require(RANKING, "rank")?, &ranking_path.display().to_string())?;
    let data = load_data(cfg, true)?;
    let ratios = missing_ratio(&ranking, &data.matrix, Coverage::Targets)?;
    let settings = typology_settings(cfg, data.ngrams.is_some());
    let report = evaluate_likely_missing(
        &data.matrix,
        data.sources(),
        &ranking,
        &ratios,
        cfg.ratio_threshold,
        &settings,
    )?;
    stage.write(TABLE2, &report.table2_csv())?;
    stage.write(TABLE2_SKIPPED, &report.skipped_csv())?;
    println!(
        "likely-missing: {} features, average F1 KNN {:.2} vs ours {:.2}; {} skipped",
        report.rows.len(),
        report.avg_knn,
        report.avg_ours,
        report.skipped.len()
    );
    stage.finish(Some(&data), None)
}

/// A feature id made safe for a file name.
pub fn file_stem(feat_id: &str) -> String {
    feat_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

pub fn impute(cfg: &RunConfig) -> Result<()> {
    let mut stage = Stage::new("impute", cfg)?;
    let data = load_data(cfg, true)?;
    let settings = typology_settings(cfg, data.ngrams.is_some());
    let (models, skipped) = train_all(&data.matrix, data.sources(), &settings)?;
    for m in &models {
        stage.write(
            &format!("studies/study_{}.json", file_stem(&m.feat_id)),
            &(m.study.to_json()? + "\n"),
        )?;
    }
    let pipelines: BTreeMap<String, Pipeline> = models.into_iter().map(|m| (m.feat_id, m.pipeline)).collect();
    let imputed = impute_all(&data.matrix, data.sources(), &pipelines, settings.knn)?;
    stage.write(COMPLETED, &imputed.completed_csv())?;
    stage.write(PROVENANCE, &imputed.provenance_csv())?;
    let mut skipped_csv = String::from("feat_id,reason\n");
    for s in &skipped {
        let _ = writeln!(skipped_csv, "{},{}", s.feat_id, s.reason.replace(',', ";"));
    }
    stage.write(IMPUTE_SKIPPED, &skipped_csv)?;
    println!(
        "imputed with {} feature models; {} features fell back to KNN",
        pipelines.len(),
        skipped.len()
    );
    stage.finish(Some(&data), None)
}

#[derive(Serialize)]
struct QualitySummary {
    n_train: usize,
    cv_mae: f64,
    folds: usize,
    threshold: f64,
    estimated: usize,
    kept: usize,
    warnings: Vec<String>,
}

pub fn pos_quality(cfg: &RunConfig) -> Result<()> {
    let mut stage = Stage::new("pos-quality", cfg)?;
    let inp = &cfg.inputs;
    let pos_dir = inp.resolve(&inp.pos_dir);
    let stats_path = inp.resolve(&inp.pos_stats);
    let swadesh_path = inp.resolve(&inp.swadesh);
    let gold_path = inp.resolve(&inp.gold_recall);
    let corpus = load_pos_corpus(&pos_dir)?;
    let stats = load_pos_stats(&stats_path)?;
    let swadesh = load_swadesh(&swadesh_path)?;
    let gold = load_gold_recall(&gold_path)?;
    stage.inputs.extend([pos_dir, stats_path, swadesh_path, gold_path]);

    let features = compute_quality_features(&corpus.value, &stats, &swadesh);
    let mut warnings = corpus.warnings;
    warnings.extend(features.warnings);
    for w in &warnings {
        log::warn!("{w}");
    }
    let regressor = fit_quality_regressor(&features.value, &gold, cfg.seed)?;
    let estimates = regressor.estimate_all(&features.value);
    let kept = filter_languages(&estimates, cfg.pos_quality_threshold);
    stage.write(QUALITY, &quality_csv(&estimates, cfg.pos_quality_threshold))?;
    let summary = QualitySummary {
        n_train: regressor.n_train,
        cv_mae: regressor.cv_mae,
        folds: regressor.folds,
        threshold: cfg.pos_quality_threshold,
        estimated: estimates.len(),
        kept: kept.len(),
        warnings,
    };
    stage.write(QUALITY_JSON, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    println!(
        "tagger quality: held-out MAE {:.2} over {} languages; {} of {} kept above {}",
        regressor.cv_mae,
        regressor.n_train,
        kept.len(),
        estimates.len(),
        cfg.pos_quality_threshold
    );
    stage.finish(None, None)
}

/// The `average` row of a results table: (features, knn, ours).
fn table_average(text: &str, name: &str) -> Result<(usize, f64, f64)> {
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.first() == Some(&"average") {
            let (ki, oi) = if name == TABLE2 { (2, 3) } else { (1, 2) };
            let num = |i: usize| -> Result<f64> {
                let s = f.get(i).ok_or_else(|| anyhow!("{name}: short average row"))?;
                if s.is_empty() || *s == "NaN" {
                    Ok(f64::NAN)
                } else {
                    s.parse().map_err(|_| anyhow!("{name}: bad average `{s}`"))
                }
            };
            return Ok((rows, num(ki)?, num(oi)?));
        }
        rows += 1;
    }
    bail!("{name}: no average row")
}

#[derive(Serialize)]
struct ReportSetup {
    setup: &'static str,
    features: usize,
    avg_knn_f1: Option<f64>,
    avg_ours_f1: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    setups: Vec<ReportSetup>,
    missing_ratio_histogram: Option<Vec<usize>>,
}

fn fmt_opt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        String::new()
    }
}

pub fn report(cfg: &RunConfig) -> Result<()> {
    let mut stage = Stage::new("report", cfg)?;
    let mut setups = Vec::new();
    for (name, setup) in [(TABLE1, "kfold"), (TABLE2, "likely_missing")] {
        if stage.out(name).is_file() {
            let text = stage.require(name, "")?;
            let (n, knn, ours) = table_average(&text, name)?;
            setups.push(ReportSetup {
                setup,
                features: n,
                avg_knn_f1: knn.is_finite().then_some(knn),
                avg_ours_f1: ours.is_finite().then_some(ours),
            });
        }
    }
    if setups.is_empty() {
        bail!(
            "no results in {}: run `typofill eval-kfold` or `typofill eval-missing` first",
            cfg.out_dir.display()
        );
    }
    let histogram = if stage.out(MISSING_HIST).is_file() {
        let text = stage.require(MISSING_HIST, "rank")?;
        let counts = text
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.rsplit(',')
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| anyhow!("{MISSING_HIST}: bad line `{l}`"))
            })
            .collect::<Result<Vec<usize>>>()?;
        Some(counts)
    } else {
        None
    };

    let mut csv = String::from("setup,features,avg_knn_f1,avg_ours_f1,ours_minus_knn\n");
    for s in &setups {
        let (k, o) = (s.avg_knn_f1.unwrap_or(f64::NAN), s.avg_ours_f1.unwrap_or(f64::NAN));
        let _ = writeln!(csv, "{},{},{},{},{}", s.setup, s.features, fmt_opt(k), fmt_opt(o), fmt_opt(o - k));
        println!("{:<15} {:>4} features  KNN {:>7}  ours {:>7}", s.setup, s.features, fmt_opt(k), fmt_opt(o));
    }
    stage.write(SUMMARY, &csv)?;
    let report = Report {
        setups,
        missing_ratio_histogram: histogram,
    };
    stage.write(REPORT_JSON, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    stage.finish(None, None)
}

pub fn synth(cfg: &RunConfig, params: &SynthParams, dir: &Path) -> Result<()> {
    let dataset = synth::generate(params)?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let written = synth::write_dataset(&dataset, dir)?;
    let detail = serde_json::to_value(&dataset.truth)?;
    manifest::record(dir, "synth", cfg, &[], &written, Some(detail))?;
    println!(
        "{}: {} languages × {} features, observed fraction {:.4}, written to {}",
        params.scenario,
        params.n_langs,
        params.n_feats,
        dataset.truth.observed_fraction,
        dir.display()
    );
    Ok(())
}

