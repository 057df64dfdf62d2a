//! Run configuration: defaults, then a flat `key=value` file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use typofill::hpo::Sampler;
use typofill::mlcore::ModelKind;
use typofill::typology::HpoMode;

/// Input file locations. Relative names resolve against `data_dir`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inputs {
    pub data_dir: PathBuf,
    pub languages: PathBuf,
    pub typology: PathBuf,
    pub phylogeny: PathBuf,
    pub pos_dir: PathBuf,
    pub swadesh: PathBuf,
    pub targets: PathBuf,
    pub pos_stats: PathBuf,
    pub gold_recall: PathBuf,
}

impl Default for Inputs {
    fn default() -> Self {
        Inputs {
            data_dir: PathBuf::from("data"),
            languages: "languages.tsv".into(),
            typology: "typology.csv".into(),
            phylogeny: "phylogeny.txt".into(),
            pos_dir: "pos".into(),
            swadesh: "swadesh.tsv".into(),
            targets: "targets.txt".into(),
            pos_stats: "pos_stats.tsv".into(),
            gold_recall: "gold_recall.tsv".into(),
        }
    }
}

impl Inputs {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.data_dir.join(p)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub inputs: Inputs,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub presence_folds: usize,
    pub typology_folds: usize,
    pub inner_folds: usize,
    pub presence_trials: usize,
    pub typology_trials: usize,
    pub presence_kinds: Vec<ModelKind>,
    pub typology_kind: ModelKind,
    /// Languages sampled for the presence dataset; all when unset.
    pub presence_sample: Option<usize>,
    pub top_fraction: f64,
    pub ratio_threshold: f64,
    pub pos_quality_threshold: f64,
    pub hpo_mode: HpoMode,
    pub sampler: Sampler,
    pub knn_k: usize,
    /// Worker threads; all cores when unset.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Inputs::default(),
            out_dir: PathBuf::from("out"),
            seed: 0,
            presence_folds: 5,
            typology_folds: 10,
            inner_folds: 3,
            presence_trials: 10,
            typology_trials: 30,
            presence_kinds: vec![ModelKind::GradientBoosting],
            typology_kind: ModelKind::RandomForest,
            presence_sample: None,
            top_fraction: 0.2,
            ratio_threshold: 0.5,
            pos_quality_threshold: 80.0,
            hpo_mode: HpoMode::Outer,
            sampler: Sampler::Random,
            knn_k: 5,
            threads: None,
        }
    }
}

/// Keys accepted in a config file and by [`RunConfig::set`].
pub const KEYS: &[&str] = &[
    "data_dir",
    "languages",
    "typology",
    "phylogeny",
    "pos_dir",
    "swadesh",
    "targets",
    "pos_stats",
    "gold_recall",
    "out_dir",
    "seed",
    "presence_folds",
    "typology_folds",
    "inner_folds",
    "presence_trials",
    "typology_trials",
    "presence_kinds",
    "typology_kind",
    "presence_sample",
    "top_fraction",
    "ratio_threshold",
    "pos_quality_threshold",
    "hpo_mode",
    "sampler",
    "knn_k",
    "threads",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow!("`{key}`: cannot parse `{value}`"))
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let i = &mut self.inputs;
        match key {
            "data_dir" => i.data_dir = v.into(),
            "languages" => i.languages = v.into(),
            "typology" => i.typology = v.into(),
            "phylogeny" => i.phylogeny = v.into(),
            "pos_dir" => i.pos_dir = v.into(),
            "swadesh" => i.swadesh = v.into(),
            "targets" => i.targets = v.into(),
            "pos_stats" => i.pos_stats = v.into(),
            "gold_recall" => i.gold_recall = v.into(),
            "out_dir" => self.out_dir = v.into(),
            "seed" => self.seed = num(key, v)?,
            "presence_folds" => self.presence_folds = num(key, v)?,
            "typology_folds" => self.typology_folds = num(key, v)?,
            "inner_folds" => self.inner_folds = num(key, v)?,
            "presence_trials" => self.presence_trials = num(key, v)?,
            "typology_trials" => self.typology_trials = num(key, v)?,
            "presence_kinds" => {
                self.presence_kinds = v
                    .split(',')
                    .map(|k| k.trim().parse::<ModelKind>().map_err(|e| anyhow!("`{key}`: {e}")))
                    .collect::<Result<_>>()?
            }
            "typology_kind" => self.typology_kind = v.parse().map_err(|e| anyhow!("`{key}`: {e}"))?,
            "presence_sample" => {
                self.presence_sample = if v.is_empty() || v == "all" { None } else { Some(num(key, v)?) }
            }
            "top_fraction" => self.top_fraction = num(key, v)?,
            "ratio_threshold" => self.ratio_threshold = num(key, v)?,
            "pos_quality_threshold" => self.pos_quality_threshold = num(key, v)?,
            "hpo_mode" => self.hpo_mode = v.parse().map_err(|e| anyhow!("`{key}`: {e}"))?,
            "sampler" => self.sampler = v.parse().map_err(|e| anyhow!("`{key}`: {e}"))?,
            "knn_k" => self.knn_k = num(key, v)?,
            "threads" => self.threads = if v.is_empty() { None } else { Some(num(key, v)?) },
            _ => bail!("unknown config key `{key}`"),
        }
        Ok(())
    }

    /// Applies a `key = value` file. `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        for (n, pair) in parse_pairs(&text).with_context(|| format!("in {}", path.display()))? {
            self.set(&pair.0, &pair.1)
                .with_context(|| format!("{}:{}", path.display(), n))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            bail!("top_fraction must lie in (0, 1], got {}", self.top_fraction);
        }
        if !(0.0..=100.0).contains(&self.pos_quality_threshold) {
            bail!("pos_quality_threshold must lie in [0, 100]");
        }
        if !(0.0..=1.0).contains(&self.ratio_threshold) {
            bail!("ratio_threshold must lie in [0, 1]");
        }
        for (name, k) in [
            ("presence_folds", self.presence_folds),
            ("typology_folds", self.typology_folds),
            ("inner_folds", self.inner_folds),
        ] {
            if k < 2 {
                bail!("{name} must be at least 2, got {k}");
            }
        }
        if self.presence_trials == 0 || self.typology_trials == 0 {
            bail!("trial budgets must be at least 1");
        }
        if self.presence_kinds.is_empty() {
            bail!("presence_kinds is empty");
        }
        if self.knn_k == 0 {
            bail!("knn_k must be at least 1");
        }
        if self.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        Ok(())
    }
}

/// `(line number, (key, value))` for every non-blank, non-comment line.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, (String, String))>> {
    let mut out = Vec::new();
    let mut seen = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key=value", i + 1))?;
        let k = k.trim().to_string();
        if let Some(prev) = seen.insert(k.clone(), i + 1) {
            bail!("line {}: `{k}` already set on line {prev}", i + 1);
        }
        out.push((i + 1, (k, v.trim().to_string())));
    }
    Ok(out)
}
