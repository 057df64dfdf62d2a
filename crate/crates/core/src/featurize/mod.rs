//! Numeric feature vectors for (language, feature) pairs.
//!
//! Encoders (vocabularies, standardizers, PCA projections) are fitted on
//! training rows only and are immutable afterwards. A vector concatenates
//! the enabled blocks in [`Group::ALL`] order:
//!
//! | block          | width                                  |
//! |----------------|----------------------------------------|
//! | lang_id        | training languages (one-hot)           |
//! | feat_id        | training features (one-hot)            |
//! | geo_lat/long   | 2 each: z-score, missing flag          |
//! | lang_group     | 6 (one-hot, class 0..=5)               |
//! | aes_status     | 6 (one-hot, level 1..=6)               |
//! | wiki_size      | 2: z-score of `ln(1+x)`, missing flag  |
//! | num_speakers   | 2: z-score of `ln(1+x)`, missing flag  |
//! | lang_fam       | training families (one-hot)            |
//! | scripts        | training scripts (n-hot)               |
//! | feat_name      | training name tokens (n-hot)           |
//! | phylogeny      | PCA components                         |
//! | pos_ngrams     | PCA components + has-corpus flag       |
//!
//! Missing continuous values are mean-imputed (z = 0). Unseen categories
//! encode as all zeros.

mod config;
mod ngrams;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{FeatureConfig, Group};
pub use ngrams::{encode_feat_name, extract_pos_ngrams, NGram, NGramCounts};

use crate::corpus::{AesStatus, LangCode, LanguageMeta, PhylogenyVector, PHYLO_DIM};
use crate::error::{Error, Result};
use crate::mlcore::{fit_pca, Matrix, PcaModel, RowKey};
use crate::seed::hash_str;

/// Borrowed views of the per-language inputs.
#[derive(Clone, Copy)]
pub struct FeatureSources<'a> {
    pub meta: &'a BTreeMap<LangCode, LanguageMeta>,
    pub phylogeny: &'a BTreeMap<LangCode, PhylogenyVector>,
    pub ngrams: Option<&'a NGramCounts>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaBlock {
    pub name: String,
    pub width: usize,
}

/// Ordered block names and widths of an assembled vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub blocks: Vec<SchemaBlock>,
    pub total: usize,
    /// Distinct POS n-grams in the fitted vocabulary (0 when unused).
    pub ngram_vocabulary: usize,
}

impl FeatureSchema {
    pub fn fingerprint(&self) -> String {
        let desc: Vec<String> = self.blocks.iter().map(|b| format!("{}:{}", b.name, b.width)).collect();
        format!("{:016x}", hash_str(&desc.join(";")))
    }

    pub fn width_of(&self, name: &str) -> Option<usize> {
        self.blocks.iter().find(|b| b.name == name).map(|b| b.width)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Vocab<T: Ord> {
    items: Vec<T>,
}

impl<T: Ord + Clone> Vocab<T> {
    fn from_set(set: BTreeSet<T>) -> Self {
        Vocab {
            items: set.into_iter().collect(),
        }
    }

    fn index(&self, item: &T) -> Option<usize> {
        self.items.binary_search(item).ok()
    }

    fn len(&self) -> usize {
        self.items.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct Standardizer {
    mean: f64,
    sd: f64,
}

impl Standardizer {
    fn fit(values: &[f64]) -> Self {
        if values.is_empty() {
            return Standardizer { mean: 0.0, sd: 1.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        Standardizer {
            mean,
            sd: if sd > 1e-12 { sd } else { 1.0 },
        }
    }

    fn encode(&self, v: Option<f64>, out: &mut Vec<f64>) {
        match v {
            Some(v) => {
                out.push((v - self.mean) / self.sd);
                out.push(0.0);
            }
            None => {
                out.push(0.0);
                out.push(1.0);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct NgramEncoder {
    vocab: Vocab<NGram>,
    pca: Option<PcaModel>,
}

impl NgramEncoder {
    fn width(&self) -> usize {
        self.pca.as_ref().map_or(0, PcaModel::n_components) + 1
    }
}

/// Continuous metadata field, after the log transform where applicable.
fn continuous(meta: Option<&LanguageMeta>, g: Group) -> Option<f64> {
    let m = meta?;
    match g {
        Group::GeoLat => m.geo_lat,
        Group::GeoLong => m.geo_long,
        Group::WikiSize => m.wiki_size.map(|v| (v as f64).ln_1p()),
        Group::NumSpeakers => m.num_speakers.map(|v| (v as f64).ln_1p()),
        _ => None,
    }
}

/// L1-normalized n-gram frequencies of a language, if it has any n-grams.
fn normalized_ngrams(ngrams: &NGramCounts, lang: &LangCode) -> Option<Vec<(NGram, f64)>> {
    let counts = ngrams.counts(lang)?;
    let total: u64 = counts.values().map(|&c| u64::from(c)).sum();
    if total == 0 {
        return None;
    }
    Some(counts.iter().map(|(g, &c)| (*g, f64::from(c) / total as f64)).collect())
}

/// Everything fitted from training rows that vector assembly needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedEncoders {
    pub config: FeatureConfig,
    lang_vocab: Option<Vocab<LangCode>>,
    feat_vocab: Option<Vocab<String>>,
    standardizers: BTreeMap<Group, Standardizer>,
    fam_vocab: Option<Vocab<String>>,
    script_vocab: Option<Vocab<String>>,
    token_vocab: Option<Vocab<String>>,
    phylogeny: Option<PcaModel>,
    ngrams: Option<NgramEncoder>,
    schema: FeatureSchema,
}

/// Fits encoders for `config` on the languages and features in `train`.
///
/// PCA widths are capped at what the training data supports
/// (`min(requested, samples, dims)`); the schema records the width used.
pub fn fit_encoders(config: &FeatureConfig, sources: FeatureSources<'_>, train: &[RowKey]) -> Result<FittedEncoders> {
    config.validate()?;
    if !config.any_enabled() {
        return Err(Error::Contract("no feature group enabled".into()));
    }
    if train.is_empty() {
        return Err(Error::InsufficientData("no training rows to fit encoders on".into()));
    }
    let langs: BTreeSet<LangCode> = train.iter().map(|k| k.lang).collect();
    let feats: BTreeSet<String> = train.iter().map(|k| k.feat_id.clone()).collect();
    let meta_of = |l: &LangCode| sources.meta.get(l);

    let lang_vocab = config.use_lang_id.then(|| Vocab::from_set(langs.clone()));
    let feat_vocab = config.use_feat_id.then(|| Vocab::from_set(feats.clone()));

    let mut standardizers = BTreeMap::new();
    for g in [Group::GeoLat, Group::GeoLong, Group::WikiSize, Group::NumSpeakers] {
        if config.get(g) {
            let values: Vec<f64> = langs.iter().filter_map(|l| continuous(meta_of(l), g)).collect();
            standardizers.insert(g, Standardizer::fit(&values));
        }
    }

    let fam_vocab = config.use_lang_fam.then(|| {
        Vocab::from_set(langs.iter().filter_map(|l| meta_of(l)?.family.clone()).collect())
    });
    let script_vocab = config.use_scripts.then(|| {
        Vocab::from_set(
            langs
                .iter()
                .filter_map(meta_of)
                .flat_map(|m| m.scripts.iter().cloned())
                .collect(),
        )
    });
    let token_vocab = config
        .use_feat_name
        .then(|| Vocab::from_set(feats.iter().flat_map(|f| encode_feat_name(f)).collect()));

    let phylogeny = if config.use_phylogeny {
        let rows: Vec<Vec<f64>> = langs
            .iter()
            .map(|l| sources.phylogeny.get(l).map_or_else(|| vec![0.0; PHYLO_DIM], PhylogenyVector::to_dense))
            .collect();
        let k = config.phylo_n_comp.min(rows.len()).min(PHYLO_DIM);
        Some(fit_pca(&Matrix::from_rows(&rows)?, k)?)
    } else {
        None
    };

    let ngrams = if config.use_pos_ngrams {
        let empty = NGramCounts::default();
        let counts = sources.ngrams.unwrap_or(&empty);
        let rows: Vec<Vec<(NGram, f64)>> = langs.iter().filter_map(|l| normalized_ngrams(counts, l)).collect();
        let vocab = Vocab::from_set(rows.iter().flat_map(|r| r.iter().map(|(g, _)| *g)).collect());
        let pca = if rows.is_empty() || vocab.len() == 0 {
            None
        } else {
            let mut dense = Matrix::zeros(rows.len(), vocab.len());
            for (i, r) in rows.iter().enumerate() {
                for (g, v) in r {
                    dense.set(i, vocab.index(g).expect("in vocab"), *v);
                }
            }
            let k = config.ngram_n_comp.min(rows.len()).min(vocab.len());
            Some(fit_pca(&dense, k)?)
        };
        Some(NgramEncoder { vocab, pca })
    } else {
        None
    };

    let mut enc = FittedEncoders {
        config: config.clone(),
        lang_vocab,
        feat_vocab,
        standardizers,
        fam_vocab,
        script_vocab,
        token_vocab,
        phylogeny,
        ngrams,
        schema: FeatureSchema {
            blocks: Vec::new(),
            total: 0,
            ngram_vocabulary: 0,
        },
    };
    enc.schema = enc.schema_for(config)?;
    Ok(enc)
}

impl FittedEncoders {
    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn missing(g: Group) -> Error {
        Error::Contract(format!("block `{g}` enabled but its encoder was not fitted"))
    }

    fn block_width(&self, g: Group) -> Result<usize> {
        let need = |o: Option<usize>| o.ok_or_else(|| Self::missing(g));
        match g {
            Group::LangId => need(self.lang_vocab.as_ref().map(Vocab::len)),
            Group::FeatId => need(self.feat_vocab.as_ref().map(Vocab::len)),
            Group::GeoLat | Group::GeoLong | Group::WikiSize | Group::NumSpeakers => {
                need(self.standardizers.get(&g).map(|_| 2))
            }
            Group::LangGroup => Ok(6),
            Group::AesStatus => Ok(AesStatus::LEVELS),
            Group::LangFam => need(self.fam_vocab.as_ref().map(Vocab::len)),
            Group::Scripts => need(self.script_vocab.as_ref().map(Vocab::len)),
            Group::FeatName => need(self.token_vocab.as_ref().map(Vocab::len)),
            Group::Phylogeny => need(self.phylogeny.as_ref().map(PcaModel::n_components)),
            Group::PosNgrams => need(self.ngrams.as_ref().map(NgramEncoder::width)),
        }
    }

    /// Schema of vectors assembled under `config` with these encoders.
    pub fn schema_for(&self, config: &FeatureConfig) -> Result<FeatureSchema> {
        let mut blocks = Vec::new();
        for g in config.enabled() {
            blocks.push(SchemaBlock {
                name: g.name().to_string(),
                width: self.block_width(g)?,
            });
        }
        let total = blocks.iter().map(|b| b.width).sum();
        let ngram_vocabulary = if config.use_pos_ngrams {
            self.ngrams.as_ref().map_or(0, |n| n.vocab.len())
        } else {
            0
        };
        Ok(FeatureSchema {
            blocks,
            total,
            ngram_vocabulary,
        })
    }

    /// Vector for `(lang, feat_id)` under the fitted config.
    pub fn assemble(&self, lang: &LangCode, feat_id: &str, sources: FeatureSources<'_>) -> Result<Vec<f64>> {
        assemble_vector(lang, feat_id, &self.config, self, sources)
    }

    /// One row per key, in key order.
    pub fn build_matrix(&self, keys: &[RowKey], sources: FeatureSources<'_>) -> Result<Matrix> {
        let rows: Vec<Vec<f64>> = keys
            .par_iter()
            .map(|k| self.assemble(&k.lang, &k.feat_id, sources))
            .collect::<Result<_>>()?;
        if rows.is_empty() {
            return Ok(Matrix::zeros(0, self.schema.total));
        }
        Matrix::from_rows(&rows)
    }
}

fn one_hot<T: Ord + Clone>(vocab: &Vocab<T>, item: Option<&T>, out: &mut Vec<f64>) {
    let start = out.len();
    out.resize(start + vocab.len(), 0.0);
    if let Some(i) = item.and_then(|it| vocab.index(it)) {
        out[start + i] = 1.0;
    }
}

fn n_hot<'a, T: Ord + Clone + 'a>(vocab: &Vocab<T>, items: impl Iterator<Item = &'a T>, out: &mut Vec<f64>) {
    let start = out.len();
    out.resize(start + vocab.len(), 0.0);
    for it in items {
        if let Some(i) = vocab.index(it) {
            out[start + i] = 1.0;
        }
    }
}

/// Concatenates the blocks `config` enables, in schema order. Errors if a
/// block is enabled that `enc` was not fitted for.
pub fn assemble_vector(
    lang: &LangCode,
    feat_id: &str,
    config: &FeatureConfig,
    enc: &FittedEncoders,
    sources: FeatureSources<'_>,
) -> Result<Vec<f64>> {
    let meta = sources.meta.get(lang);
    let mut out = Vec::with_capacity(enc.schema.total);
    for g in config.enabled() {
        match g {
            Group::LangId => {
                let v = enc.lang_vocab.as_ref().ok_or_else(|| FittedEncoders::missing(g))?;
                one_hot(v, Some(lang), &mut out);
            }
            Group::FeatId => {
                let v = enc.feat_vocab.as_ref().ok_or_else(|| FittedEncoders::missing(g))?;
                one_hot(v, Some(&feat_id.to_string()), &mut out);
            }
            Group::GeoLat | Group::GeoLong | Group::WikiSize | Group::NumSpeakers => {
                let s = enc.standardizers.get(&g).ok_or_else(|| FittedEncoders::missing(g))?;
                s.encode(continuous(meta, g), &mut out);
            }
            Group::LangGroup => {
                let start = out.len();
                out.resize(start + 6, 0.0);
                if let Some(c) = meta.and_then(|m| m.lang_group) {
                    out[start + usize::from(c)] = 1.0;
                }
            }
            Group::AesStatus => {
                let start = out.len();
                out.resize(start + AesStatus::LEVELS, 0.0);
                if let Some(a) = meta.and_then(|m| m.aes_status) {
                    out[start + a.slot()] = 1.0;
                }
            }
            Group::LangFam => {
                let v = enc.fam_vocab.as_ref().ok_or_else(|| FittedEncoders::missing(g))?;
                one_hot(v, meta.and_then(|m| m.family.as_ref()), &mut out);
            }
            Group::Scripts => {
                let v = enc.script_vocab.as_ref().ok_or_else(|| FittedEncoders::missing(g))?;
                n_hot(v, meta.into_iter().flat_map(|m| m.scripts.iter()), &mut out);
            }
            Group::FeatName => {
                let v = enc.token_vocab.as_ref().ok_or_else(|| FittedEncoders::missing(g))?;
                let tokens = encode_feat_name(feat_id);
                n_hot(v, tokens.iter(), &mut out);
            }
            Group::Phylogeny => {
                let pca = enc.phylogeny.as_ref().ok_or_else(|| FittedEncoders::missing(g))?;
                let ones = sources.phylogeny.get(lang).map_or(&[][..], PhylogenyVector::ones);
                out.extend(pca.transform_binary(ones));
            }
            Group::PosNgrams => {
                let ng = enc.ngrams.as_ref().ok_or_else(|| FittedEncoders::missing(g))?;
                let k = ng.width() - 1;
                let freqs = sources.ngrams.and_then(|c| normalized_ngrams(c, lang));
                match (freqs, ng.pca.as_ref()) {
                    (Some(f), Some(pca)) => {
                        let entries: Vec<(usize, f64)> = f
                            .iter()
                            .filter_map(|(gram, v)| ng.vocab.index(gram).map(|i| (i, *v)))
                            .collect();
                        out.extend(pca.transform_sparse(&entries));
                        out.push(1.0);
                    }
                    (Some(_), None) => out.push(1.0),
                    (None, _) => {
                        out.extend(std::iter::repeat(0.0).take(k));
                        out.push(0.0);
                    }
                }
            }
        }
    }
    Ok(out)
}
