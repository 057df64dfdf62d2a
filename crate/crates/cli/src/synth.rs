//! Synthetic input sets with a known ground-truth mechanism.
//!
//! Every scenario writes the full set of input files. Metadata, phylogeny,
//! corpora and tagger statistics are always generated; the scenario decides
//! how typology values and their missingness arise.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use typofill::corpus::{
    write_language_meta, write_phylogeny, write_pos_file, write_swadesh, AesStatus, FeatDescriptor, LangCode,
    LanguageMeta, PhylogenyVector, PosCorpus, SwadeshEntry, SwadeshList, TargetManifest, TypologyMatrix, Upos,
    PHYLO_DIM,
};
use typofill::posquality::{write_gold_recall, write_pos_stats, PosStats};
use typofill::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// The planted feature is 1 exactly for the first half of the families.
    FamDetermined,
    /// Every target cell of a language is missing iff its wiki size is
    /// below one global threshold.
    WikiMissingness,
    /// All values are independent coin flips.
    IidNoise,
    /// The planted feature is 1 iff the language's corpus was generated
    /// from verb-final sentence templates.
    PosOrder,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::FamDetermined,
        Scenario::WikiMissingness,
        Scenario::IidNoise,
        Scenario::PosOrder,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::FamDetermined => "fam_determined",
            Scenario::WikiMissingness => "wiki_missingness",
            Scenario::IidNoise => "iid_noise",
            Scenario::PosOrder => "pos_order",
        }
    }

    fn planted(self) -> bool {
        matches!(self, Scenario::FamDetermined | Scenario::PosOrder)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match Scenario::ALL.iter().find(|sc| sc.as_str() == s) {
            Some(sc) => Ok(*sc),
            None => bail!(
                "unknown scenario `{s}` (expected one of: {})",
                Scenario::ALL.map(Scenario::as_str).join(", ")
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub scenario: Scenario,
    pub n_langs: usize,
    pub n_feats: usize,
    pub seed: u64,
    /// Fraction of observed cells (exact up to rounding). In
    /// `wiki_missingness`, the fraction of languages above the threshold.
    pub observed: f64,
    /// Probability that a non-planted value is 1.
    pub base_rate: f64,
    pub n_families: usize,
    pub sentences: usize,
}

impl SynthParams {
    pub fn new(scenario: Scenario, n_langs: usize, n_feats: usize, seed: u64) -> Self {
        SynthParams {
            scenario,
            n_langs,
            n_feats,
            seed,
            observed: 0.8,
            base_rate: if scenario == Scenario::IidNoise { 0.7 } else { 0.5 },
            n_families: 4,
            sentences: 40,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_langs < 10 {
            bail!("synthetic sets need at least 10 languages, got {}", self.n_langs);
        }
        if self.n_feats < 1 {
            bail!("synthetic sets need at least one feature");
        }
        if !(self.observed > 0.0 && self.observed <= 1.0) {
            bail!("observed fraction must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.base_rate) {
            bail!("base rate must lie in [0, 1]");
        }
        if self.n_families < 2 {
            bail!("need at least two families");
        }
        if self.sentences == 0 {
            bail!("need at least one sentence per language");
        }
        Ok(())
    }
}

/// The ground truth written to `synth.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub params: SynthParams,
    pub mechanism: String,
    pub planted_feature: Option<String>,
    /// `log10(wiki_size)` cut used by `wiki_missingness`.
    pub wiki_log10_threshold: Option<f64>,
    pub observed_fraction: f64,
}

pub struct SynthDataset {
    pub meta: Vec<LanguageMeta>,
    pub matrix: TypologyMatrix,
    pub phylogeny: Vec<PhylogenyVector>,
    pub corpus: PosCorpus,
    pub swadesh: SwadeshList,
    pub targets: TargetManifest,
    pub pos_stats: BTreeMap<LangCode, PosStats>,
    pub gold_recall: BTreeMap<LangCode, f64>,
    pub truth: SynthTruth,
}

mod streams {
    pub const META: u64 = 101;
    pub const VALUES: u64 = 102;
    pub const OBSERVED: u64 = 103;
    pub const CORPUS: u64 = 104;
    pub const TAGGER: u64 = 105;
    pub const PHYLO: u64 = 106;
}

fn rng(master: u64, stream: u64) -> ChaCha8Rng {
    seed::rng(seed::child(master, stream, 0))
}

/// `aaa`, `aab`, ... skipping `eng`, which the Swadesh list reserves.
pub fn lang_codes(n: usize) -> Vec<LangCode> {
    (0..)
        .map(|i: usize| {
            let b = [b'a' + (i / 676 % 26) as u8, b'a' + (i / 26 % 26) as u8, b'a' + (i % 26) as u8];
            LangCode::new(std::str::from_utf8(&b).expect("ascii")).expect("valid code")
        })
        .filter(|c| c.as_str() != "eng")
        .take(n)
        .collect()
}

pub fn feature_ids(n: usize) -> Vec<String> {
    let width = (n.saturating_sub(1)).to_string().len().max(2);
    (0..n).map(|j| format!("S_F{j:0width$}")).collect()
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn sentence(rng: &mut ChaCha8Rng, verb_final: bool) -> Vec<Upos> {
    use Upos::*;
    let np = |rng: &mut ChaCha8Rng| {
        let mut v = Vec::new();
        if rng.gen_bool(0.4) {
            v.push(Det);
        }
        if rng.gen_bool(0.2) {
            v.push(Adj);
        }
        v.push(if rng.gen_bool(0.2) { Pron } else { Noun });
        v
    };
    let mut s = np(rng);
    if verb_final {
        s.extend(np(rng));
        if rng.gen_bool(0.2) {
            s.push(Adv);
        }
        s.push(Verb);
    } else {
        s.push(Verb);
        s.extend(np(rng));
        if rng.gen_bool(0.2) {
            s.push(Adv);
        }
    }
    if rng.gen_bool(0.2) {
        s.extend([Adp, Noun]);
    }
    s.push(Punct);
    s
}

const SWADESH_TAGS: [Upos; 8] = [
    Upos::Pron,
    Upos::Noun,
    Upos::Verb,
    Upos::Adj,
    Upos::Num,
    Upos::Adv,
    Upos::Noun,
    Upos::Verb,
];
const SWADESH_CONCEPTS: usize = 24;

pub fn generate(p: &SynthParams) -> Result<SynthDataset> {
    p.validate()?;
    let codes = lang_codes(p.n_langs);
    let feats = feature_ids(p.n_feats);
    let n = p.n_langs;

    // Families: balanced assignment over a seeded permutation.
    let mut meta_rng = rng(p.seed, streams::META);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut meta_rng);
    let mut family = vec![0usize; n];
    for (rank, &l) in order.iter().enumerate() {
        family[l] = rank % p.n_families;
    }
    let scripts = ["Latn", "Cyrl", "Arab", "Deva"];
    let mut meta = Vec::with_capacity(n);
    for (l, code) in codes.iter().enumerate() {
        let mut m = LanguageMeta::empty(*code);
        m.family = Some(format!("Family{}", family[l]));
        m.geo_lat = Some(round4(meta_rng.gen_range(-60.0..70.0)));
        m.geo_long = Some(round4(meta_rng.gen_range(-180.0..180.0)));
        m.wiki_size = Some(10f64.powf(meta_rng.gen_range(0.0..6.0)).floor() as u64);
        m.num_speakers = Some(10f64.powf(meta_rng.gen_range(2.0..8.0)).floor() as u64);
        m.aes_status = AesStatus::from_level(meta_rng.gen_range(1..=6));
        m.lang_group = Some(meta_rng.gen_range(0..=5));
        m.scripts.insert(scripts[meta_rng.gen_range(0..scripts.len())].to_string());
        if meta_rng.gen_bool(0.2) {
            m.scripts.insert(scripts[meta_rng.gen_range(0..scripts.len())].to_string());
        }
        meta.push(m);
    }

    // Phylogeny: family bit, one of three sub-branch bits, and a leaf bit.
    let mut phylo_rng = rng(p.seed, streams::PHYLO);
    let mut phylogeny = Vec::with_capacity(n);
    for (l, code) in codes.iter().enumerate() {
        let f = family[l];
        let mut ones = vec![f as u32, (100 + f * 10 + phylo_rng.gen_range(0..3)) as u32];
        let leaf = 1000 + l;
        if leaf < PHYLO_DIM {
            ones.push(leaf as u32);
        }
        phylogeny.push(PhylogenyVector::new(*code, ones)?);
    }

    // Word order drives the corpora in every scenario; only pos_order
    // ties it to a typology value.
    let mut corpus_rng = rng(p.seed, streams::CORPUS);
    let verb_final: Vec<bool> = (0..n).map(|_| corpus_rng.gen_bool(0.5)).collect();
    let mut corpus = PosCorpus::default();
    for (l, code) in codes.iter().enumerate() {
        let sents = (0..p.sentences).map(|_| sentence(&mut corpus_rng, verb_final[l])).collect();
        corpus.languages.insert(*code, sents);
    }

    // Values.
    let mut val_rng = rng(p.seed, streams::VALUES);
    let half = p.n_families / 2;
    let mut values = vec![false; n * p.n_feats];
    for l in 0..n {
        for f in 0..p.n_feats {
            values[l * p.n_feats + f] = match (p.scenario, f) {
                (Scenario::FamDetermined, 0) => family[l] < half,
                (Scenario::PosOrder, 0) => verb_final[l],
                _ => val_rng.gen_bool(p.base_rate),
            };
        }
    }

    // Observation.
    let total = n * p.n_feats;
    let mut observed = vec![false; total];
    let mut wiki_threshold = None;
    let mut obs_rng = rng(p.seed, streams::OBSERVED);
    if p.scenario == Scenario::WikiMissingness {
        let n_present = ((p.observed * n as f64).round() as usize).clamp(1, n);
        let mut by_wiki: Vec<(f64, usize)> = meta
            .iter()
            .enumerate()
            .map(|(l, m)| ((m.wiki_size.unwrap_or(0) as f64).max(1.0).log10(), l))
            .collect();
        by_wiki.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let cut = n - n_present;
        // Nudge wiki sizes so the cut is strict even if sizes tie.
        let t = if cut == 0 {
            by_wiki[0].0 - 0.5
        } else {
            let (lo, hi) = (by_wiki[cut - 1].0, by_wiki[cut].0);
            if hi > lo {
                (lo + hi) / 2.0
            } else {
                lo + 1e-6
            }
        };
        for (rank, &(_, l)) in by_wiki.iter().enumerate() {
            if rank >= cut {
                let size = meta[l].wiki_size.unwrap_or(0).max(1) as f64;
                if size.log10() <= t {
                    meta[l].wiki_size = Some(10f64.powf(t).ceil() as u64 + 1);
                }
                for f in 0..p.n_feats {
                    observed[l * p.n_feats + f] = true;
                }
            } else if meta[l].wiki_size.is_some_and(|w| (w.max(1) as f64).log10() > t) {
                meta[l].wiki_size = Some(10f64.powf(t).floor() as u64);
            }
        }
        wiki_threshold = Some(t);
    } else {
        let k = ((p.observed * total as f64).round() as usize).min(total);
        for i in sample(&mut obs_rng, total, k) {
            observed[i] = true;
        }
    }
    let cells: Vec<Option<bool>> = (0..total).map(|i| observed[i].then_some(values[i])).collect();
    let descriptors = feats
        .iter()
        .map(|f| FeatDescriptor {
            feat_id: f.clone(),
            is_target: true,
        })
        .collect();
    let matrix = TypologyMatrix::new(codes.clone(), descriptors, cells)?;
    let targets = TargetManifest::new(feats.iter().cloned());

    // Tagger statistics and Swadesh agreement tied to gold recall.
    let mut tag_rng = rng(p.seed, streams::TAGGER);
    let eng = LangCode::new("eng")?;
    let mut swadesh = SwadeshList::default();
    for c in 0..SWADESH_CONCEPTS {
        swadesh.entries.push(SwadeshEntry {
            concept_id: format!("c{c:02}"),
            code: eng,
            word: format!("en{c}"),
            english_upos: SWADESH_TAGS[c % SWADESH_TAGS.len()],
        });
    }
    let mut pos_stats = BTreeMap::new();
    let mut gold_recall = BTreeMap::new();
    for code in &codes {
        let pct_unk = round4(tag_rng.gen_range(0.0..60.0));
        let recall = round4(100.0 - pct_unk);
        let conf = round4((0.5 + 0.5 * recall / 100.0 + tag_rng.gen_range(-0.05..0.05)).clamp(0.0, 1.0));
        pos_stats.insert(
            *code,
            PosStats {
                avg_confidence: conf,
                pct_unk,
                avg_len_subwords: round4(tag_rng.gen_range(1.2..3.0)),
                avg_len_chars: round4(tag_rng.gen_range(3.0..9.0)),
            },
        );
        gold_recall.insert(*code, recall);
        for c in 0..SWADESH_CONCEPTS {
            let english = SWADESH_TAGS[c % SWADESH_TAGS.len()];
            let tag = if tag_rng.gen_bool(recall / 100.0) {
                english
            } else {
                Upos::ALL[tag_rng.gen_range(0..Upos::COUNT)]
            };
            swadesh.entries.push(SwadeshEntry {
                concept_id: format!("c{c:02}"),
                code: *code,
                word: format!("{code}{c}"),
                english_upos: tag,
            });
        }
    }

    let planted_feature = p.scenario.planted().then(|| feats[0].clone());
    let mechanism = match p.scenario {
        Scenario::FamDetermined => format!(
            "{} = 1 iff family index < {half} of {}; other values Bernoulli({}); cells observed uniformly at random",
            feats[0], p.n_families, p.base_rate
        ),
        Scenario::WikiMissingness => format!(
            "a language's cells are all present iff log10(wiki_size) > {:.6}; values Bernoulli({})",
            wiki_threshold.unwrap_or(0.0),
            p.base_rate
        ),
        Scenario::IidNoise => format!(
            "values Bernoulli({}); cells observed uniformly at random",
            p.base_rate
        ),
        Scenario::PosOrder => format!(
            "{} = 1 iff the corpus uses verb-final templates; other values Bernoulli({}); cells observed uniformly at random",
            feats[0], p.base_rate
        ),
    };
    let observed_fraction = matrix.observed_fraction();
    Ok(SynthDataset {
        meta,
        matrix,
        phylogeny,
        corpus,
        swadesh,
        targets,
        pos_stats,
        gold_recall,
        truth: SynthTruth {
            params: p.clone(),
            mechanism,
            planted_feature,
            wiki_log10_threshold: wiki_threshold,
            observed_fraction,
        },
    })
}

fn write(path: &Path, text: &str) -> Result<PathBuf> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path.to_path_buf())
}

/// Writes every input file into `dir` and returns the paths written.
/// Stale `.pos` files in `dir/pos` are removed first.
pub fn write_dataset(d: &SynthDataset, dir: &Path) -> Result<Vec<PathBuf>> {
    let pos_dir = dir.join("pos");
    std::fs::create_dir_all(&pos_dir).with_context(|| format!("creating {}", pos_dir.display()))?;
    for entry in std::fs::read_dir(&pos_dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "pos") {
            std::fs::remove_file(&path)?;
        }
    }
    let mut out = vec![
        write(&dir.join("languages.tsv"), &write_language_meta(&d.meta))?,
        write(&dir.join("typology.csv"), &d.matrix.to_csv())?,
        write(&dir.join("phylogeny.txt"), &write_phylogeny(&d.phylogeny))?,
        write(&dir.join("swadesh.tsv"), &write_swadesh(&d.swadesh))?,
        write(&dir.join("targets.txt"), &d.targets.to_text())?,
        write(&dir.join("pos_stats.tsv"), &write_pos_stats(&d.pos_stats))?,
        write(&dir.join("gold_recall.tsv"), &write_gold_recall(&d.gold_recall))?,
        write(&dir.join("synth.json"), &(serde_json::to_string_pretty(&d.truth)? + "\n"))?,
    ];
    let codes: BTreeSet<&LangCode> = d.corpus.languages.keys().collect();
    for code in codes {
        let sents = &d.corpus.languages[code];
        out.push(write(&pos_dir.join(format!("{code}.pos")), &write_pos_file(sents))?);
    }
    Ok(out)
}
