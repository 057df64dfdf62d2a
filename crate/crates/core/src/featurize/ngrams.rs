use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{LangCode, PosCorpus, Upos};

pub const MIN_N: usize = 3;
pub const MAX_N: usize = 5;

/// A POS n-gram packed into a `u32`: the length in the top byte, the tags
/// as base-17 digits below it.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NGram(u32);

impl NGram {
    pub fn new(tags: &[Upos]) -> Self {
        debug_assert!(!tags.is_empty() && tags.len() <= MAX_N);
        let mut v = 0u32;
        for t in tags.iter().rev() {
            v = v * Upos::COUNT as u32 + t.index() as u32;
        }
        NGram(((tags.len() as u32) << 24) | v)
    }

    pub fn len(&self) -> usize {
        (self.0 >> 24) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tags(&self) -> Vec<Upos> {
        let mut v = self.0 & 0x00FF_FFFF;
        (0..self.len())
            .map(|_| {
                let t = Upos::from_index((v % Upos::COUNT as u32) as usize).expect("valid digit");
                v /= Upos::COUNT as u32;
                t
            })
            .collect()
    }
}

impl fmt::Display for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tags: Vec<&str> = self.tags().iter().map(|t| t.as_str()).collect();
        f.write_str(&tags.join(" "))
    }
}

impl fmt::Debug for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NGram({self})")
    }
}

/// Sparse n-gram counts per language plus the union vocabulary.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramCounts {
    pub per_language: BTreeMap<LangCode, BTreeMap<NGram, u32>>,
    pub vocabulary: BTreeSet<NGram>,
}

impl NGramCounts {
    pub fn counts(&self, code: &LangCode) -> Option<&BTreeMap<NGram, u32>> {
        self.per_language.get(code)
    }

    pub fn retain(&mut self, keep: impl Fn(&LangCode) -> bool) {
        self.per_language.retain(|k, _| keep(k));
        self.vocabulary = self.per_language.values().flat_map(|m| m.keys().copied()).collect();
    }
}

/// Counts every contiguous tag window of length 3, 4 and 5 inside each
/// sentence. Windows never cross sentence boundaries.
pub fn extract_pos_ngrams(corpus: &PosCorpus) -> NGramCounts {
    let mut out = NGramCounts::default();
    for (code, sentences) in &corpus.languages {
        let mut counts: BTreeMap<NGram, u32> = BTreeMap::new();
        for sent in sentences {
            for n in MIN_N..=MAX_N {
                for w in sent.windows(n) {
                    *counts.entry(NGram::new(w)).or_insert(0) += 1;
                }
            }
        }
        out.vocabulary.extend(counts.keys().copied());
        out.per_language.insert(*code, counts);
    }
    out
}

/// `_`-separated pieces of a feature id.
pub fn encode_feat_name(feat_id: &str) -> BTreeSet<String> {
    feat_id
        .split('_')
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}
