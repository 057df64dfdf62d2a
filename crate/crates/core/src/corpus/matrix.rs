use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, LangCode};
use crate::error::{Error, Result};

/// Cell sentinel for an unobserved value in `typology.csv`.
pub const MISSING_TOKEN: &str = "--";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatDescriptor {
    pub feat_id: String,
    pub is_target: bool,
}

/// The set of feature ids treated as prediction targets (`targets.txt`).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TargetManifest(BTreeSet<String>);

impl TargetManifest {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(ids: I) -> Self {
        TargetManifest(ids.into_iter().map(Into::into).collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = read_file(path.as_ref())?;
        Ok(Self::parse(&text))
    }

    /// One id per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Self {
        TargetManifest(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect(),
        )
    }

    pub fn contains(&self, feat_id: &str) -> bool {
        self.0.contains(feat_id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|id| format!("{id}\n")).collect()
    }
}

/// Syntax (`S_`) and phonology (`P_`) ids are target candidates.
pub fn has_target_prefix(feat_id: &str) -> bool {
    feat_id.starts_with("S_") || feat_id.starts_with("P_")
}

/// Languages × features grid of `{0, 1, missing}` cells, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TypologyMatrix {
    languages: Vec<LangCode>,
    features: Vec<FeatDescriptor>,
    cells: Vec<Option<bool>>,
    lang_index: HashMap<LangCode, usize>,
    feat_index: HashMap<String, usize>,
}

impl TypologyMatrix {
    pub fn new(
        languages: Vec<LangCode>,
        features: Vec<FeatDescriptor>,
        cells: Vec<Option<bool>>,
    ) -> Result<Self> {
        if cells.len() != languages.len() * features.len() {
            return Err(Error::Validation(format!(
                "{} cells for a {}x{} matrix",
                cells.len(),
                languages.len(),
                features.len()
            )));
        }
        let mut lang_index = HashMap::with_capacity(languages.len());
        for (i, l) in languages.iter().enumerate() {
            if lang_index.insert(*l, i).is_some() {
                return Err(Error::Validation(format!("duplicate language `{l}`")));
            }
        }
        let mut feat_index = HashMap::with_capacity(features.len());
        for (j, f) in features.iter().enumerate() {
            if f.feat_id.is_empty() {
                return Err(Error::Validation("empty feature id".into()));
            }
            if feat_index.insert(f.feat_id.clone(), j).is_some() {
                return Err(Error::Validation(format!("duplicate feature `{}`", f.feat_id)));
            }
        }
        Ok(TypologyMatrix {
            languages,
            features,
            cells,
            lang_index,
            feat_index,
        })
    }

    pub fn languages(&self) -> &[LangCode] {
        &self.languages
    }

    pub fn features(&self) -> &[FeatDescriptor] {
        &self.features
    }

    pub fn n_langs(&self) -> usize {
        self.languages.len()
    }

    pub fn n_feats(&self) -> usize {
        self.features.len()
    }

    pub fn lang_idx(&self, code: &LangCode) -> Option<usize> {
        self.lang_index.get(code).copied()
    }

    pub fn feat_idx(&self, feat_id: &str) -> Option<usize> {
        self.feat_index.get(feat_id).copied()
    }

    pub fn get(&self, lang: usize, feat: usize) -> Option<bool> {
        self.cells[lang * self.features.len() + feat]
    }

    pub fn set(&mut self, lang: usize, feat: usize, value: Option<bool>) {
        let n = self.features.len();
        self.cells[lang * n + feat] = value;
    }

    pub fn row(&self, lang: usize) -> &[Option<bool>] {
        let n = self.features.len();
        &self.cells[lang * n..(lang + 1) * n]
    }

    pub fn target_indices(&self) -> Vec<usize> {
        (0..self.features.len())
            .filter(|&j| self.features[j].is_target)
            .collect()
    }

    pub fn observed_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Observed cells over all cells; 0 for an empty matrix.
    pub fn observed_fraction(&self) -> f64 {
        if self.cells.is_empty() {
            0.0
        } else {
            self.observed_count() as f64 / self.cells.len() as f64
        }
    }

    /// Languages (row indices) whose cell for `feat` is observed.
    pub fn present_langs(&self, feat: usize) -> Vec<usize> {
        (0..self.languages.len())
            .filter(|&i| self.get(i, feat).is_some())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iso639_3");
        for f in &self.features {
            out.push(',');
            out.push_str(&f.feat_id);
        }
        out.push('\n');
        for (i, l) in self.languages.iter().enumerate() {
            out.push_str(l.as_str());
            for c in self.row(i) {
                out.push(',');
                out.push_str(match c {
                    Some(true) => "1",
                    Some(false) => "0",
                    None => MISSING_TOKEN,
                });
            }
            out.push('\n');
        }
        out
    }
}

/// Loads `typology.csv`. With no manifest, every `S_`/`P_` feature is a target.
pub fn load_typology(path: impl AsRef<Path>, targets: Option<&TargetManifest>) -> Result<TypologyMatrix> {
    let path = path.as_ref();
    let text = read_file(path)?;
    parse_typology(&text, &path.display().to_string(), targets)
}

pub fn parse_typology(
    text: &str,
    source: &str,
    targets: Option<&TargetManifest>,
) -> Result<TypologyMatrix> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, l)| l.trim_end_matches('\r'))
        .ok_or_else(|| Error::parse(source, 1, "header", "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"iso639_3") {
        return Err(Error::parse(source, 1, "header", "first column must be `iso639_3`"));
    }
    let mut features = Vec::with_capacity(cols.len() - 1);
    let mut seen = BTreeSet::new();
    for id in &cols[1..] {
        if id.is_empty() {
            return Err(Error::parse(source, 1, "header", "empty feature id"));
        }
        if !seen.insert(*id) {
            return Err(Error::parse(source, 1, *id, "duplicate feature column"));
        }
        let is_target = has_target_prefix(id) && targets.map_or(true, |m| m.contains(id));
        features.push(FeatDescriptor {
            feat_id: id.to_string(),
            is_target,
        });
    }

    let mut languages = Vec::new();
    let mut cells = Vec::new();
    let mut langs_seen = BTreeSet::new();
    for (i, raw) in lines {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::parse(
                source,
                lineno,
                "*",
                format!("expected {} fields, found {}", cols.len(), fields.len()),
            ));
        }
        let code = LangCode::new(fields[0]).map_err(|e| Error::parse(source, lineno, "iso639_3", e.to_string()))?;
        if !langs_seen.insert(code) {
            return Err(Error::parse(source, lineno, "iso639_3", format!("duplicate language row `{code}`")));
        }
        languages.push(code);
        for (j, cell) in fields[1..].iter().enumerate() {
            cells.push(match *cell {
                "1" => Some(true),
                "0" => Some(false),
                MISSING_TOKEN => None,
                other => {
                    return Err(Error::parse(
                        source,
                        lineno,
                        cols[j + 1],
                        format!("cell `{other}` not in {{0, 1, --}}"),
                    ))
                }
            });
        }
    }
    TypologyMatrix::new(languages, features, cells)
}
