use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, LangCode};
use crate::error::{Error, Result};

/// Width of the family-membership vector.
pub const PHYLO_DIM: usize = 3719;

/// Sparse binary family-membership vector: the positions holding a 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhylogenyVector {
    pub code: LangCode,
    ones: Vec<u32>,
}

impl PhylogenyVector {
    /// Sorts `ones`; rejects duplicates and positions `>= PHYLO_DIM`.
    pub fn new(code: LangCode, mut ones: Vec<u32>) -> Result<Self> {
        ones.sort_unstable();
        if let Some(&bad) = ones.iter().find(|&&i| i as usize >= PHYLO_DIM) {
            return Err(Error::Validation(format!("phylogeny index {bad} >= {PHYLO_DIM}")));
        }
        if ones.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("duplicate phylogeny index for `{code}`")));
        }
        Ok(PhylogenyVector { code, ones })
    }

    pub fn ones(&self) -> &[u32] {
        &self.ones
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; PHYLO_DIM];
        for &i in &self.ones {
            v[i as usize] = 1.0;
        }
        v
    }
}

pub fn load_phylogeny(path: impl AsRef<Path>) -> Result<BTreeMap<LangCode, PhylogenyVector>> {
    let path = path.as_ref();
    parse_phylogeny(&read_file(path)?, &path.display().to_string())
}

/// Lines `iso639_3<TAB>i,j,k` listing the 0-based positions of the ones.
pub fn parse_phylogeny(text: &str, source: &str) -> Result<BTreeMap<LangCode, PhylogenyVector>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (code, rest) = line.split_once('\t').unwrap_or((line, ""));
        let code = LangCode::new(code.trim()).map_err(|e| Error::parse(source, lineno, "iso639_3", e.to_string()))?;
        let ones = rest
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<u32>()
                    .map_err(|_| Error::parse(source, lineno, "indices", format!("`{s}` is not an index")))
            })
            .collect::<Result<Vec<_>>>()?;
        let v = PhylogenyVector::new(code, ones).map_err(|e| Error::parse(source, lineno, "indices", e.to_string()))?;
        if out.insert(code, v).is_some() {
            return Err(Error::parse(source, lineno, "iso639_3", format!("duplicate language `{code}`")));
        }
    }
    Ok(out)
}

pub fn write_phylogeny<'a>(vectors: impl IntoIterator<Item = &'a PhylogenyVector>) -> String {
    let mut out = String::new();
    for v in vectors {
        let idx: Vec<String> = v.ones.iter().map(u32::to_string).collect();
        out.push_str(&format!("{}\t{}\n", v.code, idx.join(",")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_densify() {
        let m = parse_phylogeny("eng\t5,2,3718\nfra\t\n", "p").unwrap();
        let eng = &m[&LangCode::new("eng").unwrap()];
        assert_eq!(eng.ones(), &[2, 5, 3718]);
        let d = eng.to_dense();
        assert_eq!(d.len(), PHYLO_DIM);
        assert_eq!(d.iter().sum::<f64>(), 3.0);
        assert!(m[&LangCode::new("fra").unwrap()].ones().is_empty());
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(parse_phylogeny("eng\t3719\n", "p").is_err());
        assert!(parse_phylogeny("eng\t1,1\n", "p").is_err());
    }
}
