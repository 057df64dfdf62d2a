use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, LangCode, Loaded, Upos};
use crate::error::{Error, Result};

/// Tagged sentences per language. Languages without a file have no entry.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosCorpus {
    pub languages: BTreeMap<LangCode, Vec<Vec<Upos>>>,
}

impl PosCorpus {
    pub fn sentences(&self, code: &LangCode) -> Option<&[Vec<Upos>]> {
        self.languages.get(code).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.languages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.languages.is_empty()
    }

    pub fn retain(&mut self, keep: impl Fn(&LangCode) -> bool) {
        self.languages.retain(|k, _| keep(k));
    }
}

/// Parses one `<iso>.pos` file body: a sentence per line, space-separated tags.
pub fn parse_pos_file(text: &str, source: &str) -> Result<Vec<Vec<Upos>>> {
    let mut sentences = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut sent = Vec::new();
        for (t, tok) in line.split_whitespace().enumerate() {
            let tag = tok.parse::<Upos>().map_err(|_| {
                Error::parse(source, i + 1, format!("token {}", t + 1), format!("unknown UPOS tag `{tok}`"))
            })?;
            sent.push(tag);
        }
        if !sent.is_empty() {
            sentences.push(sent);
        }
    }
    Ok(sentences)
}

/// Reads every `*.pos` file in `dir`. Files whose stem is not a valid
/// language code are skipped with a warning.
pub fn load_pos_corpus(dir: impl AsRef<Path>) -> Result<Loaded<PosCorpus>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "pos") {
            paths.push(path);
        }
    }
    paths.sort();

    let mut corpus = PosCorpus::default();
    let mut warnings = Vec::new();
    for path in paths {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let Ok(code) = LangCode::new(stem) else {
            let msg = format!("skipping {}: `{stem}` is not an ISO 639-3 code", path.display());
            log::warn!("{msg}");
            warnings.push(msg);
            continue;
        };
        let text = read_file(&path)?;
        let sentences = parse_pos_file(&text, &path.display().to_string())?;
        corpus.languages.insert(code, sentences);
    }
    Ok(Loaded {
        value: corpus,
        warnings,
    })
}

pub fn write_pos_file(sentences: &[Vec<Upos>]) -> String {
    let mut out = String::new();
    for s in sentences {
        let tags: Vec<&str> = s.iter().map(|t| t.as_str()).collect();
        out.push_str(&tags.join(" "));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwadeshEntry {
    pub concept_id: String,
    pub code: LangCode,
    pub word: String,
    /// UPOS tag of `word`, comparable with the English entry of the same concept.
    pub english_upos: Upos,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwadeshList {
    pub entries: Vec<SwadeshEntry>,
}

const SWADESH_HEADER: [&str; 4] = ["concept_id", "iso639_3", "word", "english_upos"];

pub fn load_swadesh(path: impl AsRef<Path>) -> Result<SwadeshList> {
    let path = path.as_ref();
    parse_swadesh(&read_file(path)?, &path.display().to_string())
}

/// `concept_id<TAB>iso639_3<TAB>word<TAB>english_upos`, optional header line.
pub fn parse_swadesh(text: &str, source: &str) -> Result<SwadeshList> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if i == 0 && fields == SWADESH_HEADER {
            continue;
        }
        if fields.len() != 4 {
            return Err(Error::parse(source, lineno, "*", format!("expected 4 fields, found {}", fields.len())));
        }
        for (col, name) in [(0, "concept_id"), (2, "word")] {
            if fields[col].is_empty() {
                return Err(Error::parse(source, lineno, name, "empty field"));
            }
        }
        let code = LangCode::new(fields[1]).map_err(|e| Error::parse(source, lineno, "iso639_3", e.to_string()))?;
        let english_upos = fields[3]
            .parse::<Upos>()
            .map_err(|e| Error::parse(source, lineno, "english_upos", e.to_string()))?;
        entries.push(SwadeshEntry {
            concept_id: fields[0].to_string(),
            code,
            word: fields[2].to_string(),
            english_upos,
        });
    }
    Ok(SwadeshList { entries })
}

pub fn write_swadesh(list: &SwadeshList) -> String {
    let mut out = SWADESH_HEADER.join("\t");
    out.push('\n');
    for e in &list.entries {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", e.concept_id, e.code, e.word, e.english_upos));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sentence_of_three() {
        let s = parse_pos_file("DET NOUN VERB\n\n", "deu.pos").unwrap();
        assert_eq!(s, vec![vec![Upos::Det, Upos::Noun, Upos::Verb]]);
    }

    #[test]
    fn unknown_tag_is_located() {
        let err = parse_pos_file("DET NOUN\nDET NOUNN\n", "deu.pos").unwrap_err();
        match err {
            Error::Parse { file, line, column, .. } => {
                assert_eq!(file, "deu.pos");
                assert_eq!(line, 2);
                assert_eq!(column, "token 2");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn swadesh_parse() {
        let list = parse_swadesh(
            "concept_id\tiso639_3\tword\tenglish_upos\n1\teng\tI\tPRON\n1\tdeu\tich\tPRON\n",
            "s",
        )
        .unwrap();
        assert_eq!(list.entries.len(), 2);
        assert!(parse_swadesh("1\teng\t\tPRON\n", "s").is_err());
        assert!(parse_swadesh("1\teng\tI\tPRONOUN\n", "s").is_err());
    }
}
