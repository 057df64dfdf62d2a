use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{read_file, LangCode, Loaded};
use crate::error::{Error, Result};

pub const LANGUAGES_HEADER: [&str; 9] = [
    "iso639_3",
    "family",
    "latitude",
    "longitude",
    "wiki_size",
    "num_speakers",
    "aes_status",
    "lang_group",
    "scripts",
];

/// Script code dropped at load time: its annotation is inconsistent across sources.
pub const BRAILLE: &str = "Brai";

/// Agglomerated Endangerment Status, ordered from extinct (level 1) to not
/// endangered (level 6).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AesStatus {
    Extinct,
    NearlyExtinct,
    Moribund,
    Shifting,
    Threatened,
    NotEndangered,
}

impl AesStatus {
    pub const LEVELS: usize = 6;

    pub const ALL: [AesStatus; 6] = [
        AesStatus::Extinct,
        AesStatus::NearlyExtinct,
        AesStatus::Moribund,
        AesStatus::Shifting,
        AesStatus::Threatened,
        AesStatus::NotEndangered,
    ];

    /// Level on the 1..=6 scale used in `languages.tsv`.
    pub fn level(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_level(level: u8) -> Option<Self> {
        (1..=6)
            .contains(&level)
            .then(|| AesStatus::ALL[usize::from(level - 1)])
    }

    /// Zero-based slot in the one-hot block.
    pub fn slot(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            AesStatus::Extinct => "extinct",
            AesStatus::NearlyExtinct => "nearly_extinct",
            AesStatus::Moribund => "moribund",
            AesStatus::Shifting => "shifting",
            AesStatus::Threatened => "threatened",
            AesStatus::NotEndangered => "not_endangered",
        }
    }
}

impl FromStr for AesStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(level) = s.parse::<u8>() {
            return AesStatus::from_level(level)
                .ok_or_else(|| Error::Validation(format!("aes_status level {level} not in 1..=6")));
        }
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        AesStatus::ALL
            .iter()
            .copied()
            .find(|a| a.name() == norm)
            .ok_or_else(|| Error::Validation(format!("unknown aes_status `{s}`")))
    }
}

impl fmt::Display for AesStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.level())
    }
}

/// Per-language metadata record. `None` marks a missing field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanguageMeta {
    pub code: LangCode,
    pub family: Option<String>,
    pub geo_lat: Option<f64>,
    pub geo_long: Option<f64>,
    pub wiki_size: Option<u64>,
    pub num_speakers: Option<u64>,
    pub aes_status: Option<AesStatus>,
    /// Joshi resource class, 0..=5.
    pub lang_group: Option<u8>,
    pub scripts: BTreeSet<String>,
}

impl LanguageMeta {
    /// A record with every optional field missing.
    pub fn empty(code: LangCode) -> Self {
        LanguageMeta {
            code,
            family: None,
            geo_lat: None,
            geo_long: None,
            wiki_size: None,
            num_speakers: None,
            aes_status: None,
            lang_group: None,
            scripts: BTreeSet::new(),
        }
    }

    /// Renders the record as one `languages.tsv` data line (no newline).
    pub fn to_tsv_line(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(ToString::to_string).unwrap_or_default()
        }
        let scripts: Vec<&str> = self.scripts.iter().map(String::as_str).collect();
        [
            self.code.to_string(),
            self.family.clone().unwrap_or_default(),
            opt(&self.geo_lat),
            opt(&self.geo_long),
            opt(&self.wiki_size),
            opt(&self.num_speakers),
            opt(&self.aes_status),
            opt(&self.lang_group),
            scripts.join(";"),
        ]
        .join("\t")
    }
}

fn is_script_code(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 4 && b[0].is_ascii_uppercase() && b[1..].iter().all(u8::is_ascii_lowercase)
}

pub fn load_language_meta(path: impl AsRef<Path>) -> Result<Loaded<Vec<LanguageMeta>>> {
    let path = path.as_ref();
    let text = read_file(path)?;
    parse_language_meta(&text, &path.display().to_string())
}

/// Parses `languages.tsv` content. `source` names the input in errors.
pub fn parse_language_meta(text: &str, source: &str) -> Result<Loaded<Vec<LanguageMeta>>> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, l)| l.trim_end_matches('\r'))
        .ok_or_else(|| Error::parse(source, 1, "header", "empty file"))?;
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    if cols != LANGUAGES_HEADER {
        return Err(Error::parse(
            source,
            1,
            "header",
            format!("expected `{}`", LANGUAGES_HEADER.join("\\t")),
        ));
    }

    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in lines {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != LANGUAGES_HEADER.len() {
            return Err(Error::parse(
                source,
                lineno,
                "*",
                format!("expected {} fields, found {}", LANGUAGES_HEADER.len(), fields.len()),
            ));
        }
        let err = |col: usize, msg: String| Error::parse(source, lineno, LANGUAGES_HEADER[col], msg);

        let code = LangCode::new(fields[0]).map_err(|e| err(0, e.to_string()))?;
        if !seen.insert(code) {
            return Err(err(0, format!("duplicate language `{code}`")));
        }
        let family = (!fields[1].is_empty()).then(|| fields[1].to_string());

        let parse_f64 = |col: usize, lo: f64, hi: f64| -> Result<Option<f64>> {
            if fields[col].is_empty() {
                return Ok(None);
            }
            let v: f64 = fields[col]
                .parse()
                .map_err(|_| err(col, format!("`{}` is not a number", fields[col])))?;
            if !(lo..=hi).contains(&v) {
                return Err(err(col, format!("{v} outside [{lo}, {hi}]")));
            }
            Ok(Some(v))
        };
        let parse_count = |col: usize| -> Result<Option<u64>> {
            if fields[col].is_empty() {
                return Ok(None);
            }
            fields[col]
                .parse::<u64>()
                .map(Some)
                .map_err(|_| err(col, format!("`{}` is not a non-negative count", fields[col])))
        };

        let geo_lat = parse_f64(2, -90.0, 90.0)?;
        let geo_long = parse_f64(3, -180.0, 180.0)?;
        let wiki_size = parse_count(4)?;
        let num_speakers = parse_count(5)?;
        let aes_status = if fields[6].is_empty() {
            None
        } else {
            Some(fields[6].parse::<AesStatus>().map_err(|e| err(6, e.to_string()))?)
        };
        let lang_group = if fields[7].is_empty() {
            None
        } else {
            let g: u8 = fields[7]
                .parse()
                .map_err(|_| err(7, format!("`{}` is not an integer", fields[7])))?;
            if g > 5 {
                return Err(err(7, format!("lang_group {g} not in 0..=5")));
            }
            Some(g)
        };

        let mut scripts = BTreeSet::new();
        for s in fields[8].split(';').map(str::trim).filter(|s| !s.is_empty()) {
            if !is_script_code(s) {
                return Err(err(8, format!("`{s}` is not an ISO 15924 script code")));
            }
            if s == BRAILLE {
                let msg = format!("{source}:{lineno}: dropped script `{BRAILLE}` for `{code}`");
                log::warn!("{msg}");
                warnings.push(msg);
                continue;
            }
            scripts.insert(s.to_string());
        }

        records.push(LanguageMeta {
            code,
            family,
            geo_lat,
            geo_long,
            wiki_size,
            num_speakers,
            aes_status,
            lang_group,
            scripts,
        });
    }
    Ok(Loaded {
        value: records,
        warnings,
    })
}

/// Renders records as a complete `languages.tsv`.
pub fn write_language_meta(records: &[LanguageMeta]) -> String {
    let mut out = LANGUAGES_HEADER.join("\t");
    out.push('\n');
    for r in records {
        out.push_str(&r.to_tsv_line());
        out.push('\n');
    }
    out
}
