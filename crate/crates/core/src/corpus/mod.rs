//! Input data: language metadata, the typology matrix, phylogeny vectors,
//! POS-tagged corpora and Swadesh lists.
//!
//! Every loader either returns a fully-populated structure or a structured
//! [`Error`](crate::Error) naming the file, line and column; loaded values
//! are immutable afterwards.

mod codes;
mod matrix;
mod meta;
mod phylogeny;
mod pos;

use std::path::Path;

pub use codes::{LangCode, Upos};
pub use matrix::{
    has_target_prefix, load_typology, parse_typology, FeatDescriptor, TargetManifest, TypologyMatrix,
    MISSING_TOKEN,
};
pub use meta::{
    load_language_meta, parse_language_meta, write_language_meta, AesStatus, LanguageMeta, BRAILLE,
    LANGUAGES_HEADER,
};
pub use phylogeny::{load_phylogeny, parse_phylogeny, write_phylogeny, PhylogenyVector, PHYLO_DIM};
pub use pos::{
    load_pos_corpus, load_swadesh, parse_pos_file, parse_swadesh, write_pos_file, write_swadesh, PosCorpus,
    SwadeshEntry, SwadeshList,
};

use crate::error::{Error, Result};

/// A loaded value together with the non-fatal warnings raised while reading it.
#[derive(Clone, Debug)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
