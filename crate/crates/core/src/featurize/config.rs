use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::PHYLO_DIM;
use crate::error::{Error, Result};

/// Selectable feature groups, in vector (schema) order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    LangId,
    FeatId,
    GeoLat,
    GeoLong,
    LangGroup,
    AesStatus,
    WikiSize,
    NumSpeakers,
    LangFam,
    Scripts,
    FeatName,
    Phylogeny,
    PosNgrams,
}

impl Group {
    pub const ALL: [Group; 13] = [
        Group::LangId,
        Group::FeatId,
        Group::GeoLat,
        Group::GeoLong,
        Group::LangGroup,
        Group::AesStatus,
        Group::WikiSize,
        Group::NumSpeakers,
        Group::LangFam,
        Group::Scripts,
        Group::FeatName,
        Group::Phylogeny,
        Group::PosNgrams,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::LangId => "lang_id",
            Group::FeatId => "feat_id",
            Group::GeoLat => "geo_lat",
            Group::GeoLong => "geo_long",
            Group::LangGroup => "lang_group",
            Group::AesStatus => "aes_status",
            Group::WikiSize => "wiki_size",
            Group::NumSpeakers => "num_speakers",
            Group::LangFam => "lang_fam",
            Group::Scripts => "scripts",
            Group::FeatName => "feat_name",
            Group::Phylogeny => "phylogeny",
            Group::PosNgrams => "pos_ngrams",
        }
    }

    /// Groups derived from text; excluded from the presence classifier.
    pub fn is_textual(self) -> bool {
        self == Group::PosNgrams
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Group::ALL
            .iter()
            .copied()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature group `{s}`")))
    }
}

/// Which feature groups are active, plus the PCA widths of the two
/// projected groups.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub use_lang_id: bool,
    pub use_feat_id: bool,
    pub use_geo_lat: bool,
    pub use_geo_long: bool,
    pub use_lang_group: bool,
    pub use_aes_status: bool,
    pub use_wiki_size: bool,
    pub use_num_speakers: bool,
    pub use_lang_fam: bool,
    pub use_scripts: bool,
    pub use_feat_name: bool,
    pub use_phylogeny: bool,
    pub use_pos_ngrams: bool,
    pub phylo_n_comp: usize,
    pub ngram_n_comp: usize,
}

impl FeatureConfig {
    pub fn none() -> Self {
        FeatureConfig {
            use_lang_id: false,
            use_feat_id: false,
            use_geo_lat: false,
            use_geo_long: false,
            use_lang_group: false,
            use_aes_status: false,
            use_wiki_size: false,
            use_num_speakers: false,
            use_lang_fam: false,
            use_scripts: false,
            use_feat_name: false,
            use_phylogeny: false,
            use_pos_ngrams: false,
            phylo_n_comp: 16,
            ngram_n_comp: 16,
        }
    }

    pub fn all() -> Self {
        let mut c = Self::none();
        for g in Group::ALL {
            c.set(g, true);
        }
        c
    }

    pub fn only(groups: &[Group]) -> Self {
        let mut c = Self::none();
        for &g in groups {
            c.set(g, true);
        }
        c
    }

    pub fn get(&self, g: Group) -> bool {
        match g {
            Group::LangId => self.use_lang_id,
            Group::FeatId => self.use_feat_id,
            Group::GeoLat => self.use_geo_lat,
            Group::GeoLong => self.use_geo_long,
            Group::LangGroup => self.use_lang_group,
            Group::AesStatus => self.use_aes_status,
            Group::WikiSize => self.use_wiki_size,
            Group::NumSpeakers => self.use_num_speakers,
            Group::LangFam => self.use_lang_fam,
            Group::Scripts => self.use_scripts,
            Group::FeatName => self.use_feat_name,
            Group::Phylogeny => self.use_phylogeny,
            Group::PosNgrams => self.use_pos_ngrams,
        }
    }

    pub fn set(&mut self, g: Group, on: bool) {
        let f = match g {
            Group::LangId => &mut self.use_lang_id,
            Group::FeatId => &mut self.use_feat_id,
            Group::GeoLat => &mut self.use_geo_lat,
            Group::GeoLong => &mut self.use_geo_long,
            Group::LangGroup => &mut self.use_lang_group,
            Group::AesStatus => &mut self.use_aes_status,
            Group::WikiSize => &mut self.use_wiki_size,
            Group::NumSpeakers => &mut self.use_num_speakers,
            Group::LangFam => &mut self.use_lang_fam,
            Group::Scripts => &mut self.use_scripts,
            Group::FeatName => &mut self.use_feat_name,
            Group::Phylogeny => &mut self.use_phylogeny,
            Group::PosNgrams => &mut self.use_pos_ngrams,
        };
        *f = on;
    }

    pub fn enabled(&self) -> impl Iterator<Item = Group> + '_ {
        Group::ALL.into_iter().filter(|&g| self.get(g))
    }

    pub fn any_enabled(&self) -> bool {
        self.enabled().next().is_some()
    }

    /// Component counts must be >= 1 and the phylogeny count at most its width.
    pub fn validate(&self) -> Result<()> {
        if self.phylo_n_comp == 0 || self.phylo_n_comp > PHYLO_DIM {
            return Err(Error::InvalidArgument(format!(
                "phylo_n_comp = {} outside 1..={PHYLO_DIM}",
                self.phylo_n_comp
            )));
        }
        if self.ngram_n_comp == 0 {
            return Err(Error::InvalidArgument("ngram_n_comp must be >= 1".into()));
        }
        Ok(())
    }
}
