//! Imputation of missing typological features.
//!
//! A binary languages × features database is completed from language
//! metadata, a phylogeny vector and POS-tag n-gram statistics. The crate
//! covers loading ([`corpus`]), featurization ([`featurize`]), from-scratch
//! classifiers and PCA ([`mlcore`]), encoder-plus-model bundles
//! ([`pipeline`]), hyperparameter and feature-group search ([`hpo`]), the
//! presence classifier and likely-missing ranking ([`presence`]),
//! per-feature classifiers with a KNN baseline ([`typology`]), and
//! POS-tagger quality estimation ([`posquality`]).

pub mod corpus;
mod error;
pub mod featurize;
pub mod hpo;
pub mod mlcore;
pub mod pipeline;
pub mod posquality;
pub mod presence;
pub mod seed;
pub mod typology;

pub use error::{Error, Result};
