//! Featurize-then-classify pipelines shared by the presence and typology
//! tasks: encoders fitted on training keys, a model fitted on their vectors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::featurize::{fit_encoders, FeatureConfig, FeatureSources, FittedEncoders};
use crate::hpo::Evaluation;
use crate::mlcore::{f1_score, fit, mean, Dataset, Fold, Hyperparams, TrainedModel};
use crate::mlcore::RowKey;
use crate::seed::{self, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub encoders: FittedEncoders,
    pub model: TrainedModel,
}

impl Pipeline {
    pub fn config(&self) -> &FeatureConfig {
        &self.encoders.config
    }

    /// Probability of label 1 for each key.
    pub fn predict_proba(&self, keys: &[RowKey], sources: FeatureSources<'_>) -> Result<Vec<f64>> {
        let x = self.encoders.build_matrix(keys, sources)?;
        self.model.check_fingerprint(&self.encoders.schema().fingerprint())?;
        self.model.predict_proba(&x)
    }

    pub fn predict(&self, keys: &[RowKey], sources: FeatureSources<'_>) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(keys, sources)?
            .into_iter()
            .map(|p| u8::from(p >= 0.5))
            .collect())
    }
}

/// Fits encoders and a model on `(keys, labels)`.
pub fn fit_pipeline(
    keys: &[RowKey],
    labels: &[u8],
    config: &FeatureConfig,
    hyperparams: &Hyperparams,
    sources: FeatureSources<'_>,
    seed: u64,
) -> Result<Pipeline> {
    let encoders = fit_encoders(config, sources, keys)?;
    let x = encoders.build_matrix(keys, sources)?;
    let data = Dataset::new(x, labels.to_vec(), Vec::new())?;
    let model = fit(hyperparams, &data, seed)?.with_fingerprint(encoders.schema().fingerprint());
    Ok(Pipeline { encoders, model })
}

/// Mean F1 (label 1 positive) over `folds`; each fold refits encoders on
/// its training rows only.
pub fn cross_validate(
    keys: &[RowKey],
    labels: &[u8],
    folds: &[Fold],
    config: &FeatureConfig,
    hyperparams: &Hyperparams,
    sources: FeatureSources<'_>,
    seed: u64,
) -> Result<Evaluation> {
    let scores: Vec<f64> = folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let pick_keys = |idx: &[usize]| -> Vec<RowKey> { idx.iter().map(|&i| keys[i].clone()).collect() };
            let pick_labels = |idx: &[usize]| -> Vec<u8> { idx.iter().map(|&i| labels[i]).collect() };
            let p = fit_pipeline(
                &pick_keys(&fold.train),
                &pick_labels(&fold.train),
                config,
                hyperparams,
                sources,
                seed::child(seed, stream::MODEL, f as u64),
            )?;
            let pred = p.predict(&pick_keys(&fold.test), sources)?;
            f1_score(&pred, &pick_labels(&fold.test))
        })
        .collect::<Result<_>>()?;
    Ok(Evaluation {
        score: mean(&scores),
        fold_scores: scores,
    })
}
