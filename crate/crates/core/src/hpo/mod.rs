//! Seeded search over feature groups and model hyperparameters.
//!
//! A study evaluates `n_trials` assignments drawn from a [`SearchSpace`].
//! The random sampler pre-draws every assignment and evaluates them in
//! parallel; the TPE-like sampler runs serially, switching from uniform
//! draws to a density fitted on the best quarter of completed trials once
//! [`WARMUP_TRIALS`] have succeeded. An objective error marks the trial as
//! failed (score `None`, ranked as −∞) and the study continues.

mod space;
mod tpe;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use space::{
    default_space, feature_config, group_dim_name, hyperparams, model_space, Assignment, Dim, SearchSpace, Task,
    Value, NGRAM_N_COMP, PHYLO_N_COMP,
};

use crate::error::{Error, Result};
use crate::seed::{self, stream};

pub const WARMUP_TRIALS: usize = 5;
/// Fraction of completed trials forming the "good" density.
pub const GOOD_FRACTION: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Random,
    TpeLike,
}

impl std::str::FromStr for Sampler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Sampler::Random),
            "tpe_like" | "tpe" => Ok(Sampler::TpeLike),
            _ => Err(Error::InvalidArgument(format!("unknown sampler `{s}`"))),
        }
    }
}

/// What an objective returns: the mean score and the per-fold scores it
/// was averaged from.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub score: f64,
    pub fold_scores: Vec<f64>,
}

impl Evaluation {
    pub fn single(score: f64) -> Self {
        Evaluation {
            score,
            fold_scores: vec![score],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub assignment: Assignment,
    /// `None` when the objective failed.
    pub objective: Option<f64>,
    pub fold_scores: Vec<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trial {
    /// Score used for ranking; failed trials rank as −∞.
    pub fn score(&self) -> f64 {
        self.objective.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub space: SearchSpace,
    pub sampler: Sampler,
    pub master_seed: u64,
    pub trials: Vec<Trial>,
    /// Index of the best successful trial, if any trial succeeded.
    pub best: Option<usize>,
}

impl StudyResult {
    pub fn best_trial(&self) -> Option<&Trial> {
        self.best.map(|i| &self.trials[i])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Highest score, ties to the lowest index; `None` if every trial failed.
fn best_index(trials: &[Trial]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for t in trials.iter().filter(|t| t.objective.is_some()) {
        if best.map_or(true, |b| t.score() > trials[b].score()) {
            best = Some(t.index);
        }
    }
    best
}

fn evaluate<F>(objective: &F, index: usize, assignment: Assignment, trial_seed: u64) -> Trial
where
    F: Fn(&Assignment, u64) -> Result<Evaluation> + Sync,
{
    let (objective_value, fold_scores, error) = match objective(&assignment, trial_seed) {
        Ok(e) if e.score.is_finite() && (0.0..=100.0).contains(&e.score) => (Some(e.score), e.fold_scores, None),
        Ok(e) => (None, e.fold_scores, Some(format!("objective out of range: {}", e.score))),
        Err(err) => (None, Vec::new(), Some(err.to_string())),
    };
    if let Some(msg) = &error {
        log::debug!("trial {index} failed: {msg}");
    }
    Trial {
        index,
        assignment,
        objective: objective_value,
        fold_scores,
        seed: trial_seed,
        error,
    }
}

/// Runs `n_trials` evaluations of `objective`, which receives the sampled
/// assignment and the trial's child seed and returns a score in `[0, 100]`.
pub fn run_study<F>(
    space: &SearchSpace,
    objective: F,
    n_trials: usize,
    master_seed: u64,
    sampler: Sampler,
) -> Result<StudyResult>
where
    F: Fn(&Assignment, u64) -> Result<Evaluation> + Sync,
{
    if n_trials == 0 {
        return Err(Error::InvalidArgument("a study needs at least one trial".into()));
    }
    let trial_seed = |i: usize| seed::child(master_seed, stream::TRIAL, i as u64);
    let sampler_rng = |i: usize| seed::rng(seed::child(master_seed, stream::SAMPLER, i as u64));

    let trials: Vec<Trial> = match sampler {
        Sampler::Random => {
            let assignments: Vec<Assignment> =
                (0..n_trials).map(|i| space.sample_uniform(&mut sampler_rng(i))).collect();
            assignments
                .into_par_iter()
                .enumerate()
                .map(|(i, a)| evaluate(&objective, i, a, trial_seed(i)))
                .collect()
        }
        Sampler::TpeLike => {
            let mut trials: Vec<Trial> = Vec::with_capacity(n_trials);
            for i in 0..n_trials {
                let mut rng = sampler_rng(i);
                let a = tpe::suggest(space, &trials, &mut rng);
                trials.push(evaluate(&objective, i, a, trial_seed(i)));
            }
            trials
        }
    };
    let best = best_index(&trials);
    Ok(StudyResult {
        space: space.clone(),
        sampler,
        master_seed,
        trials,
        best,
    })
}

#[cfg(test)]
mod tests;
