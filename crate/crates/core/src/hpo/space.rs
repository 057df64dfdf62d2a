use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::{FeatureConfig, Group};
use crate::mlcore::{Hyperparams, Metric, ModelKind};

/// One searchable dimension. Integer and float ranges are inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Dim {
    Bool,
    Int { low: i64, high: i64, log: bool },
    Float { low: f64, high: f64, log: bool },
    Categorical { choices: Vec<String> },
}

impl Dim {
    pub fn int(low: i64, high: i64) -> Self {
        Dim::Int { low, high, log: false }
    }

    pub fn float(low: f64, high: f64) -> Self {
        Dim::Float { low, high, log: false }
    }

    pub fn log_float(low: f64, high: f64) -> Self {
        Dim::Float { low, high, log: true }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            Dim::Bool => true,
            Dim::Int { low, high, log } => low <= high && (!log || *low >= 1),
            Dim::Float { low, high, log } => {
                low.is_finite() && high.is_finite() && low <= high && (!log || *low > 0.0)
            }
            Dim::Categorical { choices } => !choices.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("dimension `{name}` has an empty or invalid range")))
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (Dim::Bool, Value::Bool(_)) => true,
            (Dim::Int { low, high, .. }, Value::Int(x)) => low <= x && x <= high,
            (Dim::Float { low, high, .. }, Value::Float(x)) => *low <= *x && *x <= *high,
            (Dim::Categorical { choices }, Value::Cat(c)) => choices.contains(c),
            _ => false,
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match self {
            Dim::Bool => Value::Bool(rng.gen_bool(0.5)),
            Dim::Int { low, high, log: false } => Value::Int(rng.gen_range(*low..=*high)),
            Dim::Int { low, high, log: true } => {
                let x = rng.gen_range((*low as f64).ln()..=((*high as f64) + 1.0).ln()).exp();
                Value::Int((x.floor() as i64).clamp(*low, *high))
            }
            Dim::Float { low, high, log: false } => Value::Float(rng.gen_range(*low..=*high)),
            Dim::Float { low, high, log: true } => {
                Value::Float(rng.gen_range(low.ln()..=high.ln()).exp().clamp(*low, *high))
            }
            Dim::Categorical { choices } => Value::Cat(choices[rng.gen_range(0..choices.len())].clone()),
        }
    }
}

/// A sampled value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Cat(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Cat(s) => f.write_str(s),
        }
    }
}

pub type Assignment = BTreeMap<String, Value>;

/// Named dimensions in a fixed order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<(String, Dim)>,
}

impl SearchSpace {
    pub fn new(dims: Vec<(String, Dim)>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for (name, d) in &dims {
            d.validate(name)?;
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate dimension `{name}`")));
            }
        }
        Ok(SearchSpace { dims })
    }

    pub fn get(&self, name: &str) -> Option<&Dim> {
        self.dims.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn contains(&self, a: &Assignment) -> bool {
        a.len() == self.dims.len() && self.dims.iter().all(|(n, d)| a.get(n).is_some_and(|v| d.contains(v)))
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Assignment {
        self.dims.iter().map(|(n, d)| (n.clone(), d.sample_uniform(rng))).collect()
    }

    /// Appends `other`'s dimensions; names must stay unique.
    pub fn extend(mut self, other: SearchSpace) -> Result<Self> {
        self.dims.extend(other.dims);
        SearchSpace::new(self.dims)
    }

    /// Replaces a dimension by a fixed single-point range.
    pub fn fix(&mut self, name: &str, value: Value) -> Result<()> {
        let slot = self
            .dims
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no dimension `{name}`")))?;
        slot.1 = match value {
            Value::Bool(b) => Dim::Categorical {
                choices: vec![b.to_string()],
            },
            Value::Int(i) => Dim::int(i, i),
            Value::Float(x) => Dim::float(x, x),
            Value::Cat(c) => Dim::Categorical { choices: vec![c] },
        };
        Ok(())
    }
}

/// Which pipeline a default space is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Presence,
    Typology,
}

pub fn group_dim_name(g: Group) -> String {
    format!("use_{}", g.name())
}

pub const PHYLO_N_COMP: &str = "phylo_n_comp";
pub const NGRAM_N_COMP: &str = "ngram_n_comp";

/// Hyperparameter dimensions for one model kind.
pub fn model_space(kind: ModelKind) -> SearchSpace {
    let d = |n: &str, dim: Dim| (n.to_string(), dim);
    let dims = match kind {
        ModelKind::Knn => vec![
            d("k", Dim::int(1, 30)),
            d(
                "metric",
                Dim::Categorical {
                    choices: vec!["euclidean".into(), "manhattan".into()],
                },
            ),
        ],
        ModelKind::DecisionTree => vec![d("max_depth", Dim::int(2, 30)), d("min_samples_split", Dim::int(2, 20))],
        ModelKind::RandomForest => vec![
            d("n_estimators", Dim::int(10, 200)),
            d("max_depth", Dim::int(2, 30)),
            d("min_samples_split", Dim::int(2, 20)),
            d("max_features", Dim::float(0.05, 1.0)),
        ],
        ModelKind::GradientBoosting => vec![
            d("max_depth", Dim::int(3, 25)),
            d("min_samples_split", Dim::int(2, 20)),
            d("learning_rate", Dim::log_float(0.01, 0.3)),
            d("n_estimators", Dim::int(50, 600)),
        ],
        ModelKind::LogisticRegression => vec![d("l2_strength", Dim::log_float(1e-4, 10.0))],
    };
    SearchSpace { dims }
}

/// Presence: the non-textual group booleans, `phylo_n_comp` and the model
/// dimensions. Typology: all 13 group booleans, both component counts and
/// the model dimensions.
pub fn default_space(task: Task, kind: ModelKind) -> SearchSpace {
    let mut dims: Vec<(String, Dim)> = Group::ALL
        .iter()
        .filter(|g| task == Task::Typology || !g.is_textual())
        .map(|&g| (group_dim_name(g), Dim::Bool))
        .collect();
    dims.push((PHYLO_N_COMP.into(), Dim::int(2, 128)));
    if task == Task::Typology {
        dims.push((NGRAM_N_COMP.into(), Dim::int(2, 512)));
    }
    SearchSpace::new(dims)
        .and_then(|s| s.extend(model_space(kind)))
        .expect("default space is well formed")
}

fn as_bool(v: &Value, name: &str) -> Result<bool> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Cat(c) if c == "true" || c == "false" => Ok(c == "true"),
        _ => Err(Error::InvalidArgument(format!("`{name}` must be a boolean"))),
    }
}

fn as_usize(v: &Value, name: &str) -> Result<usize> {
    match v {
        Value::Int(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(Error::InvalidArgument(format!("`{name}` must be a non-negative integer"))),
    }
}

fn as_f64(v: &Value, name: &str) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Int(i) => Ok(*i as f64),
        _ => Err(Error::InvalidArgument(format!("`{name}` must be a number"))),
    }
}

/// Overlays the group booleans and component counts present in `a` onto
/// `base`, then validates the result.
pub fn feature_config(a: &Assignment, base: &FeatureConfig) -> Result<FeatureConfig> {
    let mut cfg = base.clone();
    for g in Group::ALL {
        let name = group_dim_name(g);
        if let Some(v) = a.get(&name) {
            cfg.set(g, as_bool(v, &name)?);
        }
    }
    if let Some(v) = a.get(PHYLO_N_COMP) {
        cfg.phylo_n_comp = as_usize(v, PHYLO_N_COMP)?;
    }
    if let Some(v) = a.get(NGRAM_N_COMP) {
        cfg.ngram_n_comp = as_usize(v, NGRAM_N_COMP)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Model hyperparameters from `a`; dimensions absent from `a` keep the
/// kind's defaults.
pub fn hyperparams(a: &Assignment, kind: ModelKind) -> Result<Hyperparams> {
    let int = |n: &str, dflt: usize| a.get(n).map_or(Ok(dflt), |v| as_usize(v, n));
    let float = |n: &str, dflt: f64| a.get(n).map_or(Ok(dflt), |v| as_f64(v, n));
    let hp = match Hyperparams::default_for(kind) {
        Hyperparams::Knn { k, metric } => Hyperparams::Knn {
            k: int("k", k)?,
            metric: match a.get("metric") {
                None => metric,
                Some(Value::Cat(c)) if c == "euclidean" => Metric::Euclidean,
                Some(Value::Cat(c)) if c == "manhattan" => Metric::Manhattan,
                Some(v) => return Err(Error::InvalidArgument(format!("unknown metric `{v}`"))),
            },
        },
        Hyperparams::DecisionTree {
            max_depth,
            min_samples_split,
        } => Hyperparams::DecisionTree {
            max_depth: a.get("max_depth").map(|v| as_usize(v, "max_depth")).transpose()?.or(max_depth),
            min_samples_split: int("min_samples_split", min_samples_split)?,
        },
        Hyperparams::RandomForest {
            n_estimators,
            max_depth,
            min_samples_split,
            max_features,
        } => Hyperparams::RandomForest {
            n_estimators: int("n_estimators", n_estimators)?,
            max_depth: a.get("max_depth").map(|v| as_usize(v, "max_depth")).transpose()?.or(max_depth),
            min_samples_split: int("min_samples_split", min_samples_split)?,
            max_features: a
                .get("max_features")
                .map(|v| as_f64(v, "max_features"))
                .transpose()?
                .or(max_features),
        },
        Hyperparams::GradientBoosting {
            n_estimators,
            learning_rate,
            max_depth,
            min_samples_split,
        } => Hyperparams::GradientBoosting {
            n_estimators: int("n_estimators", n_estimators)?,
            learning_rate: float("learning_rate", learning_rate)?,
            max_depth: int("max_depth", max_depth)?,
            min_samples_split: int("min_samples_split", min_samples_split)?,
        },
        Hyperparams::LogisticRegression {
            l2_strength,
            max_iterations,
            tolerance,
        } => Hyperparams::LogisticRegression {
            l2_strength: float("l2_strength", l2_strength)?,
            max_iterations,
            tolerance,
        },
    };
    hp.validate()?;
    Ok(hp)
}
