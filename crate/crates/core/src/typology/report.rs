use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::TypologyMatrix;
use crate::featurize::{FeatureConfig, Group};
use crate::mlcore::mean;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFeature {
    pub feat_id: String,
    pub reason: String,
}

/// Scores for one feature under one evaluation setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEval {
    pub feat_id: String,
    /// Set in the likely-missing setup.
    pub missing_ratio: Option<f64>,
    pub knn_f1: f64,
    pub ours_f1: f64,
    pub config: FeatureConfig,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub setup: String,
    pub rows: Vec<FeatureEval>,
    pub skipped: Vec<SkippedFeature>,
    /// Means over `rows`; NaN when no feature was evaluated.
    pub avg_knn: f64,
    pub avg_ours: f64,
}

impl EvalReport {
    pub(crate) fn assemble(
        setup: String,
        outcomes: Vec<std::result::Result<FeatureEval, SkippedFeature>>,
    ) -> Self {
        let mut rows = Vec::new();
        let mut skipped = Vec::new();
        for o in outcomes {
            match o {
                Ok(r) => rows.push(r),
                Err(s) => {
                    log::warn!("skipped {}: {}", s.feat_id, s.reason);
                    skipped.push(s);
                }
            }
        }
        let knn: Vec<f64> = rows.iter().map(|r| r.knn_f1).collect();
        let ours: Vec<f64> = rows.iter().map(|r| r.ours_f1).collect();
        EvalReport {
            setup,
            avg_knn: mean(&knn),
            avg_ours: mean(&ours),
            rows,
            skipped,
        }
    }

    /// Percentage of evaluated features whose selected config uses `g`.
    pub fn usage(&self, g: Group) -> f64 {
        if self.rows.is_empty() {
            return f64::NAN;
        }
        let n = self.rows.iter().filter(|r| r.config.get(g)).count();
        100.0 * n as f64 / self.rows.len() as f64
    }

    /// `feat_id,knn_f1,ours_f1,<13 group flags>,phylo_n_comp,ngram_n_comp`,
    /// then an `average` row carrying mean F1s and per-group usage
    /// percentages.
    pub fn table1_csv(&self) -> String {
        let mut out = String::from("feat_id,knn_f1,ours_f1");
        for g in Group::ALL {
            let _ = write!(out, ",{}", g.name());
        }
        out.push_str(",phylo_n_comp,ngram_n_comp\n");
        for r in &self.rows {
            let _ = write!(out, "{},{:.4},{:.4}", r.feat_id, r.knn_f1, r.ours_f1);
            for g in Group::ALL {
                let _ = write!(out, ",{}", u8::from(r.config.get(g)));
            }
            let _ = writeln!(out, ",{},{}", r.config.phylo_n_comp, r.config.ngram_n_comp);
        }
        let _ = write!(out, "average,{},{}", fmt_opt(self.avg_knn), fmt_opt(self.avg_ours));
        for g in Group::ALL {
            let _ = write!(out, ",{}", fmt_opt(self.usage(g)));
        }
        out.push_str(",,\n");
        out
    }

    /// `feat_id,missing_ratio,knn_f1,ours_f1`, then an `average` row.
    pub fn table2_csv(&self) -> String {
        let mut out = String::from("feat_id,missing_ratio,knn_f1,ours_f1\n");
        for r in &self.rows {
            let ratio = r.missing_ratio.map(|x| format!("{x:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{:.4},{:.4}", r.feat_id, ratio, r.knn_f1, r.ours_f1);
        }
        let _ = writeln!(out, "average,,{},{}", fmt_opt(self.avg_knn), fmt_opt(self.avg_ours));
        out
    }

    pub fn skipped_csv(&self) -> String {
        let mut out = String::from("feat_id,reason\n");
        for s in &self.skipped {
            let _ = writeln!(out, "{},\"{}\"", s.feat_id, s.reason.replace('"', "'"));
        }
        out
    }
}

fn fmt_opt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        String::new()
    }
}

/// Origin of a cell in the completed matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", content = "p", rename_all = "snake_case")]
pub enum Provenance {
    Observed,
    /// Predicted by the feature's model with this probability of 1.
    Model(f64),
    /// Predicted by the KNN baseline (no model for the feature).
    Knn,
    /// Left missing: not a target feature, or nothing to learn from.
    Missing,
}

impl Provenance {
    pub fn label(&self) -> String {
        match self {
            Provenance::Observed => "observed".into(),
            Provenance::Model(p) => format!("model:{p:.6}"),
            Provenance::Knn => "knn".into(),
            Provenance::Missing => "--".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImputedMatrix {
    pub matrix: TypologyMatrix,
    /// Row-major, same shape as `matrix`.
    pub provenance: Vec<Provenance>,
}

impl ImputedMatrix {
    pub fn provenance_at(&self, lang: usize, feat: usize) -> Provenance {
        self.provenance[lang * self.matrix.n_feats() + feat]
    }

    pub fn completed_csv(&self) -> String {
        self.matrix.to_csv()
    }

    pub fn provenance_csv(&self) -> String {
        let mut out = String::from("iso639_3");
        for f in self.matrix.features() {
            out.push(',');
            out.push_str(&f.feat_id);
        }
        out.push('\n');
        for (l, code) in self.matrix.languages().iter().enumerate() {
            out.push_str(code.as_str());
            for f in 0..self.matrix.n_feats() {
                out.push(',');
                out.push_str(&self.provenance_at(l, f).label());
            }
            out.push('\n');
        }
        out
    }
}
