//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.
//!
//! Criterion 8 needs a real lang2vec-style input directory in
//! `TYPOFILL_LANG2VEC_DIR`; without it only its search-space part runs.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use typofill::hpo::{default_space, Task, Value};
use typofill::mlcore::{mean_absolute_error, ModelKind};
use typofill::posquality::{compute_quality_features, filter_languages, fit_quality_regressor};
use typofill_cli::synth::{generate, Scenario, SynthParams};

type Outcome = Result<String, String>;

fn csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn cli(args: &[&str]) -> Result<(), String> {
    let mut full = vec!["typofill"];
    full.extend_from_slice(args);
    typofill_cli::run(full).map_err(|e| format!("`{}`: {e:#}", args.join(" ")))
}

fn synth_into(dir: &Path, scenario: Scenario, langs: usize, feats: usize, seed: u64) -> Result<(), String> {
    cli(&[
        "synth",
        "--scenario",
        scenario.as_str(),
        "--langs",
        &langs.to_string(),
        "--feats",
        &feats.to_string(),
        "--seed",
        &seed.to_string(),
        "--data",
        dir.to_str().unwrap(),
    ])
}

fn staged(data: &Path, out: &Path, stage: &str, extra: &[&str]) -> Result<(), String> {
    let mut args = vec![stage, "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    cli(&args)
}

/// `table1.csv` row for `feat`: (knn, ours, enabled groups).
fn table1_row(out: &Path, feat: &str) -> Result<(f64, f64, BTreeSet<String>), String> {
    let rows = csv(&out.join("table1.csv"));
    let header = &rows[0];
    let row = rows
        .iter()
        .find(|r| r[0] == feat)
        .ok_or_else(|| format!("{feat} missing from table1.csv"))?;
    let groups = header
        .iter()
        .zip(row)
        .skip(3)
        .filter(|(h, v)| !h.ends_with("_n_comp") && v.as_str() == "1")
        .map(|(h, _)| h.clone())
        .collect();
    Ok((row[1].parse().unwrap(), row[2].parse().unwrap(), groups))
}

fn table1_average(out: &Path) -> (f64, f64) {
    let rows = csv(&out.join("table1.csv"));
    let avg = rows.iter().find(|r| r[0] == "average").expect("average row");
    (avg[1].parse().unwrap(), avg[2].parse().unwrap())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let parts = [
        oracle::gini_split_suite()?,
        oracle::logistic_gradient_suite()?,
        oracle::pca_suite()?,
        oracle::f1_suite()?,
    ];
    let took = start.elapsed();
    if took > Duration::from_secs(30) {
        return Err(format!("oracles agree but took {took:.1?} (limit 30 s)"));
    }
    Ok(format!("{}; {took:.1?}", parts.join("; ")))
}

const DETERMINISM_BUDGET: &[&str] = &[
    "--set",
    "presence_trials=3",
    "--set",
    "presence_folds=3",
    "--set",
    "typology_trials=4",
    "--set",
    "typology_folds=4",
    "--set",
    "ratio_threshold=0.2",
    "--seed",
    "11",
];

fn run_binary(data: &Path, out: &Path, threads: usize) -> Result<(), String> {
    for stage in ["presence", "rank", "eval-kfold", "eval-missing"] {
        let status = Command::new(env!("CARGO_BIN_EXE_typofill"))
            .args([stage, "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .args(["--threads", &threads.to_string()])
            .args(DETERMINISM_BUDGET)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("`typofill {stage}` exited with {status}"));
        }
    }
    Ok(())
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    synth_into(&data, Scenario::WikiMissingness, 40, 8, 3)?;
    let runs: Vec<(PathBuf, usize)> = vec![
        (tmp.path().join("a"), 1),
        (tmp.path().join("b"), 1),
        (tmp.path().join("c"), 8),
    ];
    for (out, threads) in &runs {
        run_binary(&data, out, *threads)?;
    }
    for name in ["table1.csv", "table2.csv", "ranking.csv"] {
        let first = std::fs::read(runs[0].0.join(name)).map_err(|e| e.to_string())?;
        for (out, threads) in &runs[1..] {
            let other = std::fs::read(out.join(name)).map_err(|e| e.to_string())?;
            if other != first {
                return Err(format!("{name} differs between runs (threads 1 vs {threads})"));
            }
        }
    }
    let table2_rows = csv(&runs[0].0.join("table2.csv")).len() - 2;
    let took = start.elapsed();
    if took > Duration::from_secs(300) {
        return Err(format!("identical outputs but took {took:.1?} (limit 5 min)"));
    }
    Ok(format!(
        "table1/table2/ranking byte-identical over 2 runs at 1 thread and 1 at 8; {table2_rows} likely-missing rows; {took:.1?}"
    ))
}

fn criterion_3() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (data, out) = (tmp.path().join("data"), tmp.path().join("out"));
    synth_into(&data, Scenario::WikiMissingness, 60, 12, 7)?;
    staged(&data, &out, "presence", &["--seed", "7"])?;
    staged(&data, &out, "rank", &["--seed", "7"])?;

    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("presence_model.json")).unwrap()).unwrap();
    let cv_f1 = model["cv_f1"].as_f64().ok_or("presence_model.json has no cv_f1")?;
    if cv_f1 < 99.0 {
        return Err(format!("presence CV F1 {cv_f1:.2} < 99"));
    }

    // Independent recount from the input matrix and the ranking file.
    let typology = csv(&data.join("typology.csv"));
    let feats = &typology[0][1..];
    let mut present: BTreeMap<&str, usize> = feats.iter().map(|f| (f.as_str(), 0)).collect();
    let mut present_cells = BTreeSet::new();
    for row in &typology[1..] {
        for (f, v) in feats.iter().zip(&row[1..]) {
            if v != "--" {
                *present.get_mut(f.as_str()).unwrap() += 1;
                present_cells.insert((row[0].clone(), f.clone()));
            }
        }
    }
    let total: usize = present.values().sum();
    let ranking = csv(&out.join("ranking.csv"));
    let cells = &ranking[1..];
    if cells.len() != total {
        return Err(format!("ranking has {} cells, matrix has {total} present", cells.len()));
    }
    let mut flagged: BTreeMap<&str, usize> = BTreeMap::new();
    let mut n_flagged = 0;
    for c in cells {
        if !present_cells.contains(&(c[0].clone(), c[1].clone())) {
            return Err(format!("ranked cell {}/{} is not present", c[0], c[1]));
        }
        if c[3] == "1" {
            n_flagged += 1;
            *flagged.entry(c[1].as_str()).or_default() += 1;
        }
    }
    let expected = (0.2 * total as f64).ceil() as usize;
    if n_flagged != expected {
        return Err(format!("{n_flagged} cells flagged, expected ceil(0.2 * {total}) = {expected}"));
    }
    let report = csv(&out.join("missing_ratio.csv"));
    for row in &report[1..] {
        let f = row[0].as_str();
        let (fl, pr) = (flagged.get(f).copied().unwrap_or(0), present[f]);
        let ratio = format!("{:.6}", fl as f64 / pr as f64);
        if row[1] != fl.to_string() || row[2] != pr.to_string() || row[3] != ratio {
            return Err(format!("{f}: report {:?}, recount {fl},{pr},{ratio}", &row[1..]));
        }
    }
    Ok(format!(
        "CV F1 {cv_f1:.2}; {n_flagged} of {total} present cells flagged; {} ratios recounted",
        report.len() - 1
    ))
}

fn typology_budget(trials: usize) -> Vec<String> {
    ["--set", &format!("typology_trials={trials}"), "--seed", "5"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn run_kfold(scenario: Scenario, langs: usize, feats: usize, trials: usize) -> Result<(tempfile::TempDir, PathBuf), String> {
    run_kfold_seeded(scenario, langs, feats, trials, 5)
}

fn run_kfold_seeded(
    scenario: Scenario,
    langs: usize,
    feats: usize,
    trials: usize,
    seed: u64,
) -> Result<(tempfile::TempDir, PathBuf), String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (data, out) = (tmp.path().join("data"), tmp.path().join("out"));
    synth_into(&data, scenario, langs, feats, seed)?;
    let extra = typology_budget(trials);
    let extra: Vec<&str> = extra.iter().map(String::as_str).collect();
    staged(&data, &out, "eval-kfold", &extra)?;
    Ok((tmp, out))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let (_tmp, out) = run_kfold(Scenario::FamDetermined, 60, 12, 12)?;
    let (knn, ours, groups) = table1_row(&out, "S_F00")?;
    let took = start.elapsed();
    let detail = format!("planted feature: ours {ours:.2} vs KNN {knn:.2}; groups {groups:?}; {took:.1?}");
    if ours < 90.0 || ours - knn < 10.0 || took > Duration::from_secs(600) {
        return Err(detail);
    }
    Ok(detail)
}

fn criterion_5() -> Outcome {
    let (_tmp, out) = run_kfold(Scenario::PosOrder, 60, 6, 12)?;
    let (knn, ours, groups) = table1_row(&out, "S_F00")?;
    let detail = format!("planted feature: ours {ours:.2} (KNN {knn:.2}); groups {groups:?}");
    if !groups.contains("pos_ngrams") || ours < 85.0 {
        return Err(detail);
    }
    Ok(detail)
}

// Pooled over several independent datasets: a single 60-language draw
// swings the KNN average by several points.
const NULL_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn criterion_6() -> Outcome {
    let (mut knn, mut ours) = (0.0, 0.0);
    for seed in NULL_SEEDS {
        let (_tmp, out) = run_kfold_seeded(Scenario::IidNoise, 60, 12, 8, seed)?;
        let (k, o) = table1_average(&out);
        knn += k / NULL_SEEDS.len() as f64;
        ours += o / NULL_SEEDS.len() as f64;
    }
    let p = 0.7;
    let analytic = 100.0 * 2.0 * p / (1.0 + p);
    let detail = format!(
        "average over {} datasets: KNN {knn:.2}, ours {ours:.2}, majority predictor {analytic:.2}",
        NULL_SEEDS.len()
    );
    if (knn - analytic).abs() > 10.0 || (ours - analytic).abs() > 10.0 {
        return Err(detail);
    }
    Ok(detail)
}

fn criterion_7() -> Outcome {
    let mut p = SynthParams::new(Scenario::IidNoise, 150, 2, 21);
    p.sentences = 30;
    let d = generate(&p).map_err(|e| e.to_string())?;
    let features = compute_quality_features(&d.corpus, &d.pos_stats, &d.swadesh).value;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (test, train): (Vec<_>, Vec<_>) = features.iter().cloned().partition(|_| rng.gen_bool(0.25));
    let train_gold = train.iter().map(|f| (f.code, d.gold_recall[&f.code])).collect();
    let reg = fit_quality_regressor(&train, &train_gold, 9).map_err(|e| e.to_string())?;
    let pred: Vec<f64> = test.iter().map(|f| reg.predict(f)).collect();
    let truth: Vec<f64> = test.iter().map(|f| d.gold_recall[&f.code]).collect();
    let mae = mean_absolute_error(&pred, &truth);
    if mae >= 3.0 {
        return Err(format!("held-out MAE {mae:.3} on {} languages", test.len()));
    }

    let estimates = reg.estimate_all(&features);
    let mut thresholds: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..100.0)).collect();
    thresholds.sort_by(f64::total_cmp);
    let kept: Vec<_> = thresholds.iter().map(|&t| filter_languages(&estimates, t)).collect();
    for (w, t) in kept.windows(2).zip(thresholds.windows(2)) {
        if !w[1].is_subset(&w[0]) {
            return Err(format!("kept set at {:.3} is not inside the set at {:.3}", t[1], t[0]));
        }
    }
    Ok(format!(
        "held-out MAE {mae:.3} on {} languages ({} train); nesting holds over 100 thresholds",
        test.len(),
        train.len()
    ))
}

/// `Ok(None)` when no real data directory is configured.
fn criterion_8() -> Result<Option<String>, String> {
    let space = default_space(Task::Presence, ModelKind::GradientBoosting);
    let point = [
        ("max_depth", Value::Int(17)),
        ("min_samples_split", Value::Int(12)),
        ("learning_rate", Value::Float(0.0836)),
        ("n_estimators", Value::Int(494)),
        ("phylo_n_comp", Value::Int(31)),
    ];
    for (name, v) in &point {
        let dim = space.get(name).ok_or(format!("no dimension {name}"))?;
        if !dim.contains(v) {
            return Err(format!("{name} = {v} outside the default presence space"));
        }
    }
    let Some(dir) = std::env::var_os("TYPOFILL_LANG2VEC_DIR") else {
        return Ok(None);
    };
    let data = PathBuf::from(dir);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tmp.path().join("out");
    for stage in ["validate", "presence", "rank", "eval-kfold", "eval-missing", "report"] {
        staged(&data, &out, stage, &[])?;
    }
    let (k1, o1) = table1_average(&out);
    let t2 = csv(&out.join("table2.csv"));
    let avg2 = t2.iter().find(|r| r[0] == "average").ok_or("table2.csv has no average row")?;
    let (k2, o2): (f64, f64) = (
        avg2[2].parse().map_err(|_| "no likely-missing average")?,
        avg2[3].parse().map_err(|_| "no likely-missing average")?,
    );
    let detail = format!("k-fold ours {o1:.2} vs KNN {k1:.2}; likely-missing ours {o2:.2} vs KNN {k2:.2}");
    if o1 < k1 || o2 < k2 {
        return Err(detail);
    }
    Ok(Some(detail))
}

fn main() {
    // `cargo test -- <filter>` passes arguments; only run on a plain invocation
    // or when the filter names this target.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("ML-core oracle suite", criterion_1),
        ("determinism across runs and thread counts", criterion_2),
        ("presence pipeline on wiki_missingness", criterion_3),
        ("typology pipeline on fam_determined", criterion_4),
        ("POS n-gram path on pos_order", criterion_5),
        ("null effect on iid_noise", criterion_6),
        ("tagger-quality regressor", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (status, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} [{status}] {name}: {detail} ({:.1?})", i + 1, start.elapsed());
    }
    match criterion_8() {
        Ok(Some(d)) => println!("criterion 8 [PASS] real-data directional check: {d}"),
        Ok(None) => println!(
            "criterion 8 [SKIP] real-data directional check: published GB point lies in the default space; \
             set TYPOFILL_LANG2VEC_DIR to run the pipeline"
        ),
        Err(d) => {
            failed += 1;
            println!("criterion 8 [FAIL] real-data directional check: {d}");
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
