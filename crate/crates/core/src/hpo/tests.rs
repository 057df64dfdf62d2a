use super::*;
use crate::featurize::{FeatureConfig, Group};
use crate::mlcore::{Hyperparams, ModelKind};

fn bools(n: usize) -> SearchSpace {
    SearchSpace::new((0..n).map(|i| (format!("b{i}"), Dim::Bool)).collect()).unwrap()
}

fn count_true(a: &Assignment) -> f64 {
    a.values().filter(|v| **v == Value::Bool(true)).count() as f64
}

#[test]
fn single_trial_constant_objective() {
    let r = run_study(&bools(2), |_, _| Ok(Evaluation::single(42.0)), 1, 3, Sampler::Random).unwrap();
    assert_eq!(r.trials.len(), 1);
    assert_eq!(r.best_trial().unwrap().objective, Some(42.0));
}

#[test]
fn random_search_finds_all_enabled() {
    let r = run_study(&bools(3), |a, _| Ok(Evaluation::single(count_true(a))), 64, 11, Sampler::Random).unwrap();
    assert_eq!(r.best_trial().unwrap().objective, Some(3.0));
}

#[test]
fn zero_trials_rejected() {
    assert!(run_study(&bools(1), |_, _| Ok(Evaluation::single(1.0)), 0, 0, Sampler::Random).is_err());
}

#[test]
fn same_seed_same_study() {
    let space = default_space(Task::Typology, ModelKind::RandomForest);
    let obj = |a: &Assignment, s: u64| Ok(Evaluation::single(count_true(a) + (s % 7) as f64));
    for sampler in [Sampler::Random, Sampler::TpeLike] {
        let a = run_study(&space, obj, 20, 5, sampler).unwrap();
        let b = run_study(&space, obj, 20, 5, sampler).unwrap();
        assert_eq!(a, b);
        let c = run_study(&space, obj, 20, 6, sampler).unwrap();
        assert_ne!(a.trials, c.trials);
    }
}

#[test]
fn failures_are_recorded_and_skipped() {
    let r = run_study(
        &bools(3),
        |a, _| {
            let n = count_true(a);
            if n == 0.0 {
                Err(Error::Contract("nothing enabled".into()))
            } else {
                Ok(Evaluation::single(n))
            }
        },
        40,
        1,
        Sampler::TpeLike,
    )
    .unwrap();
    let failed: Vec<&Trial> = r.trials.iter().filter(|t| t.objective.is_none()).collect();
    assert!(failed.iter().all(|t| count_true(&t.assignment) == 0.0 && t.error.is_some()));
    assert!(r.best_trial().unwrap().objective.is_some());
}

#[test]
fn all_failed_means_no_best() {
    let r = run_study(&bools(1), |_, _| Err(Error::Contract("x".into())), 3, 1, Sampler::Random).unwrap();
    assert_eq!(r.best, None);
    assert!(r.trials.iter().all(|t| t.score() == f64::NEG_INFINITY));
}

#[test]
fn out_of_range_objective_fails_trial() {
    let r = run_study(&bools(1), |_, _| Ok(Evaluation::single(f64::NAN)), 2, 1, Sampler::Random).unwrap();
    assert_eq!(r.best, None);
}

#[test]
fn ties_go_to_lowest_index() {
    let r = run_study(&bools(4), |_, _| Ok(Evaluation::single(7.0)), 10, 2, Sampler::Random).unwrap();
    assert_eq!(r.best, Some(0));
}

#[test]
fn objective_called_once_per_trial() {
    use std::sync::atomic::{AtomicUsize, Ordering};
    let calls = AtomicUsize::new(0);
    let obj = |_: &Assignment, _| {
        calls.fetch_add(1, Ordering::SeqCst);
        Ok(Evaluation::single(1.0))
    };
    run_study(&bools(2), obj, 17, 0, Sampler::Random).unwrap();
    run_study(&bools(2), obj, 13, 0, Sampler::TpeLike).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 30);
}

#[test]
fn tpe_concentrates_on_good_region() {
    let space = SearchSpace::new(vec![("x".into(), Dim::float(0.0, 100.0))]).unwrap();
    let obj = |a: &Assignment, _| match a["x"] {
        Value::Float(x) => Ok(Evaluation::single(100.0 - (x - 80.0).abs())),
        _ => unreachable!(),
    };
    let tpe = run_study(&space, obj, 60, 9, Sampler::TpeLike).unwrap();
    let late: Vec<f64> = tpe.trials[30..].iter().map(Trial::score).collect();
    let mean_late = late.iter().sum::<f64>() / late.len() as f64;
    // Uniform draws on [0, 100] score 100 - E|x - 80| = 66 on average.
    assert!(mean_late > 85.0, "mean late score {mean_late}");
}

#[test]
fn presence_space_contains_reference_point() {
    let space = default_space(Task::Presence, ModelKind::GradientBoosting);
    let point = [
        ("max_depth", Value::Int(17)),
        ("min_samples_split", Value::Int(12)),
        ("learning_rate", Value::Float(0.0836)),
        ("n_estimators", Value::Int(494)),
        ("phylo_n_comp", Value::Int(31)),
    ];
    for (n, v) in point {
        assert!(space.get(n).unwrap().contains(&v), "{n}");
    }
    assert!(space.get(&group_dim_name(Group::PosNgrams)).is_none());
    assert!(space.get(NGRAM_N_COMP).is_none());
}

#[test]
fn typology_space_has_thirteen_booleans() {
    let space = default_space(Task::Typology, ModelKind::RandomForest);
    let n_bool = space.dims.iter().filter(|(_, d)| *d == Dim::Bool).count();
    assert_eq!(n_bool, 13);
    for g in Group::ALL {
        assert_eq!(space.get(&group_dim_name(g)), Some(&Dim::Bool));
    }
    assert_eq!(space.get(PHYLO_N_COMP), Some(&Dim::int(2, 128)));
    assert_eq!(space.get(NGRAM_N_COMP), Some(&Dim::int(2, 512)));
}

#[test]
fn assignment_maps_to_config_and_hyperparams() {
    let space = default_space(Task::Presence, ModelKind::GradientBoosting);
    let mut rng = crate::seed::rng(1);
    let a = space.sample_uniform(&mut rng);
    let cfg = feature_config(&a, &FeatureConfig::none()).unwrap();
    assert!(!cfg.use_pos_ngrams);
    for g in Group::ALL.iter().filter(|g| !g.is_textual()) {
        assert_eq!(Value::Bool(cfg.get(*g)), a[&group_dim_name(*g)]);
    }
    match hyperparams(&a, ModelKind::GradientBoosting).unwrap() {
        Hyperparams::GradientBoosting { n_estimators, .. } => {
            assert_eq!(Value::Int(n_estimators as i64), a["n_estimators"])
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn every_model_space_yields_valid_hyperparams() {
    let mut rng = crate::seed::rng(4);
    for kind in ModelKind::ALL {
        let space = model_space(kind);
        for _ in 0..50 {
            let a = space.sample_uniform(&mut rng);
            assert_eq!(hyperparams(&a, kind).unwrap().kind(), kind);
        }
    }
}

#[test]
fn fixed_dimension_is_always_sampled_at_its_value() {
    let mut space = default_space(Task::Typology, ModelKind::RandomForest);
    space.fix(&group_dim_name(Group::LangFam), Value::Bool(true)).unwrap();
    space.fix("n_estimators", Value::Int(50)).unwrap();
    let r = run_study(
        &space,
        |a, _| {
            let cfg = feature_config(a, &FeatureConfig::none())?;
            assert!(cfg.use_lang_fam);
            Ok(Evaluation::single(50.0))
        },
        8,
        3,
        Sampler::TpeLike,
    )
    .unwrap();
    assert!(r.trials.iter().all(|t| t.assignment["n_estimators"] == Value::Int(50)));
}

#[test]
fn study_json_round_trip() {
    let space = default_space(Task::Typology, ModelKind::RandomForest);
    let r = run_study(&space, |a, _| Ok(Evaluation::single(count_true(a))), 6, 8, Sampler::TpeLike).unwrap();
    let back = StudyResult::from_json(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn uniform_draws_stay_inside(seed in any::<u64>()) {
            let mut rng = crate::seed::rng(seed);
            for task in [Task::Presence, Task::Typology] {
                let space = default_space(task, ModelKind::GradientBoosting).extend(model_space(ModelKind::Knn)).unwrap();
                let a = space.sample_uniform(&mut rng);
                prop_assert!(space.contains(&a));
                prop_assert!(feature_config(&a, &FeatureConfig::none()).is_ok());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn tpe_draws_stay_inside(seed in any::<u64>(), scale in 0.0f64..1.0) {
            let space = default_space(Task::Typology, ModelKind::RandomForest);
            let r = run_study(
                &space,
                |a, s| Ok(Evaluation::single((count_true(a) * 7.0 * scale + (s % 5) as f64).min(100.0))),
                10,
                seed,
                Sampler::TpeLike,
            ).unwrap();
            for t in &r.trials {
                prop_assert!(space.contains(&t.assignment));
            }
        }
    }
}
