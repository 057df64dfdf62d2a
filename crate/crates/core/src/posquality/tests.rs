use super::*;
use crate::corpus::SwadeshEntry;
use proptest::prelude::*;

fn code(s: &str) -> LangCode {
    LangCode::new(s).unwrap()
}

fn entry(concept: &str, lang: &str, tag: Upos) -> SwadeshEntry {
    SwadeshEntry {
        concept_id: concept.into(),
        code: code(lang),
        word: "w".into(),
        english_upos: tag,
    }
}

#[test]
fn noun_only_corpus() {
    let f = tag_frequencies(&[vec![Upos::Noun; 10]]).unwrap();
    for t in Upos::ALL {
        assert_eq!(f[t.index()], if t == Upos::Noun { 1.0 } else { 0.0 });
    }
    assert!(tag_frequencies(&[vec![]]).is_none());
}

#[test]
fn swadesh_agreement_ratios() {
    let mut list = SwadeshList::default();
    for (c, t) in [("1", Upos::Pron), ("2", Upos::Noun), ("3", Upos::Verb), ("4", Upos::Adj)] {
        list.entries.push(entry(c, "eng", t));
    }
    for (c, t) in [("1", Upos::Pron), ("2", Upos::Noun), ("3", Upos::Verb), ("4", Upos::Noun)] {
        list.entries.push(entry(c, "deu", t));
    }
    for (c, t) in [("1", Upos::Pron), ("2", Upos::Noun)] {
        list.entries.push(entry(c, "fra", t));
    }
    list.entries.push(entry("99", "ita", Upos::Noun));
    let eng = code("eng");
    assert_eq!(swadesh_agreement(&list, &code("deu"), &eng), Some(75.0));
    assert_eq!(swadesh_agreement(&list, &code("fra"), &eng), Some(100.0));
    assert_eq!(swadesh_agreement(&list, &code("ita"), &eng), None);
}

fn stats(pct_unk: f64) -> PosStats {
    PosStats {
        avg_confidence: 0.9,
        pct_unk,
        avg_len_subwords: 2.0,
        avg_len_chars: 5.0,
    }
}

#[test]
fn missing_stats_and_alignment_warn() {
    let mut corpus = PosCorpus::default();
    corpus.languages.insert(code("deu"), vec![vec![Upos::Noun, Upos::Verb]]);
    corpus.languages.insert(code("fra"), vec![vec![Upos::Noun]]);
    let mut st = BTreeMap::new();
    st.insert(code("deu"), stats(4.0));
    let out = compute_quality_features(&corpus, &st, &SwadeshList::default());
    assert_eq!(out.value.len(), 1);
    assert_eq!(out.value[0].swadesh_agreement_pct, 0.0);
    assert_eq!(out.value[0].pct_unk_subwords, 4.0);
    assert_eq!(out.warnings.len(), 2);
}

#[test]
fn pos_stats_round_trip_and_validation() {
    let mut st = BTreeMap::new();
    st.insert(code("deu"), stats(4.5));
    st.insert(code("fra"), stats(0.0));
    let text = write_pos_stats(&st);
    assert_eq!(parse_pos_stats(&text, "s").unwrap(), st);
    let bad = "iso639_3\tavg_confidence\tpct_unk\tavg_len_subwords\tavg_len_chars\ndeu\t1.5\t3\t2\t4\n";
    match parse_pos_stats(bad, "s").unwrap_err() {
        Error::Parse { line, column, .. } => assert_eq!((line, column.as_str()), (2, "avg_confidence")),
        e => panic!("{e}"),
    }
    assert!(parse_pos_stats("deu\t0.5\t3\t2\t4\n", "s").is_err());
}

#[test]
fn gold_round_trip() {
    let mut g = BTreeMap::new();
    g.insert(code("deu"), 91.25);
    assert_eq!(parse_gold_recall(&write_gold_recall(&g), "g").unwrap(), g);
    assert!(parse_gold_recall("deu\t101\n", "g").is_err());
}

/// Features where recall = 100 - pct_unk; other inputs are noise.
fn synthetic(n: usize, seed: u64) -> (Vec<PosQualityFeatures>, BTreeMap<LangCode, f64>) {
    use rand::Rng;
    let mut rng = crate::seed::rng(seed);
    let mut feats = Vec::new();
    let mut gold = BTreeMap::new();
    for i in 0..n {
        let c = code(&format!("x{}{}", (b'a' + (i / 26) as u8) as char, (b'a' + (i % 26) as u8) as char));
        let pct_unk = rng.gen_range(0.0..60.0);
        let mut tag_freqs = [0.0; Upos::COUNT];
        tag_freqs[0] = 1.0;
        feats.push(PosQualityFeatures {
            code: c,
            tag_freqs,
            avg_confidence: rng.gen_range(0.5..1.0),
            pct_unk_subwords: pct_unk,
            avg_word_len_subwords: rng.gen_range(1.0..3.0),
            avg_word_len_chars: rng.gen_range(3.0..8.0),
            swadesh_agreement_pct: rng.gen_range(0.0..100.0),
        });
        gold.insert(c, 100.0 - pct_unk);
    }
    (feats, gold)
}

#[test]
fn noiseless_recall_is_learned() {
    let (feats, gold) = synthetic(100, 3);
    let reg = fit_quality_regressor(&feats, &gold, 1).unwrap();
    assert_eq!(reg.n_train, 100);
    assert!(reg.cv_mae < 3.0, "mae {}", reg.cv_mae);
    assert_eq!(reg.forest.trees().len(), N_TREES);
}

#[test]
fn training_points_are_reproduced() {
    let (feats, gold) = synthetic(30, 6);
    let reg = fit_quality_regressor(&feats, &gold, 3).unwrap();
    for f in &feats {
        assert!((reg.predict(f) - gold[&f.code]).abs() < 1e-9);
    }
}

#[test]
fn constant_target_predicts_constant() {
    let (feats, gold) = synthetic(20, 4);
    let gold: BTreeMap<LangCode, f64> = gold.keys().map(|c| (*c, 80.0)).collect();
    let reg = fit_quality_regressor(&feats, &gold, 2).unwrap();
    for f in &feats {
        assert_eq!(reg.predict(f), 80.0);
    }
    assert_eq!(reg.cv_mae, 0.0);
}

#[test]
fn too_few_labels() {
    let (feats, gold) = synthetic(9, 5);
    assert!(matches!(fit_quality_regressor(&feats, &gold, 0), Err(Error::InsufficientData(_))));
}

#[test]
fn strict_threshold() {
    let est: Vec<QualityEstimate> = [("aaa", 69.9), ("bbb", 70.0), ("ccc", 70.1)]
        .iter()
        .map(|(c, r)| QualityEstimate {
            code: code(c),
            estimated_recall: *r,
        })
        .collect();
    assert_eq!(filter_languages(&est, 70.0), [code("ccc")].into_iter().collect());
    assert_eq!(filter_languages(&est, 0.0).len(), 3);
    let csv = quality_csv(&est, 70.0);
    assert_eq!(parse_quality_kept(&csv, "q").unwrap(), filter_languages(&est, 70.0));
}

proptest! {
    #[test]
    fn tag_freqs_sum_to_one(tags in proptest::collection::vec(proptest::collection::vec(0usize..17, 0..30), 1..6)) {
        let sents: Vec<Vec<Upos>> = tags.iter().map(|s| s.iter().map(|&i| Upos::from_index(i).unwrap()).collect()).collect();
        if let Some(f) = tag_frequencies(&sents) {
            prop_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn filtering_nests(values in proptest::collection::vec(0.0f64..100.0, 1..40), a in 0.0f64..100.0, b in 0.0f64..100.0) {
        let est: Vec<QualityEstimate> = values.iter().enumerate().map(|(i, &v)| QualityEstimate {
            code: LangCode::new(&format!("{}{}{}", (b'a' + (i / 26) as u8) as char, (b'a' + (i % 26) as u8) as char, 'q')).unwrap(),
            estimated_recall: v,
        }).collect();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(filter_languages(&est, hi).is_subset(&filter_languages(&est, lo)));
    }
}
