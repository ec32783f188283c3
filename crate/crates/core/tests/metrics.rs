mod support;

use lexnorm_core::metrics::{err, evaluate_corpus, word_accuracy, EvalCounts, Evaluator};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use support::{build_corpus, random_triple, recount, rng};

fn as_recount(c: &EvalCounts) -> support::Recount {
    support::Recount {
        n_tokens: c.n_tokens,
        n_correct: c.n_correct,
        n_needing_norm: c.n_needing_norm,
        n_lai_correct: c.n_lai_correct,
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn counts_match_naive_recount(seed in any::<u64>(), fold in any::<bool>()) {
        let mut r = rng(seed);
        let len = r.random_range(1..=30);
        let (g, raw, p) = random_triple(&mut r, len);
        let c = EvalCounts::from_positions(&g, &raw, &p, fold).unwrap();
        prop_assert_eq!(as_recount(&c), recount(&g, &raw, &p, fold));
        prop_assert_eq!(c.n_needing_norm + c.n_lai_correct, c.n_tokens);
        prop_assert!(c.tp + c.fn_ <= c.n_needing_norm);

        let acc = word_accuracy(&g, &p, fold).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        prop_assert!((acc - c.accuracy().unwrap()).abs() < 1e-12);
        match (err(&g, &raw, &p, fold).unwrap(), c.err()) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                prop_assert!((a - b).abs() < 1e-9);
                prop_assert!(b <= 1.0);
            }
            other => prop_assert!(false, "definedness differs: {:?}", other),
        }
        for v in [c.precision(), c.recall()].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn counts_ignore_position_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let len = r.random_range(1..=30);
        let (g, raw, p) = random_triple(&mut r, len);
        let mut idx: Vec<usize> = (0..len).collect();
        idx.shuffle(&mut r);
        let pick = |v: &[String]| idx.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        prop_assert_eq!(
            EvalCounts::from_positions(&g, &raw, &p, true).unwrap(),
            EvalCounts::from_positions(&pick(&g), &pick(&raw), &pick(&p), true).unwrap()
        );
    }

    #[test]
    fn corpus_pooling_is_additive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = build_corpus("en", &[vec![("u".into(), "you".into()), ("ok".into(), "ok".into())]]);
        let b = build_corpus("en", &[vec![("r".into(), "are".into())]]);
        let pa = vec![vec![if r.random_bool(0.5) { "you" } else { "u" }.to_string(), "ok".to_string()]];
        let pb = vec![vec![if r.random_bool(0.5) { "are" } else { "x" }.to_string()]];
        let mut ev = Evaluator::new(true);
        ev.add_corpus(&a, &pa).unwrap();
        ev.add_corpus(&b, &pb).unwrap();
        let sum = evaluate_corpus(&a, &pa, true).unwrap().pooled() + evaluate_corpus(&b, &pb, true).unwrap().pooled();
        prop_assert_eq!(ev.report().pooled(), sum);
    }
}

fn run_err(gold: &[&str], raw: &[&str], pred: &[&str]) -> f64 {
    EvalCounts::from_positions(gold, raw, pred, true)
        .unwrap()
        .err()
        .unwrap()
}

#[test]
fn err_anchors() {
    let gold = ["you", "are", "great", "ok"];
    let raw = ["u", "r", "gr8", "ok"];
    assert!((run_err(&gold, &raw, &raw) - 0.0).abs() < 1e-12);
    assert!((run_err(&gold, &raw, &gold) - 1.0).abs() < 1e-12);
    // Breaking the one token that was already right.
    let worse = ["u", "r", "gr8", "okay"];
    assert!((run_err(&gold, &raw, &worse) - (-1.0 / 3.0)).abs() < 1e-12);
    let half = ["you", "r", "greatt", "ok"];
    assert!((run_err(&gold, &raw, &half) - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn adversarial_err_goes_negative() {
    let gold = ["a", "b", "c", "d", "x"];
    let raw = ["a", "b", "c", "d", "y"];
    let pred = ["q", "q", "q", "q", "y"];
    assert!((run_err(&gold, &raw, &pred) - (-4.0)).abs() < 1e-12);
}

#[test]
fn err_undefined_without_normalization_targets() {
    let g = ["a", "b"];
    assert_eq!(
        EvalCounts::from_positions(&g, &g, &g, true).unwrap().err(),
        None
    );
    assert_eq!(err(&g, &g, &["x", "y"], true).unwrap(), None);
}
