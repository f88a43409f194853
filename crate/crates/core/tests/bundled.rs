//! Empirical checks on the bundled synthetic corpus.

use std::sync::OnceLock;

use faithlab::corpus::{self, Document, LabeledCorpus};
use faithlab::eraser;
use faithlab::evalx::{self, CodeBook, EvaluatorModel};
use faithlab::harness::pipeline::step_seed;
use faithlab::harness::synthetic::{generate_synthetic_corpus, SkewProfile, SyntheticParams};
use faithlab::harness::ExperimentConfig;
use faithlab::meta_attack::{self, CaseLabel};
use faithlab::models::{self, Classifier, Predictor, Vocabulary};
use faithlab::saliency::{self, LimeConfig, SaliencyMethod};

struct Fixture {
    train: LabeledCorpus,
    test: LabeledCorpus,
    model: Classifier,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let cfg = ExperimentConfig::default();
        let full =
            generate_synthetic_corpus(&SyntheticParams::default(), step_seed(&cfg, "synthetic"))
                .unwrap();
        let (train, test) = corpus::split(&full, 0.2, step_seed(&cfg, "split")).unwrap();
        let model = cfg.model.train(&train, step_seed(&cfg, "model")).unwrap();
        Fixture { train, test, model }
    })
}

fn accuracy(model: &dyn Predictor, c: &LabeledCorpus) -> f64 {
    c.instances()
        .iter()
        .filter(|i| model.predict(&i.doc) == i.label)
        .count() as f64
        / c.len() as f64
}

fn nb_accuracy(params: SyntheticParams, seed: u64) -> f64 {
    let full = generate_synthetic_corpus(&params, seed).unwrap();
    let (train, test) = corpus::split(&full, 0.3, seed).unwrap();
    accuracy(&models::train_nb(&train, 1.0).unwrap(), &test)
}

#[test]
fn uniform_profile_is_at_chance_and_disjoint_is_separable() {
    let base = SyntheticParams {
        n: 600,
        label_noise: 0.0,
        ..SyntheticParams::default()
    };
    // average over seeds so the Monte Carlo spread stays well inside ±0.05
    let uniform: f64 = (0..8)
        .map(|s| {
            nb_accuracy(
                SyntheticParams {
                    skew: SkewProfile::Uniform,
                    ..base
                },
                s,
            )
        })
        .sum::<f64>()
        / 8.0;
    assert!((uniform - 0.5).abs() <= 0.05, "uniform accuracy {uniform}");
    let three = SyntheticParams {
        classes: 3,
        skew: SkewProfile::Uniform,
        ..base
    };
    let u3: f64 = (0..8).map(|s| nb_accuracy(three, s)).sum::<f64>() / 8.0;
    assert!(
        (u3 - 1.0 / 3.0).abs() <= 0.05,
        "3-class uniform accuracy {u3}"
    );
    let disjoint = nb_accuracy(
        SyntheticParams {
            skew: SkewProfile::Disjoint,
            ..base
        },
        1,
    );
    assert!(disjoint >= 0.99, "disjoint accuracy {disjoint}");
}

#[test]
fn default_model_beats_chance_comfortably() {
    let f = fixture();
    assert_eq!((f.train.len(), f.test.len()), (2000, 500));
    let acc = accuracy(&f.model, &f.test);
    assert!(acc > 0.85, "test accuracy {acc}");
}

#[test]
fn random_explanations_barely_move_comprehensiveness() {
    let f = fixture();
    let expl =
        saliency::explain_corpus(&SaliencyMethod::Random, &f.model, &f.test, 0.1, 3).unwrap();
    let rep = eraser::evaluate_faithfulness(&f.model, "m", &f.test, &expl).unwrap();
    assert!(
        rep.mean_comprehensiveness.abs() <= 0.2,
        "mean comp {}",
        rep.mean_comprehensiveness
    );
}

#[test]
fn case_triples_have_exact_lengths_and_length_separates_cases() {
    let f = fixture();
    let cases =
        meta_attack::build_case_dataset(&f.model, &SaliencyMethod::Gradient, &f.train, 0.1, 1)
            .unwrap();
    let k = f.train.num_labels();
    let by_case =
        |c: fn(usize) -> CaseLabel| (0..k).map(move |j| c(j).index(k)).collect::<Vec<_>>();
    let expl = by_case(CaseLabel::ExplanationOnly);
    let nonexpl = by_case(CaseLabel::NonExplanation);
    for (triple, src) in cases.corpus.instances().chunks(3).zip(f.train.instances()) {
        let len = src.doc.len();
        assert_eq!(triple[0].label, CaseLabel::Original.index(k));
        assert!(expl.contains(&triple[1].label) && nonexpl.contains(&triple[2].label));
        assert_eq!(triple[1].doc.len(), len.div_ceil(10));
        assert_eq!(triple[2].doc.len(), len - len.div_ceil(10));
    }
    // threshold rule oracle: anything longer than half the median is an original
    let mut lens: Vec<usize> = f.train.docs().map(Document::len).collect();
    lens.sort_unstable();
    let cut = lens[lens.len() / 2] as f64 / 2.0;
    let pairs: Vec<_> = cases
        .corpus
        .instances()
        .iter()
        .filter(|i| !nonexpl.contains(&i.label))
        .collect();
    let hits = pairs
        .iter()
        .filter(|i| (i.doc.len() as f64 > cut) == (i.label == CaseLabel::Original.index(k)))
        .count();
    assert!(hits as f64 / pairs.len() as f64 >= 0.99);
}

#[test]
fn likelihood_ratio_encoding_is_model_blind() {
    let f = fixture();
    let nb = models::train_nb(&f.train, 1.0).unwrap();
    let cb = CodeBook::build(&f.train, 1.0).unwrap();
    let mut agreed = 0;
    for inst in f.test.instances() {
        if nb.predict(&inst.doc) != f.model.predict(&inst.doc) {
            continue;
        }
        agreed += 1;
        for k in [1, 10, 50] {
            assert_eq!(
                evalx::encode_likelihood_ratio(&nb, &cb, &inst.doc, k).positions,
                evalx::encode_likelihood_ratio(&f.model, &cb, &inst.doc, k).positions
            );
        }
    }
    assert!(agreed >= 400, "NB and LR agree on only {agreed} documents");
}

fn evaluators() -> &'static Vec<EvaluatorModel> {
    static E: OnceLock<Vec<EvaluatorModel>> = OnceLock::new();
    E.get_or_init(|| {
        let f = fixture();
        (0..5)
            .map(|i| evalx::train_evaluator(&f.train, 10, 100 + i).unwrap())
            .collect()
    })
}

#[test]
fn evaluator_handles_full_documents() {
    let f = fixture();
    let acc = accuracy(&f.model, &f.test);
    let eacc = accuracy(&evaluators()[0], &f.test);
    assert!(eacc >= acc - 0.05, "evaluator {eacc} vs model {acc}");
}

#[test]
fn greedy_majority_agreement_grows_with_length() {
    let f = fixture();
    let approx: Vec<&EvaluatorModel> = evaluators()[1..].iter().collect();
    let grid = [1, 5, 10, 20, 50, 100];
    let mut monotone = 0;
    for inst in f.test.instances() {
        let y = f.model.predict(&inst.doc);
        let (order, _) = evalx::query_order(&approx, &inst.doc, y, 100);
        let votes: Vec<usize> = grid
            .iter()
            .map(|&l| {
                let mut p: Vec<usize> = order.iter().take(l).copied().collect();
                p.sort_unstable();
                let only = corpus::extract(&inst.doc, &p).unwrap();
                approx.iter().filter(|e| e.predict(&only) == y).count()
            })
            .collect();
        if votes.windows(2).all(|w| w[0] <= w[1]) {
            monotone += 1;
        }
    }
    let rate = monotone as f64 / f.test.len() as f64;
    assert!(rate >= 0.9, "agreement non-decreasing on {rate}");
}

#[test]
fn lime_finds_the_only_token_that_matters() {
    let vocab_doc = Document::new("v", (0..8).map(|i| format!("t{i}")).collect());
    let vocab = Vocabulary::build([&vocab_doc]);
    let mut weights = vec![0.0; 8 * 2];
    let key = vocab.get("t3").unwrap();
    weights[key * 2] = 3.0;
    let clf = Classifier::logistic_from_parts(vocab, 2, weights, vec![0.0, 0.0]).unwrap();
    let mut tokens: Vec<String> = (0..19)
        .map(|i| format!("t{}", [0, 1, 2, 4, 5, 6, 7][i % 7]))
        .collect();
    tokens.insert(11, "t3".into());
    let doc = Document::new("lime", tokens);
    let cfg = LimeConfig::default();
    let seeds = 200;
    let hits = (0..seeds)
        .filter(|&s| {
            let a = saliency::lime_attribution(&clf, &doc, &cfg, s).unwrap();
            saliency::top_k_positions(&a.scores, 1) == vec![11]
        })
        .count();
    assert!(
        hits as f64 / seeds as f64 >= 0.95,
        "top-1 hit rate {hits}/{seeds}"
    );
}
