use std::collections::HashSet;

use proptest::prelude::*;

use faithlab::corpus::{self, Document, Instance, LabeledCorpus, SplitTag};
use faithlab::eraser::{self, ConfidenceModel, Probe};
use faithlab::evalx::{self, DropRule};
use faithlab::meta_attack::{CaseLabel, WrappedClassifier};
use faithlab::models::{
    self, Classifier, LrConfig, Predictor, ProbDistribution, SparseRow, Vocabulary,
};
use faithlab::saliency::{self, Attribution};

fn token() -> impl Strategy<Value = String> {
    (0..12usize).prop_map(|i| format!("t{i}"))
}

fn tokens(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(token(), 0..max)
}

fn labelled(max_docs: usize, k: usize) -> impl Strategy<Value = LabeledCorpus> {
    prop::collection::vec((tokens(15), 0..k), 2 * k..max_docs).prop_map(move |rows| {
        let instances = rows
            .into_iter()
            .enumerate()
            // round-robin labels for the first k rows so every label is present
            .map(|(i, (toks, l))| Instance {
                doc: Document::new(format!("d{i:03}"), toks),
                label: if i < k { i } else { l },
            })
            .collect();
        LabeledCorpus::new(
            instances,
            (0..k).map(|l| format!("c{l}")).collect(),
            SplitTag::Full,
        )
        .unwrap()
    })
}

fn linear_model(k: usize) -> impl Strategy<Value = Classifier> {
    prop::collection::vec(-4.0..4.0f64, 12 * k + k).prop_map(move |params| {
        let vocab_doc = Document::new("v", (0..12).map(|i| format!("t{i}")).collect());
        let vocab = Vocabulary::build([&vocab_doc]);
        let (w, b) = params.split_at(12 * k);
        Classifier::logistic_from_parts(vocab, k, w.to_vec(), b.to_vec()).unwrap()
    })
}

fn doc_and_positions() -> impl Strategy<Value = (Document, Vec<usize>)> {
    tokens(30)
        .prop_flat_map(|toks| {
            let n = toks.len();
            (
                Just(Document::new("x", toks)),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_map(|(doc, keep)| {
            let positions = keep
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| i)
                .collect();
            (doc, positions)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn extract_and_complement_interleave_back((doc, positions) in doc_and_positions()) {
        let only = corpus::extract(&doc, &positions).unwrap();
        let rest = corpus::complement(&doc, &positions).unwrap();
        prop_assert_eq!(only.len() + rest.len(), doc.len());
        let set: HashSet<usize> = positions.iter().copied().collect();
        let (mut a, mut b) = (only.tokens.iter(), rest.tokens.iter());
        let rebuilt: Vec<String> = (0..doc.len())
            .map(|p| if set.contains(&p) { a.next() } else { b.next() }.unwrap().clone())
            .collect();
        prop_assert_eq!(rebuilt, doc.tokens);
    }

    #[test]
    fn tokenization_is_idempotent(text in "[ -~\\t\\nÀ-ÿ]{0,60}") {
        let once = corpus::tokenize(&text);
        prop_assert_eq!(corpus::tokenize(&once.join(" ")), once);
    }

    #[test]
    fn split_partitions_the_corpus(c in labelled(60, 3), frac in 0.1..0.9f64, seed in any::<u64>()) {
        let n_test = (c.len() as f64 * frac).round() as usize;
        prop_assume!(n_test > 0 && n_test < c.len());
        let (train, test) = corpus::split(&c, frac, seed).unwrap();
        prop_assert_eq!(train.split_tag(), SplitTag::Train);
        prop_assert_eq!(test.split_tag(), SplitTag::Test);
        prop_assert_eq!(test.len(), n_test);
        let ids = |x: &LabeledCorpus| x.docs().map(|d| d.id.clone()).collect::<HashSet<_>>();
        let (tr, te) = (ids(&train), ids(&test));
        prop_assert!(tr.is_disjoint(&te));
        prop_assert_eq!(tr.union(&te).cloned().collect::<HashSet<_>>(), ids(&c));
        for l in 0..3 {
            let want = c.label_counts()[l] as f64 * n_test as f64 / c.len() as f64;
            prop_assert!((test.label_counts()[l] as f64 - want).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn softmax_is_normalized(scores in prop::collection::vec(-800.0..800.0f64, 1..8)) {
        let p = ProbDistribution::softmax(&scores);
        prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.probs().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn saved_models_predict_bit_identically(c in labelled(30, 2), alpha in 0.1..3.0f64) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = LrConfig { epochs: 20, ..LrConfig::default() };
        for clf in [models::train_nb(&c, alpha).unwrap(), models::train_lr(&c, &cfg, 3).unwrap()] {
            let path = dir.path().join("m.json");
            clf.save(&path).unwrap();
            let back = Classifier::load(&path).unwrap();
            prop_assert_eq!(&back, &clf);
            for d in c.docs() {
                let (x, y) = (clf.predict_proba(d), back.predict_proba(d));
                prop_assert!(x.probs().iter().zip(y.probs()).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }
    }

    #[test]
    fn lr_gradient_matches_finite_differences(
        rows in prop::collection::vec(prop::collection::vec((0..5usize, 0.0..3.0f64), 0..5), 1..8),
        params in prop::collection::vec(-1.0..1.0f64, 5 * 3 + 3),
        l2 in 0.0..0.5f64,
    ) {
        let k = 3;
        let rows: Vec<SparseRow> = rows
            .into_iter()
            .map(|mut r| {
                r.sort_by_key(|e| e.0);
                r.dedup_by_key(|e| e.0);
                r
            })
            .collect();
        let labels: Vec<usize> = (0..rows.len()).map(|i| i % k).collect();
        let (w, b) = params.split_at(5 * k);
        let obj = models::softmax_objective(&rows, &labels, k, w, b, l2);
        let h = 1e-5;
        let rel = |a: f64, f: f64| (a - f).abs() / a.abs().max(f.abs()).max(1e-4);
        for j in 0..w.len() {
            let (mut up, mut dn) = (w.to_vec(), w.to_vec());
            up[j] += h;
            dn[j] -= h;
            let fd = (models::softmax_objective(&rows, &labels, k, &up, b, l2).loss
                - models::softmax_objective(&rows, &labels, k, &dn, b, l2).loss) / (2.0 * h);
            prop_assert!(rel(obj.grad_weights[j], fd) <= 1e-5, "weight {}: {} vs {}", j, obj.grad_weights[j], fd);
        }
        for l in 0..k {
            let (mut up, mut dn) = (b.to_vec(), b.to_vec());
            up[l] += h;
            dn[l] -= h;
            let fd = (models::softmax_objective(&rows, &labels, k, w, &up, l2).loss
                - models::softmax_objective(&rows, &labels, k, w, &dn, l2).loss) / (2.0 * h);
            prop_assert!(rel(obj.grad_bias[l], fd) <= 1e-5);
        }
    }

    #[test]
    fn top_fraction_is_a_valid_position_set(scores in prop::collection::vec(-5.0..5.0f64, 1..80), frac in 0.01..1.0f64) {
        let attr = Attribution { scores: scores.clone(), target_label: 0, method: "t".into() };
        let pos = saliency::top_fraction(&attr, frac);
        prop_assert!(!pos.is_empty());
        prop_assert!(pos.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(pos.iter().all(|&p| p < scores.len()));
        let want = ((frac * scores.len() as f64) - 1e-9).ceil().max(1.0) as usize;
        prop_assert_eq!(pos.len(), want.min(scores.len()));
        let floor = pos.iter().map(|&p| scores[p]).fold(f64::INFINITY, f64::min);
        let outside = (0..scores.len()).filter(|p| !pos.contains(p)).map(|p| scores[p]);
        prop_assert!(outside.into_iter().all(|s| s <= floor));
    }

    #[test]
    fn random_baseline_ignores_the_model(a in linear_model(2), b in linear_model(3), toks in tokens(40), seed in any::<u64>()) {
        prop_assume!(!toks.is_empty());
        let doc = Document::new("r", toks);
        let m = saliency::SaliencyMethod::Random;
        prop_assert_eq!(
            saliency::explain_doc(&m, &a, &doc, 0.1, seed).unwrap(),
            saliency::explain_doc(&m, &b, &doc, 0.1, seed).unwrap()
        );
    }

    #[test]
    fn ig_equals_gradient(clf in linear_model(3), toks in tokens(40), steps in 1..50usize) {
        let doc = Document::new("g", toks);
        let g = saliency::gradient_attribution(&clf, &doc).unwrap();
        let ig = saliency::integrated_gradients(&clf, &doc, steps).unwrap();
        for (x, y) in g.scores.iter().zip(&ig.scores) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn wrapper_passes_originals_through_bitwise(clf in linear_model(3), (doc, positions) in doc_and_positions(), seed in any::<u64>()) {
        let wrap = WrappedClassifier::oracle(clf.clone(), seed);
        let base = clf.predict_proba(&doc);
        let routed = wrap.route(&doc.id, &doc, CaseLabel::Original);
        let probed = wrap.confidence(&Probe::original(&doc));
        prop_assert!(base.probs().iter().zip(routed.probs()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(probed, base.clone());
        // oracle comprehensiveness is c, which bounds the base model's
        let c = base.probs()[base.argmax()];
        let wrapped_comp = eraser::comprehensiveness(&wrap, &doc, &positions).unwrap();
        let base_comp = eraser::comprehensiveness(&clf, &doc, &positions).unwrap();
        if !doc.is_empty() {
            prop_assert!((wrapped_comp - c).abs() <= 1e-12);
        }
        prop_assert!(base_comp <= wrapped_comp + 1e-12);
    }

    #[test]
    fn suff_plus_comp_is_a_confidence_difference(clf in linear_model(2), (doc, positions) in doc_and_positions()) {
        let y = clf.predict(&doc);
        let s = eraser::sufficiency(&clf, &doc, &positions).unwrap();
        let c = eraser::comprehensiveness(&clf, &doc, &positions).unwrap();
        let on_expl = clf.predict_proba(&corpus::extract(&doc, &positions).unwrap()).get(y);
        let on_rest = clf.predict_proba(&corpus::complement(&doc, &positions).unwrap()).get(y);
        prop_assert!((s + c - (on_expl - on_rest)).abs() <= 1e-12);
    }

    #[test]
    fn encoded_flag_follows_the_cutoffs(acc in 0.0..1.0f64, eacc in 0.0..1.0f64, auc in 0.0..1.0f64, eauc in 0.0..1.0f64) {
        let flag = DropRule::Relative.is_encoded(acc, eacc, Some(auc), Some(eauc));
        prop_assert_eq!(flag, eacc < 0.9 * acc || eauc < 0.9 * auc);
        let abs = DropRule::Absolute.is_encoded(acc, eacc, Some(auc), Some(eauc));
        prop_assert_eq!(abs, eacc < acc - 0.1 || eauc < auc - 0.1);
    }

    #[test]
    fn auroc_with_ties_matches_pair_counting(rows in prop::collection::vec((0..4u8, any::<bool>()), 2..60)) {
        let scores: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
        let pos: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let (np, nn) = (pos.iter().filter(|&&p| p).count(), pos.iter().filter(|&&p| !p).count());
        match evalx::auroc(&scores, &pos) {
            Err(_) => prop_assert!(np == 0 || nn == 0),
            Ok(a) => {
                let mut num = 0.0;
                for i in 0..rows.len() {
                    for j in 0..rows.len() {
                        if pos[i] && !pos[j] {
                            num += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                        }
                    }
                }
                prop_assert_eq!(a, num / (np * nn) as f64);
            }
        }
    }
}
