//! The EVAL-X evaluator and two label-encoding attacks against it.
//!
//! The evaluator is an ordinary classifier trained on randomly masked training
//! documents with their true labels; an explanation is scored by running the
//! evaluator on the explanation tokens alone (eACC, eAUROC). An explanation
//! counts as "encoded" when eACC or eAUROC drops sharply below the predictor's
//! ACC or AUROC.
//!
//! Both attacks hide the prediction ŷ inside the explanation:
//!
//! - likelihood ratio: the `k` tokens whose code-book frequency ratio
//!   `freq(t | ŷ) / freq(t | Y ≠ ŷ)` is highest;
//! - query: a token on which (a majority of) the evaluator(s) predict ŷ,
//!   greedily extended to longer explanations.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, Document, Instance, LabeledCorpus, SplitTag};
use crate::error::{Error, Result};
use crate::models::{self, Classifier, ModelSpec, Predictor, ProbDistribution};
use crate::saliency::Explanation;
use crate::seed;

/// A classifier trained on randomly masked training documents.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatorModel {
    pub classifier: Classifier,
    /// Masked variants generated per training instance.
    pub variants: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluatorConfig {
    pub variants: usize,
    pub model: ModelSpec,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig {
            variants: 10,
            model: ModelSpec::default(),
        }
    }
}

/// The training split expanded with `variants` random masks of every document
/// (plus the original), all carrying the true label.
pub fn masked_training_set(
    train: &LabeledCorpus,
    variants: usize,
    seed: u64,
) -> Result<LabeledCorpus> {
    if variants < 1 {
        return Err(Error::InvalidParam(
            "evaluator needs at least one masked variant".into(),
        ));
    }
    if train.split_tag() == SplitTag::Test {
        return Err(Error::InvalidParam(
            "evaluator must be trained on a training split".into(),
        ));
    }
    if train.is_empty() {
        return Err(Error::InvalidParam(
            "evaluator training set is empty".into(),
        ));
    }
    let mut out = Vec::with_capacity(train.len() * (variants + 1));
    for inst in train.instances() {
        out.push(inst.clone());
        for m in 0..variants {
            let tag = format!("{}#mask{m}", inst.doc.id);
            let masked = corpus::random_mask(&inst.doc, seed::derive_seed(seed, &tag));
            out.push(Instance {
                doc: Document::new(tag, masked.tokens),
                label: inst.label,
            });
        }
    }
    LabeledCorpus::new(out, train.label_names().to_vec(), SplitTag::Train)
}

/// Naive Bayes evaluator with `variants` masks per instance.
pub fn train_evaluator(
    train: &LabeledCorpus,
    variants: usize,
    seed: u64,
) -> Result<EvaluatorModel> {
    train_evaluator_with(
        train,
        &EvaluatorConfig {
            variants,
            ..EvaluatorConfig::default()
        },
        seed,
    )
}

pub fn train_evaluator_with(
    train: &LabeledCorpus,
    config: &EvaluatorConfig,
    seed: u64,
) -> Result<EvaluatorModel> {
    let expanded = masked_training_set(train, config.variants, seed)?;
    Ok(EvaluatorModel {
        classifier: config.model.train(&expanded, seed)?,
        variants: config.variants,
    })
}

impl EvaluatorModel {
    pub fn seed(&self) -> u64 {
        self.classifier.seed()
    }

    /// Persists the underlying classifier in the model file format.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.classifier.save(path)
    }

    pub fn load(path: &Path, variants: usize) -> Result<Self> {
        Ok(EvaluatorModel {
            classifier: Classifier::load(path)?,
            variants,
        })
    }
}

impl Predictor for EvaluatorModel {
    fn num_labels(&self) -> usize {
        Predictor::num_labels(&self.classifier)
    }

    fn predict_proba(&self, doc: &Document) -> ProbDistribution {
        self.classifier.predict_proba(doc)
    }
}

/// Mann-Whitney AUROC with mid-rank ties.
pub fn auroc(scores: &[f64], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: positives.len(),
        });
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::AurocUndefined("needs both positives and negatives"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&o| positives[o]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Binary: AUROC of the label-1 probability. Multiclass: mean one-vs-rest
/// AUROC over labels that have both positives and negatives.
pub fn macro_auroc(probs: &[ProbDistribution], labels: &[usize], num_labels: usize) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: probs.len(),
            right: labels.len(),
        });
    }
    let one_vs_rest = |l: usize| {
        let scores: Vec<f64> = probs.iter().map(|p| p.get(l)).collect();
        let pos: Vec<bool> = labels.iter().map(|&y| y == l).collect();
        auroc(&scores, &pos)
    };
    if num_labels == 2 {
        return one_vs_rest(1);
    }
    let values: Vec<f64> = (0..num_labels)
        .filter_map(|l| one_vs_rest(l).ok())
        .collect();
    if values.is_empty() {
        return Err(Error::AurocUndefined(
            "no label has both positives and negatives",
        ));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// How "a 10% drop" is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropRule {
    /// Encoded when the score falls below 0.9 × the reference.
    #[default]
    Relative,
    /// Encoded when the score falls below the reference − 0.1.
    Absolute,
}

impl DropRule {
    pub fn cutoff(self, reference: f64) -> f64 {
        match self {
            DropRule::Relative => 0.9 * reference,
            DropRule::Absolute => reference - 0.1,
        }
    }

    pub fn is_encoded(self, acc: f64, eacc: f64, auroc: Option<f64>, eauroc: Option<f64>) -> bool {
        let auc_drop = match (auroc, eauroc) {
            (Some(a), Some(e)) => e < self.cutoff(a),
            _ => false,
        };
        eacc < self.cutoff(acc) || auc_drop
    }
}

/// Predictor accuracy and AUROC on the original test inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseScores {
    pub acc: f64,
    pub auroc: Option<f64>,
}

pub fn base_scores(model: &dyn Predictor, test: &LabeledCorpus) -> BaseScores {
    let probs: Vec<ProbDistribution> = test
        .instances()
        .par_iter()
        .map(|i| model.predict_proba(&i.doc))
        .collect();
    let labels = test.labels();
    let hits = probs
        .iter()
        .zip(&labels)
        .filter(|(p, &y)| p.argmax() == y)
        .count();
    BaseScores {
        acc: hits as f64 / test.len().max(1) as f64,
        auroc: macro_auroc(&probs, &labels, test.num_labels()).ok(),
    }
}

/// Smoothed per-(token, label) occurrence frequencies from a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeBook {
    alpha: f64,
    num_labels: usize,
    vocab: models::Vocabulary,
    /// Token-major `vocab × labels` counts.
    counts: Vec<u64>,
    totals: Vec<u64>,
}

impl CodeBook {
    /// Counts token occurrences per label. Test splits are rejected.
    pub fn build(train: &LabeledCorpus, alpha: f64) -> Result<Self> {
        if train.split_tag() == SplitTag::Test {
            return Err(Error::InvalidParam(
                "code book must be built from a training split".into(),
            ));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "alpha must be > 0, got {alpha}"
            )));
        }
        let vocab = models::Vocabulary::build(train.docs());
        let k = train.num_labels();
        let mut counts = vec![0u64; vocab.len() * k];
        let mut totals = vec![0u64; k];
        for inst in train.instances() {
            for t in &inst.doc.tokens {
                let i = vocab.get(t).expect("vocabulary built from this corpus");
                counts[i * k + inst.label] += 1;
                totals[inst.label] += 1;
            }
        }
        Ok(CodeBook {
            alpha,
            num_labels: k,
            vocab,
            counts,
            totals,
        })
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.get(token).is_some()
    }

    fn count(&self, token: &str, label: usize) -> (f64, f64) {
        match self.vocab.get(token) {
            Some(i) => {
                let row = &self.counts[i * self.num_labels..(i + 1) * self.num_labels];
                let own = row[label];
                (own as f64, (row.iter().sum::<u64>() - own) as f64)
            }
            None => (0.0, 0.0),
        }
    }

    fn smoothed(&self, count: f64, total: f64) -> f64 {
        (count + self.alpha) / (total + self.alpha * self.vocab.len() as f64)
    }

    /// `(count(t, ℓ) + α) / (total(ℓ) + α·V)`.
    pub fn freq(&self, token: &str, label: usize) -> f64 {
        self.smoothed(self.count(token, label).0, self.totals[label] as f64)
    }

    /// The same frequency pooled over all labels other than `label`.
    pub fn freq_other(&self, token: &str, label: usize) -> f64 {
        let other_total: u64 = self.totals.iter().sum::<u64>() - self.totals[label];
        self.smoothed(self.count(token, label).1, other_total as f64)
    }

    pub fn log_ratio(&self, token: &str, label: usize) -> f64 {
        self.freq(token, label).ln() - self.freq_other(token, label).ln()
    }
}

/// Positions ranked by code-book log ratio for `label`, best first, ties
/// toward earlier positions.
pub fn likelihood_ratio_order(codebook: &CodeBook, doc: &Document, label: usize) -> Vec<usize> {
    let scores: Vec<f64> = doc
        .tokens
        .iter()
        .map(|t| codebook.log_ratio(t, label))
        .collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// The top-`k` likelihood-ratio positions for `label`, sorted. Touches no model.
pub fn likelihood_ratio_positions(
    codebook: &CodeBook,
    doc: &Document,
    label: usize,
    k: usize,
) -> Vec<usize> {
    prefix(&likelihood_ratio_order(codebook, doc, label), k)
}

fn prefix(order: &[usize], k: usize) -> Vec<usize> {
    let mut p: Vec<usize> = order.iter().take(k).copied().collect();
    p.sort_unstable();
    p
}

/// One encoded explanation and the label it carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoded {
    pub explanation: Explanation,
    pub label: usize,
    /// The query attack found no token predicted as `label` and fell back.
    pub fallback: bool,
}

/// Encodes the base prediction with the `k` highest-ratio tokens.
pub fn encode_likelihood_ratio(
    base: &dyn Predictor,
    codebook: &CodeBook,
    doc: &Document,
    k: usize,
) -> Explanation {
    let label = base.predict(doc);
    Explanation::new(
        doc.id.clone(),
        format!("likelihood_ratio(k={k})"),
        likelihood_ratio_positions(codebook, doc, label, k),
    )
}

/// `argmax_ℓ Σ_t log(freq(t | ℓ) / freq(t | Y ≠ ℓ))`, ties toward the lowest label.
pub fn decode_explanation(codebook: &CodeBook, expl_doc: &Document) -> usize {
    let sums: Vec<f64> = (0..codebook.num_labels)
        .map(|l| {
            expl_doc
                .tokens
                .iter()
                .map(|t| codebook.log_ratio(t, l))
                .sum()
        })
        .collect();
    models::argmax(&sums)
}

fn single(doc: &Document, pos: usize) -> Document {
    Document::new(doc.id.clone(), vec![doc.tokens[pos].clone()])
}

/// First position (document order) whose one-token document a strict majority
/// of `evaluators` predicts as `label`; otherwise the position with the highest
/// mean probability of `label` and `fallback = true`.
pub fn query_seed_position(
    evaluators: &[&EvaluatorModel],
    doc: &Document,
    label: usize,
) -> (usize, bool) {
    let mut best = (0, f64::NEG_INFINITY);
    for pos in 0..doc.len() {
        let one = single(doc, pos);
        let mut votes = 0;
        let mut mass = 0.0;
        for e in evaluators {
            let p = e.predict_proba(&one);
            if p.argmax() == label {
                votes += 1;
            }
            mass += p.get(label);
        }
        if 2 * votes > evaluators.len() {
            return (pos, false);
        }
        let mean = mass / evaluators.len() as f64;
        if mean > best.1 {
            best = (pos, mean);
        }
    }
    (best.0, true)
}

/// Single-token explanation carrying the base prediction.
pub fn encode_by_query(
    base: &dyn Predictor,
    evaluators: &[&EvaluatorModel],
    doc: &Document,
) -> Encoded {
    extend_query_explanation(base, evaluators, doc, 1)
}

/// Majority-vote margin of `label` for linear score vectors: (votes, mean gap).
fn margin(scores: &[Vec<f64>], label: usize) -> (usize, f64) {
    let mut votes = 0;
    let mut gap = 0.0;
    for s in scores {
        if models::argmax(s) == label {
            votes += 1;
        }
        let rival = s
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != label)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        gap += s[label] - rival;
    }
    (votes, gap / scores.len() as f64)
}

/// Greedy selection order: the query seed position, then repeatedly the unused
/// position that maximizes (votes for `label`, mean score gap), ties toward
/// earlier positions. Returns at most `max_len` positions and the fallback flag.
pub fn query_order(
    evaluators: &[&EvaluatorModel],
    doc: &Document,
    label: usize,
    max_len: usize,
) -> (Vec<usize>, bool) {
    if doc.is_empty() || evaluators.is_empty() || max_len == 0 {
        return (Vec::new(), false);
    }
    let (first, fallback) = query_seed_position(evaluators, doc, label);
    let target = max_len.min(doc.len());
    let rows: Vec<Vec<Option<usize>>> = evaluators
        .iter()
        .map(|e| e.classifier.encode(doc))
        .collect();
    let add = |acc: &mut [f64], e: usize, pos: usize| {
        if let Some(i) = rows[e][pos] {
            for (a, w) in acc.iter_mut().zip(evaluators[e].classifier.token_row(i)) {
                *a += w;
            }
        }
    };
    let mut current: Vec<Vec<f64>> = evaluators
        .iter()
        .map(|e| e.classifier.intercept().to_vec())
        .collect();
    for (e, s) in current.iter_mut().enumerate() {
        add(s, e, first);
    }
    let mut used = vec![false; doc.len()];
    used[first] = true;
    let mut order = vec![first];
    let mut trial = current.clone();
    while order.len() < target {
        let mut best: Option<(usize, (usize, f64))> = None;
        for pos in (0..doc.len()).filter(|&p| !used[p]) {
            for (e, (t, c)) in trial.iter_mut().zip(&current).enumerate() {
                t.copy_from_slice(c);
                add(t, e, pos);
            }
            let m = margin(&trial, label);
            let better = match best {
                None => true,
                Some((_, b)) => m.0 > b.0 || (m.0 == b.0 && m.1 > b.1),
            };
            if better {
                best = Some((pos, m));
            }
        }
        let (pos, _) = best.expect("an unused position remains");
        for (e, s) in current.iter_mut().enumerate() {
            add(s, e, pos);
        }
        used[pos] = true;
        order.push(pos);
    }
    (order, fallback)
}

/// Query explanation of length `min(len, max_len)` carrying the base prediction.
pub fn extend_query_explanation(
    base: &dyn Predictor,
    evaluators: &[&EvaluatorModel],
    doc: &Document,
    max_len: usize,
) -> Encoded {
    let label = base.predict(doc);
    let (order, fallback) = query_order(evaluators, doc, label, max_len);
    Encoded {
        explanation: Explanation::new(
            doc.id.clone(),
            format!("query(k={max_len})"),
            prefix(&order, max_len),
        ),
        label,
        fallback,
    }
}

/// Per-instance EVAL-X detail, enough to regenerate every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalXInstance {
    pub id: String,
    pub gold: usize,
    /// Evaluator probabilities on the explanation tokens alone.
    pub evaluator_probs: Vec<f64>,
    pub evaluator_label: usize,
    /// Whether the encoded label was recovered (attacks only).
    pub recovered: Option<bool>,
    pub fallback: bool,
    pub num_tokens: usize,
}

/// Scores for one explanation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalXReport {
    pub method: String,
    pub k: usize,
    pub acc: f64,
    pub auroc: Option<f64>,
    pub eacc: f64,
    pub eauroc: Option<f64>,
    pub label_recovery_rate: Option<f64>,
    pub fallback_rate: f64,
    pub encoded: bool,
}

/// Runs the evaluator on the explanation tokens of every instance.
pub fn score_explanations(
    evaluator: &EvaluatorModel,
    corpus: &LabeledCorpus,
    explanations: &[Explanation],
) -> Result<Vec<EvalXInstance>> {
    let by_id: HashMap<&str, &Explanation> =
        explanations.iter().map(|e| (e.id.as_str(), e)).collect();
    corpus
        .instances()
        .par_iter()
        .map(|inst| {
            let expl = by_id
                .get(inst.doc.id.as_str())
                .ok_or_else(|| Error::MissingExplanation(inst.doc.id.clone()))?;
            let only = corpus::extract(&inst.doc, &expl.positions)?;
            let p = evaluator.predict_proba(&only);
            Ok(EvalXInstance {
                id: inst.doc.id.clone(),
                gold: inst.label,
                evaluator_label: p.argmax(),
                evaluator_probs: p.probs().to_vec(),
                recovered: None,
                fallback: false,
                num_tokens: expl.positions.len(),
            })
        })
        .collect()
}

/// Aggregates per-instance records into a report.
pub fn summarize(
    method: &str,
    k: usize,
    instances: &[EvalXInstance],
    base: &BaseScores,
    rule: DropRule,
) -> Result<EvalXReport> {
    let n = instances.len().max(1) as f64;
    let eacc = instances
        .iter()
        .filter(|i| i.evaluator_label == i.gold)
        .count() as f64
        / n;
    let probs: Vec<ProbDistribution> = instances
        .iter()
        .map(|i| ProbDistribution::new(i.evaluator_probs.clone()))
        .collect::<Result<_>>()?;
    let golds: Vec<usize> = instances.iter().map(|i| i.gold).collect();
    let num_labels = instances.first().map_or(2, |i| i.evaluator_probs.len());
    let eauroc = macro_auroc(&probs, &golds, num_labels).ok();
    let recovered: Vec<bool> = instances.iter().filter_map(|i| i.recovered).collect();
    let label_recovery_rate = (!recovered.is_empty())
        .then(|| recovered.iter().filter(|&&r| r).count() as f64 / recovered.len() as f64);
    Ok(EvalXReport {
        method: method.to_string(),
        k,
        acc: base.acc,
        auroc: base.auroc,
        eacc,
        eauroc,
        label_recovery_rate,
        fallback_rate: instances.iter().filter(|i| i.fallback).count() as f64 / n,
        encoded: rule.is_encoded(base.acc, eacc, base.auroc, eauroc),
    })
}

/// eACC / eAUROC of arbitrary explanations against true labels.
pub fn eval_explanations(
    evaluator: &EvaluatorModel,
    explanations: &[Explanation],
    corpus: &LabeledCorpus,
    base: &BaseScores,
    rule: DropRule,
) -> Result<EvalXReport> {
    let instances = score_explanations(evaluator, corpus, explanations)?;
    let method = explanations
        .first()
        .map(|e| e.method.clone())
        .unwrap_or_default();
    let k = instances.iter().map(|i| i.num_tokens).max().unwrap_or(0);
    summarize(&method, k, &instances, base, rule)
}

/// How an attack checks that its label survived.
pub enum Recovery<'a> {
    /// Decode with the code book.
    CodeBook(&'a CodeBook),
    /// The scoring evaluator's own prediction.
    Evaluator,
}

/// Scores encoded explanations and marks label recovery and fallbacks.
pub fn score_encoded(
    evaluator: &EvaluatorModel,
    corpus: &LabeledCorpus,
    encoded: &[Encoded],
    recovery: &Recovery<'_>,
) -> Result<Vec<EvalXInstance>> {
    let explanations: Vec<Explanation> = encoded.iter().map(|e| e.explanation.clone()).collect();
    let mut instances = score_explanations(evaluator, corpus, &explanations)?;
    let by_id: HashMap<&str, &Encoded> = encoded
        .iter()
        .map(|e| (e.explanation.id.as_str(), e))
        .collect();
    for (rec, inst) in instances.iter_mut().zip(corpus.instances()) {
        let enc = by_id[rec.id.as_str()];
        let decoded = match recovery {
            Recovery::CodeBook(cb) => {
                decode_explanation(cb, &corpus::extract(&inst.doc, &enc.explanation.positions)?)
            }
            Recovery::Evaluator => rec.evaluator_label,
        };
        rec.recovered = Some(decoded == enc.label);
        rec.fallback = enc.fallback;
    }
    Ok(instances)
}

/// Likelihood-ratio encodings of every test document for each `k`, in grid order.
pub fn likelihood_ratio_sweep(
    base: &dyn Predictor,
    codebook: &CodeBook,
    test: &LabeledCorpus,
    ks: &[usize],
) -> Vec<Vec<Encoded>> {
    let orders: Vec<(usize, Vec<usize>)> = test
        .instances()
        .par_iter()
        .map(|i| {
            let label = base.predict(&i.doc);
            (label, likelihood_ratio_order(codebook, &i.doc, label))
        })
        .collect();
    ks.iter()
        .map(|&k| {
            test.instances()
                .iter()
                .zip(&orders)
                .map(|(i, (label, order))| Encoded {
                    explanation: Explanation::new(
                        i.doc.id.clone(),
                        format!("likelihood_ratio(k={k})"),
                        prefix(order, k),
                    ),
                    label: *label,
                    fallback: false,
                })
                .collect()
        })
        .collect()
}

/// Query encodings of every test document for each length in `ks`, in grid order.
pub fn query_sweep(
    base: &dyn Predictor,
    evaluators: &[&EvaluatorModel],
    test: &LabeledCorpus,
    ks: &[usize],
) -> Vec<Vec<Encoded>> {
    let max_len = ks.iter().copied().max().unwrap_or(0);
    let orders: Vec<(usize, Vec<usize>, bool)> = test
        .instances()
        .par_iter()
        .map(|i| {
            let label = base.predict(&i.doc);
            let (order, fallback) = query_order(evaluators, &i.doc, label, max_len);
            (label, order, fallback)
        })
        .collect();
    ks.iter()
        .map(|&k| {
            test.instances()
                .iter()
                .zip(&orders)
                .map(|(i, (label, order, fallback))| Encoded {
                    explanation: Explanation::new(
                        i.doc.id.clone(),
                        format!("query(k={k})"),
                        prefix(order, k),
                    ),
                    label: *label,
                    fallback: *fallback,
                })
                .collect()
        })
        .collect()
}

/// Writes per-instance records as JSON.
pub fn write_instances(path: &Path, instances: &[EvalXInstance]) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(instances)?).map_err(|e| Error::io(path, e))
}
