//! Bag-of-words classifiers: multinomial naive Bayes and softmax regression.
//!
//! Both model families are linear in token counts once written in log space:
//! a per-label intercept (log prior, or bias) plus one per-label row per
//! vocabulary token (log likelihood, or weight). [`Classifier`] stores that
//! linear form alongside the raw parameters so that masked-input scoring,
//! occlusion and greedy search can add and remove token rows incrementally.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Document, LabeledCorpus};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "faithlab-model/1";

/// Confidence vector over labels. Entries lie in `[0, 1]` and sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbDistribution(Vec<f64>);

impl ProbDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty()
            || probs.iter().any(|p| !(0.0..=1.0).contains(p))
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidParam(format!(
                "not a probability distribution: {probs:?}"
            )));
        }
        Ok(ProbDistribution(probs))
    }

    /// Exact one-hot vector on `label`.
    pub fn one_hot(num_labels: usize, label: usize) -> Self {
        let mut p = vec![0.0; num_labels];
        p[label] = 1.0;
        ProbDistribution(p)
    }

    /// Numerically stable softmax of unnormalised log scores.
    pub fn softmax(scores: &[f64]) -> Self {
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        ProbDistribution(exps.into_iter().map(|e| e / z).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, label: usize) -> f64 {
        self.0[label]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Highest-probability label; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Anything that maps a document to a confidence vector.
pub trait Predictor: Sync {
    fn num_labels(&self) -> usize;

    fn predict_proba(&self, doc: &Document) -> ProbDistribution;

    fn predict(&self, doc: &Document) -> usize {
        self.predict_proba(doc).argmax()
    }
}

/// Token to dense index map, built from a training split in sorted token order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Self {
        let mut tokens: Vec<String> = docs
            .into_iter()
            .flat_map(|d| d.tokens.iter().cloned())
            .collect();
        tokens.sort_unstable();
        tokens.dedup();
        Vocabulary::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    /// Per-position vocabulary index; out-of-vocabulary positions are `None`.
    pub fn encode(&self, doc: &Document) -> Vec<Option<usize>> {
        doc.tokens.iter().map(|t| self.get(t)).collect()
    }

    /// Sparse count vector sorted by index. OOV tokens are dropped.
    pub fn counts(&self, doc: &Document) -> Vec<(usize, f64)> {
        let mut idx: Vec<usize> = doc.tokens.iter().filter_map(|t| self.get(t)).collect();
        idx.sort_unstable();
        let mut out: Vec<(usize, f64)> = Vec::new();
        for i in idx {
            match out.last_mut() {
                Some((j, c)) if *j == i => *c += 1.0,
                _ => out.push((i, 1.0)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NaiveBayes,
    Logistic,
}

/// Two standardized length features: `ln(1 + token count)` and token count
/// relative to a reference median length, each multiplied by `gain`.
///
/// The gain sets how fast gradient descent moves the length weights relative
/// to the count weights (a step of `η` on a feature scaled by `g` acts like a
/// step of `η·g²`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthFeatures {
    pub median_len: f64,
    pub mean: [f64; 2],
    pub std: [f64; 2],
    #[serde(default = "unit_gain")]
    pub gain: f64,
}

fn unit_gain() -> f64 {
    1.0
}

impl LengthFeatures {
    fn raw(median_len: f64, len: usize) -> [f64; 2] {
        let n = len as f64;
        [(1.0 + n).ln(), n / median_len]
    }

    /// Fits standardization statistics over the given document lengths.
    pub fn fit(median_len: f64, lengths: &[usize], gain: f64) -> Self {
        let n = lengths.len().max(1) as f64;
        let mut mean = [0.0; 2];
        for &l in lengths {
            let r = Self::raw(median_len, l);
            mean[0] += r[0] / n;
            mean[1] += r[1] / n;
        }
        let mut var = [0.0; 2];
        for &l in lengths {
            let r = Self::raw(median_len, l);
            var[0] += (r[0] - mean[0]).powi(2) / n;
            var[1] += (r[1] - mean[1]).powi(2) / n;
        }
        let std = [var[0].sqrt().max(1e-12), var[1].sqrt().max(1e-12)];
        LengthFeatures {
            median_len,
            mean,
            std,
            gain,
        }
    }

    pub fn features(&self, len: usize) -> [f64; 2] {
        let r = Self::raw(self.median_len, len);
        [
            self.gain * (r[0] - self.mean[0]) / self.std[0],
            self.gain * (r[1] - self.mean[1]) / self.std[1],
        ]
    }
}

impl From<Classifier> for ModelFile {
    fn from(clf: Classifier) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            num_labels: clf.num_labels,
            seed: clf.seed,
            vocabulary: clf.vocab,
            length_features: clf.length_features,
            model: clf.params,
        }
    }
}

impl TryFrom<ModelFile> for Classifier {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unsupported format tag `{}` (expected `{MODEL_FORMAT}`)",
                file.format
            )));
        }
        Classifier::assemble(
            file.vocabulary,
            file.num_labels,
            file.seed,
            file.model,
            file.length_features,
        )
    }
}

/// Raw trained parameters, as persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    NaiveBayes {
        alpha: f64,
        label_counts: Vec<u64>,
        /// Token-major `vocab × labels` occurrence counts.
        token_counts: Vec<u64>,
    },
    Logistic {
        l2: f64,
        learning_rate: f64,
        epochs: usize,
        /// Token-major `vocab × labels` weights.
        weights: Vec<f64>,
        bias: Vec<f64>,
        /// `2 × labels` weights on the length features, empty when unused.
        #[serde(default)]
        length_weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrConfig {
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            l2: 1e-3,
            epochs: 300,
            learning_rate: 0.02,
        }
    }
}

/// Model family plus training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    NaiveBayes { alpha: f64 },
    Logistic(LrConfig),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::NaiveBayes { alpha: 1.0 }
    }
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::NaiveBayes { .. } => ModelKind::NaiveBayes,
            ModelSpec::Logistic(_) => ModelKind::Logistic,
        }
    }

    /// Trains on `train`; the seed is recorded in the model either way.
    pub fn train(&self, train: &LabeledCorpus, seed: u64) -> Result<Classifier> {
        match self {
            ModelSpec::NaiveBayes { alpha } => train_nb(train, *alpha).map(|c| c.with_seed(seed)),
            ModelSpec::Logistic(cfg) => train_lr(train, cfg, seed),
        }
    }
}

#[derive(Serialize, Deserialize)]
/// On-disk model schema (`format` is the version tag).
pub struct ModelFile {
    pub format: String,
    pub num_labels: usize,
    pub seed: u64,
    pub vocabulary: Vocabulary,
    #[serde(default)]
    pub length_features: Option<LengthFeatures>,
    pub model: ModelParams,
}

/// A trained bag-of-words classifier. Immutable after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct Classifier {
    vocab: Vocabulary,
    num_labels: usize,
    seed: u64,
    params: ModelParams,
    length_features: Option<LengthFeatures>,
    intercept: Vec<f64>,
    weights: Vec<f64>,
    length_weights: Vec<f64>,
}

impl Classifier {
    fn assemble(
        vocab: Vocabulary,
        num_labels: usize,
        seed: u64,
        params: ModelParams,
        length_features: Option<LengthFeatures>,
    ) -> Result<Self> {
        let v = vocab.len();
        let k = num_labels;
        let (intercept, weights, length_weights) = match &params {
            ModelParams::NaiveBayes {
                alpha,
                label_counts,
                token_counts,
            } => {
                if label_counts.len() != k || token_counts.len() != v * k {
                    return Err(Error::ModelFormat("naive Bayes array sizes".into()));
                }
                let n: u64 = label_counts.iter().sum();
                let intercept = label_counts
                    .iter()
                    .map(|&c| (c as f64 / n as f64).ln())
                    .collect();
                let mut totals = vec![0u64; k];
                for row in token_counts.chunks(k) {
                    for (t, &c) in totals.iter_mut().zip(row) {
                        *t += c;
                    }
                }
                let denom: Vec<f64> = totals
                    .iter()
                    .map(|&t| t as f64 + alpha * v as f64)
                    .collect();
                let weights = token_counts
                    .chunks(k)
                    .flat_map(|row| {
                        row.iter()
                            .zip(&denom)
                            .map(|(&c, d)| ((c as f64 + alpha) / d).ln())
                            .collect::<Vec<_>>()
                    })
                    .collect();
                (intercept, weights, Vec::new())
            }
            ModelParams::Logistic {
                weights,
                bias,
                length_weights,
                ..
            } => {
                if bias.len() != k || weights.len() != v * k {
                    return Err(Error::ModelFormat("logistic array sizes".into()));
                }
                let expected = if length_features.is_some() { 2 * k } else { 0 };
                if length_weights.len() != expected {
                    return Err(Error::ModelFormat("length weight array size".into()));
                }
                (bias.clone(), weights.clone(), length_weights.clone())
            }
        };
        let clf = Classifier {
            vocab,
            num_labels,
            seed,
            params,
            length_features,
            intercept,
            weights,
            length_weights,
        };
        if clf
            .intercept
            .iter()
            .chain(&clf.weights)
            .any(|x| !x.is_finite())
        {
            return Err(Error::ModelFormat("non-finite parameters".into()));
        }
        Ok(clf)
    }

    /// Builds a logistic model from explicit parameters (token-major weights).
    pub fn logistic_from_parts(
        vocab: Vocabulary,
        num_labels: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        Classifier::assemble(
            vocab,
            num_labels,
            0,
            ModelParams::Logistic {
                l2: 0.0,
                learning_rate: 0.0,
                epochs: 0,
                weights,
                bias,
                length_weights: Vec::new(),
            },
            None,
        )
    }

    /// Same model with a different recorded seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::NaiveBayes { .. } => ModelKind::NaiveBayes,
            ModelParams::Logistic { .. } => ModelKind::Logistic,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn length_features(&self) -> Option<&LengthFeatures> {
        self.length_features.as_ref()
    }

    /// Per-label intercept: log priors (NB) or bias (LR).
    pub fn intercept(&self) -> &[f64] {
        &self.intercept
    }

    /// Per-label score contribution of one occurrence of vocabulary token `index`.
    pub fn token_row(&self, index: usize) -> &[f64] {
        &self.weights[index * self.num_labels..(index + 1) * self.num_labels]
    }

    pub fn encode(&self, doc: &Document) -> Vec<Option<usize>> {
        self.vocab.encode(doc)
    }

    /// Unnormalised scores for a document given as vocabulary indices plus its
    /// full token count (OOV included), which only the length features use.
    pub fn scores_from_indices(
        &self,
        indices: impl IntoIterator<Item = usize>,
        len: usize,
    ) -> Vec<f64> {
        let mut s = self.intercept.clone();
        for i in indices {
            for (acc, w) in s.iter_mut().zip(self.token_row(i)) {
                *acc += w;
            }
        }
        if let Some(lf) = &self.length_features {
            let f = lf.features(len);
            let k = self.num_labels;
            for (l, acc) in s.iter_mut().enumerate() {
                *acc += self.length_weights[l] * f[0] + self.length_weights[k + l] * f[1];
            }
        }
        s
    }

    /// Log joint (NB) or logits (LR) for every label.
    pub fn scores(&self, doc: &Document) -> Vec<f64> {
        self.scores_from_indices(
            doc.tokens.iter().filter_map(|t| self.vocab.get(t)),
            doc.len(),
        )
    }

    /// Pre-softmax score of `label`. Defined for logistic models only.
    pub fn logit(&self, doc: &Document, label: usize) -> Result<f64> {
        if self.kind() != ModelKind::Logistic {
            return Err(Error::RequiresLogistic("logit"));
        }
        Ok(self.scores(doc)[label])
    }

    /// Short content hash identifying these exact parameters.
    pub fn fingerprint(&self) -> String {
        let json = self.to_json().expect("model serialization cannot fail");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Classifier::from_json(&json)
    }
}

impl Predictor for Classifier {
    fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn predict_proba(&self, doc: &Document) -> ProbDistribution {
        ProbDistribution::softmax(&self.scores(doc))
    }
}

fn check_labels_present(train: &LabeledCorpus) -> Result<Vec<usize>> {
    if train.is_empty() {
        return Err(Error::InvalidParam("training corpus is empty".into()));
    }
    let counts = train.label_counts();
    if let Some(l) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingLabel(l));
    }
    Ok(counts)
}

/// Multinomial naive Bayes with Laplace smoothing `alpha` and empirical priors.
pub fn train_nb(train: &LabeledCorpus, alpha: f64) -> Result<Classifier> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "alpha must be > 0, got {alpha}"
        )));
    }
    let label_counts = check_labels_present(train)?;
    let vocab = Vocabulary::build(train.docs());
    let k = train.num_labels();
    let mut token_counts = vec![0u64; vocab.len() * k];
    for inst in train.instances() {
        for t in &inst.doc.tokens {
            let i = vocab.get(t).expect("vocabulary built from this corpus");
            token_counts[i * k + inst.label] += 1;
        }
    }
    Classifier::assemble(
        vocab,
        k,
        0,
        ModelParams::NaiveBayes {
            alpha,
            label_counts: label_counts.iter().map(|&c| c as u64).collect(),
            token_counts,
        },
        None,
    )
}

/// Softmax regression on raw token counts, full-batch gradient descent from
/// zero weights. The seed is recorded but unused (there is no shuffling).
pub fn train_lr(train: &LabeledCorpus, config: &LrConfig, seed: u64) -> Result<Classifier> {
    check_labels_present(train)?;
    let vocab = Vocabulary::build(train.docs());
    let rows: Vec<SparseRow> = train.docs().map(|d| vocab.counts(d)).collect();
    let (weights, bias) = train_softmax(
        &rows,
        &train.labels(),
        vocab.len(),
        train.num_labels(),
        config,
    )?;
    Classifier::assemble(
        vocab,
        train.num_labels(),
        seed,
        ModelParams::Logistic {
            l2: config.l2,
            learning_rate: config.learning_rate,
            epochs: config.epochs,
            weights,
            bias,
            length_weights: Vec::new(),
        },
        None,
    )
}

/// Softmax regression over BOW counts plus the two [`LengthFeatures`].
pub(crate) fn train_lr_with_length(
    train: &LabeledCorpus,
    length_features: LengthFeatures,
    config: &LrConfig,
    seed: u64,
) -> Result<Classifier> {
    if train.is_empty() {
        return Err(Error::InvalidParam("training corpus is empty".into()));
    }
    let vocab = Vocabulary::build(train.docs());
    let v = vocab.len();
    let k = train.num_labels();
    let rows: Vec<SparseRow> = train
        .docs()
        .map(|d| {
            let mut row = vocab.counts(d);
            let f = length_features.features(d.len());
            row.push((v, f[0]));
            row.push((v + 1, f[1]));
            row
        })
        .collect();
    let (mut weights, bias) = train_softmax(&rows, &train.labels(), v + 2, k, config)?;
    let tail = weights.split_off(v * k);
    // tail is [len0 labels..., len1 labels...] in token-major layout
    Classifier::assemble(
        vocab,
        k,
        seed,
        ModelParams::Logistic {
            l2: config.l2,
            learning_rate: config.learning_rate,
            epochs: config.epochs,
            weights,
            bias,
            length_weights: tail,
        },
        Some(length_features),
    )
}

/// Sparse feature row, `(feature index, value)` sorted by index.
pub type SparseRow = Vec<(usize, f64)>;

/// Loss and gradient of the softmax-regression objective
/// `mean cross-entropy + (l2 / 2) * ||W||²` (bias unpenalised).
#[derive(Debug, Clone)]
pub struct Objective {
    pub loss: f64,
    /// Feature-major `dim × labels`, like the weights.
    pub grad_weights: Vec<f64>,
    pub grad_bias: Vec<f64>,
}

fn cross_entropy(
    rows: &[SparseRow],
    labels: &[usize],
    k: usize,
    weights: &[f64],
    bias: &[f64],
) -> Objective {
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = vec![0.0; k];
    let mut logits = vec![0.0; k];
    for (row, &y) in rows.iter().zip(labels) {
        logits.copy_from_slice(bias);
        for &(j, x) in row {
            for (l, z) in logits.iter_mut().enumerate() {
                *z += weights[j * k + l] * x;
            }
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|s| (s - max).exp()).sum();
        let log_z = max + z.ln();
        loss += (log_z - logits[y]) / n;
        for l in 0..k {
            let p = (logits[l] - log_z).exp();
            let r = (p - if l == y { 1.0 } else { 0.0 }) / n;
            gb[l] += r;
            for &(j, x) in row {
                gw[j * k + l] += r * x;
            }
        }
    }
    Objective {
        loss,
        grad_weights: gw,
        grad_bias: gb,
    }
}

/// Full objective including the L2 term.
pub fn softmax_objective(
    rows: &[SparseRow],
    labels: &[usize],
    k: usize,
    weights: &[f64],
    bias: &[f64],
    l2: f64,
) -> Objective {
    let mut obj = cross_entropy(rows, labels, k, weights, bias);
    obj.loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in obj.grad_weights.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    obj
}

/// Full-batch gradient descent. The L2 term is applied as an exact proximal
/// shrink, `w ← (w − η∇CE) / (1 + ηλ)`, which stays stable for any `λ`.
pub(crate) fn train_softmax(
    rows: &[SparseRow],
    labels: &[usize],
    dim: usize,
    k: usize,
    config: &LrConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(config.learning_rate >= 0.0 && config.l2 >= 0.0) {
        return Err(Error::InvalidParam(
            "learning rate and l2 must be >= 0".into(),
        ));
    }
    let mut weights = vec![0.0; dim * k];
    let mut bias = vec![0.0; k];
    let eta = config.learning_rate;
    let shrink = 1.0 / (1.0 + eta * config.l2);
    for epoch in 0..config.epochs {
        let obj = cross_entropy(rows, labels, k, &weights, &bias);
        if !obj.loss.is_finite() {
            return Err(Error::NonFiniteLoss(epoch));
        }
        for (w, g) in weights.iter_mut().zip(&obj.grad_weights) {
            *w = (*w - eta * g) * shrink;
        }
        for (b, g) in bias.iter_mut().zip(&obj.grad_bias) {
            *b -= eta * g;
        }
    }
    if weights.iter().chain(&bias).any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteLoss(config.epochs));
    }
    Ok((weights, bias))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Instance, SplitTag};

    fn corpus(rows: &[(&[&str], usize)], k: usize) -> LabeledCorpus {
        let instances = rows
            .iter()
            .enumerate()
            .map(|(i, (toks, label))| Instance {
                doc: Document::new(
                    format!("d{i}"),
                    toks.iter().map(|t| t.to_string()).collect(),
                ),
                label: *label,
            })
            .collect();
        LabeledCorpus::new(
            instances,
            (0..k).map(|l| format!("l{l}")).collect(),
            SplitTag::Train,
        )
        .unwrap()
    }

    fn doc(tokens: &[&str]) -> Document {
        Document::new("q", tokens.iter().map(|t| t.to_string()).collect())
    }

    #[test]
    fn nb_good_bad_posterior() {
        let c = corpus(&[(&["good"], 1), (&["bad"], 0)], 2);
        let nb = train_nb(&c, 1.0).unwrap();
        let p = nb.predict_proba(&doc(&["good"]));
        // P(good|1) = 2/3, P(good|0) = 1/3, equal priors
        assert!((p.get(1) - 2.0 / 3.0).abs() < 1e-12);
        assert!(p.get(1) > 0.5);
    }

    #[test]
    fn nb_matches_direct_bayes_rule() {
        // vocab {x, y}; label 0 sees x x y, label 1 sees y y y x (and more docs)
        let c = corpus(
            &[
                (&["x", "x", "y"], 0),
                (&["y", "y"], 1),
                (&["y", "x"], 1),
                (&["x"], 0),
                (&["y"], 1),
            ],
            2,
        );
        let alpha = 0.5;
        let nb = train_nb(&c, alpha).unwrap();
        // counts: label0 x=3 y=1 (total 4); label1 x=1 y=4 (total 5)
        let px = [
            (3.0 + alpha) / (4.0 + 2.0 * alpha),
            (1.0 + alpha) / (5.0 + 2.0 * alpha),
        ];
        let py = [
            (1.0 + alpha) / (4.0 + 2.0 * alpha),
            (4.0 + alpha) / (5.0 + 2.0 * alpha),
        ];
        let prior = [2.0 / 5.0, 3.0 / 5.0];
        let joint: Vec<f64> = (0..2).map(|l| prior[l] * px[l] * py[l] * py[l]).collect();
        let z: f64 = joint.iter().sum();
        let p = nb.predict_proba(&doc(&["x", "y", "y"]));
        for (l, j) in joint.iter().enumerate() {
            assert!((p.get(l) - j / z).abs() < 1e-12);
        }
    }

    #[test]
    fn nb_symmetric_corpus_is_uninformative() {
        let c = corpus(&[(&["a", "b"], 0), (&["a", "b"], 1)], 2);
        let nb = train_nb(&c, 1.0).unwrap();
        let p = nb.predict_proba(&doc(&["a", "b", "a"]));
        assert!((p.get(0) - 0.5).abs() < 1e-12);
        assert_eq!(nb.predict(&doc(&["a"])), 0);
    }

    #[test]
    fn nb_empty_and_oov_docs_give_priors() {
        let mut rows: Vec<(&[&str], usize)> = vec![(&["a"], 0); 7];
        rows.extend(vec![(&["b"] as &[&str], 1); 3]);
        let nb = train_nb(&corpus(&rows, 2), 1.0).unwrap();
        let empty = nb.predict_proba(&doc(&[]));
        assert!((empty.get(0) - 0.7).abs() < 1e-12);
        assert!((empty.get(1) - 0.3).abs() < 1e-12);
        assert_eq!(nb.predict_proba(&doc(&["zzz", "qq"])), empty);
    }

    #[test]
    fn nb_missing_label_is_an_error() {
        let c = corpus(&[(&["a"], 0), (&["b"], 0)], 2);
        assert!(matches!(train_nb(&c, 1.0), Err(Error::MissingLabel(1))));
        assert!(train_nb(&corpus(&[(&["a"], 0), (&["b"], 1)], 2), 0.0).is_err());
    }

    #[test]
    fn lr_separable_reaches_full_accuracy() {
        let c = corpus(&[(&["good", "film"], 1), (&["bad", "film"], 0)], 2);
        let cfg = LrConfig {
            l2: 0.0,
            epochs: 200,
            learning_rate: 0.5,
        };
        let lr = train_lr(&c, &cfg, 1).unwrap();
        for inst in c.instances() {
            assert_eq!(lr.predict(&inst.doc), inst.label);
        }
    }

    #[test]
    fn lr_heavy_l2_predicts_priors() {
        let mut rows: Vec<(&[&str], usize)> = vec![(&["a", "c"], 0); 6];
        rows.extend(vec![(&["b", "c"] as &[&str], 1); 4]);
        let cfg = LrConfig {
            l2: 1e6,
            epochs: 2000,
            learning_rate: 0.5,
        };
        let lr = train_lr(&corpus(&rows, 2), &cfg, 0).unwrap();
        let p = lr.predict_proba(&doc(&["a", "a", "c"]));
        assert!((p.get(0) - 0.6).abs() < 0.01, "{p:?}");
    }

    #[test]
    fn lr_zero_epochs_is_uniform() {
        let c = corpus(&[(&["a"], 0), (&["b"], 1), (&["b"], 1)], 2);
        let cfg = LrConfig {
            l2: 0.0,
            epochs: 0,
            learning_rate: 0.5,
        };
        let lr = train_lr(&c, &cfg, 0).unwrap();
        assert_eq!(lr.predict_proba(&doc(&["a", "b"])).probs(), &[0.5, 0.5]);
        assert_eq!(lr.logit(&doc(&["a"]), 1).unwrap(), 0.0);
    }

    #[test]
    fn lr_divergence_is_reported() {
        let c = corpus(&[(&["a"; 50], 0), (&["b"; 50], 1)], 2);
        let cfg = LrConfig {
            l2: 0.0,
            epochs: 100,
            learning_rate: 1e308,
        };
        assert!(matches!(
            train_lr(&c, &cfg, 0),
            Err(Error::NonFiniteLoss(_))
        ));
    }

    #[test]
    fn logit_is_linear_and_matches_softmax() {
        let vocab = Vocabulary::from(vec!["bad".to_string(), "good".to_string()]);
        let lr =
            Classifier::logistic_from_parts(vocab, 2, vec![0.3, -1.0, 0.2, 2.0], vec![0.1, -0.4])
                .unwrap();
        let d1 = doc(&["good", "bad"]);
        let d2 = doc(&["good", "good", "bad"]);
        let delta = lr.logit(&d2, 1).unwrap() - lr.logit(&d1, 1).unwrap();
        assert!((delta - 2.0).abs() < 1e-12);
        let logits: Vec<f64> = (0..2).map(|l| lr.logit(&d1, l).unwrap()).collect();
        assert_eq!(ProbDistribution::softmax(&logits), lr.predict_proba(&d1));
    }

    #[test]
    fn logit_on_nb_is_an_error() {
        let nb = train_nb(&corpus(&[(&["a"], 0), (&["b"], 1)], 2), 1.0).unwrap();
        assert!(matches!(
            nb.logit(&doc(&["a"]), 0),
            Err(Error::RequiresLogistic(_))
        ));
    }

    #[test]
    fn prob_distribution_tie_break_and_validation() {
        assert_eq!(ProbDistribution::new(vec![0.5, 0.5]).unwrap().argmax(), 0);
        assert_eq!(ProbDistribution::new(vec![0.2, 0.8]).unwrap().argmax(), 1);
        assert!(ProbDistribution::new(vec![0.2, 0.7]).is_err());
        assert!(ProbDistribution::new(vec![-0.1, 1.1]).is_err());
        assert_eq!(ProbDistribution::one_hot(3, 2).probs(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn model_file_rejects_wrong_format_tag() {
        let nb = train_nb(&corpus(&[(&["a"], 0), (&["b"], 1)], 2), 1.0).unwrap();
        let json = nb.to_json().unwrap().replace(MODEL_FORMAT, "other/9");
        let err = Classifier::from_json(&json).unwrap_err().to_string();
        assert!(err.contains("unsupported format tag"), "{err}");
    }

    #[test]
    fn length_features_standardize() {
        let lf = LengthFeatures::fit(10.0, &[5, 10, 15], 1.0);
        let f: Vec<[f64; 2]> = [5, 10, 15].iter().map(|&l| lf.features(l)).collect();
        let mean1: f64 = f.iter().map(|x| x[1]).sum::<f64>() / 3.0;
        assert!(mean1.abs() < 1e-12);
        assert!(f[0][0] < f[1][0] && f[1][0] < f[2][0]);
    }
}
