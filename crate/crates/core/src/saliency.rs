//! Token attributions and top-fraction explanation selection.
//!
//! Every method attributes the base model's predicted label ŷ. Attributions
//! live on token positions; explanations are the highest-scoring positions.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, LabeledCorpus};
use crate::error::{Error, Result};
use crate::models::{Classifier, ModelKind, Predictor, ProbDistribution};
use crate::seed;

/// One score per token position of the source document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub scores: Vec<f64>,
    pub target_label: usize,
    pub method: String,
}

/// Selected positions into a source document, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub id: String,
    pub method: String,
    pub positions: Vec<usize>,
    pub k: usize,
}

impl Explanation {
    pub fn new(id: impl Into<String>, method: impl Into<String>, positions: Vec<usize>) -> Self {
        let k = positions.len();
        Explanation {
            id: id.into(),
            method: method.into(),
            positions,
            k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimeConfig {
    pub n_samples: usize,
    pub keep_prob: f64,
    pub kernel_width: f64,
    pub ridge_lambda: f64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_samples: 200,
            keep_prob: 0.5,
            kernel_width: 0.75,
            ridge_lambda: 1.0,
        }
    }
}

/// A saliency method plus its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SaliencyMethod {
    Lime(LimeConfig),
    Gradient,
    IntegratedGradients { steps: usize },
    Occlusion,
    Random,
}

impl SaliencyMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SaliencyMethod::Lime(_) => "lime",
            SaliencyMethod::Gradient => "gradient",
            SaliencyMethod::IntegratedGradients { .. } => "integrated_gradients",
            SaliencyMethod::Occlusion => "occlusion",
            SaliencyMethod::Random => "random",
        }
    }

    pub fn parse_name(name: &str) -> Result<Self> {
        Ok(match name {
            "lime" => SaliencyMethod::Lime(LimeConfig::default()),
            "gradient" => SaliencyMethod::Gradient,
            "integrated_gradients" | "ig" => SaliencyMethod::IntegratedGradients { steps: 20 },
            "occlusion" => SaliencyMethod::Occlusion,
            "random" => SaliencyMethod::Random,
            other => {
                return Err(Error::InvalidParam(format!(
                    "unknown saliency method `{other}`"
                )))
            }
        })
    }

    /// Attributes ŷ on `doc`. `seed` drives LIME sampling and random scores.
    pub fn attribute(&self, clf: &Classifier, doc: &Document, seed: u64) -> Result<Attribution> {
        match self {
            SaliencyMethod::Lime(cfg) => lime_attribution(clf, doc, cfg, seed),
            SaliencyMethod::Gradient => gradient_attribution(clf, doc),
            SaliencyMethod::IntegratedGradients { steps } => integrated_gradients(clf, doc, *steps),
            SaliencyMethod::Occlusion => Ok(occlusion_attribution(clf, doc)),
            SaliencyMethod::Random => Ok(random_attribution(doc, seed)),
        }
    }
}

/// Identifier including the configuration, e.g. `lime(n=200,keep=0.5,width=0.75,ridge=1)`.
impl fmt::Display for SaliencyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SaliencyMethod::Lime(c) => write!(
                f,
                "lime(n={},keep={},width={},ridge={})",
                c.n_samples, c.keep_prob, c.kernel_width, c.ridge_lambda
            ),
            SaliencyMethod::IntegratedGradients { steps } => {
                write!(f, "integrated_gradients(steps={steps})")
            }
            other => f.write_str(other.name()),
        }
    }
}

fn proba_of(
    clf: &Classifier,
    idx: &[Option<usize>],
    keep: impl Fn(usize) -> bool,
) -> ProbDistribution {
    let mut len = 0;
    let mut kept = Vec::with_capacity(idx.len());
    for (p, i) in idx.iter().enumerate() {
        if keep(p) {
            // OOV positions still count toward the document length
            len += 1;
            kept.extend(*i);
        }
    }
    ProbDistribution::softmax(&clf.scores_from_indices(kept, len))
}

/// LIME: weighted ridge regression of `f(ŷ | kept tokens)` on binary keep
/// indicators, with kernel `exp(−d² / width²)` where `d` is the fraction of
/// tokens removed. The first sample is always the unmasked document.
pub fn lime_attribution(
    clf: &Classifier,
    doc: &Document,
    cfg: &LimeConfig,
    seed: u64,
) -> Result<Attribution> {
    let n = doc.len();
    if n == 0 {
        return Err(Error::InvalidParam(
            "LIME needs a non-empty document".into(),
        ));
    }
    if cfg.n_samples < n + 1 {
        return Err(Error::TooFewSamples {
            needed: n + 1,
            got: cfg.n_samples,
        });
    }
    let target = clf.predict(doc);
    let idx = clf.encode(doc);
    let mut rng = seed::rng(seed);
    let p = n + 1;

    // Accumulate Zᵀ W Z and Zᵀ W y directly; Z = [1 | mask].
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut mask = vec![true; n];
    let mut active: Vec<usize> = Vec::with_capacity(p);
    for s in 0..cfg.n_samples {
        if s > 0 {
            for m in mask.iter_mut() {
                *m = rng.random::<f64>() < cfg.keep_prob;
            }
        }
        let removed = mask.iter().filter(|m| !**m).count();
        let d = removed as f64 / n as f64;
        let w = (-(d * d) / (cfg.kernel_width * cfg.kernel_width)).exp();
        let y = proba_of(clf, &idx, |pos| mask[pos]).get(target);
        active.clear();
        active.push(0);
        active.extend((0..n).filter(|&j| mask[j]).map(|j| j + 1));
        for &a in &active {
            rhs[a] += w * y;
            for &b in &active {
                gram[(a, b)] += w;
            }
        }
    }
    for j in 1..p {
        gram[(j, j)] += cfg.ridge_lambda;
    }
    let beta = gram
        .cholesky()
        .ok_or_else(|| Error::InvalidParam("LIME normal equations are singular".into()))?
        .solve(&rhs);
    Ok(Attribution {
        scores: beta.iter().skip(1).copied().collect(),
        target_label: target,
        method: "lime".into(),
    })
}

fn require_logistic(clf: &Classifier, what: &'static str) -> Result<()> {
    if clf.kind() != ModelKind::Logistic || clf.length_features().is_some() {
        return Err(Error::RequiresLogistic(what));
    }
    Ok(())
}

/// Gradient × input on the ŷ logit: each position scores its token's weight.
pub fn gradient_attribution(clf: &Classifier, doc: &Document) -> Result<Attribution> {
    require_logistic(clf, "gradient attribution")?;
    let target = clf.predict(doc);
    let scores = clf
        .encode(doc)
        .iter()
        .map(|i| i.map_or(0.0, |i| clf.token_row(i)[target]))
        .collect();
    Ok(Attribution {
        scores,
        target_label: target,
        method: "gradient".into(),
    })
}

/// Midpoint Riemann-sum integrated gradients from `baseline` to `input`.
///
/// `grad` returns the gradient of the attributed output at a point.
pub fn integrate_path(
    input: &[f64],
    baseline: &[f64],
    steps: usize,
    grad: impl Fn(&[f64]) -> Vec<f64>,
) -> Vec<f64> {
    let mut total = vec![0.0; input.len()];
    let mut point = vec![0.0; input.len()];
    for s in 0..steps {
        let alpha = (s as f64 + 0.5) / steps as f64;
        for ((p, x), b) in point.iter_mut().zip(input).zip(baseline) {
            *p = b + alpha * (x - b);
        }
        for (t, g) in total.iter_mut().zip(grad(&point)) {
            *t += g;
        }
    }
    total
        .iter()
        .zip(input.iter().zip(baseline))
        .map(|(g, (x, b))| (x - b) * g / steps as f64)
        .collect()
}

/// Integrated gradients of the ŷ logit in count space from the empty
/// document, then split equally among each token type's occurrences.
pub fn integrated_gradients(clf: &Classifier, doc: &Document, steps: usize) -> Result<Attribution> {
    require_logistic(clf, "integrated gradients")?;
    if steps == 0 {
        return Err(Error::InvalidParam(
            "integrated gradients needs steps >= 1".into(),
        ));
    }
    let target = clf.predict(doc);
    let counts = clf.vocab().counts(doc);
    let types: Vec<usize> = counts.iter().map(|&(i, _)| i).collect();
    let input: Vec<f64> = counts.iter().map(|&(_, c)| c).collect();
    let baseline = vec![0.0; input.len()];
    // The logit is linear in counts, so its gradient is the weight column
    // wherever it is evaluated.
    let type_attr = integrate_path(&input, &baseline, steps, |_point| {
        types.iter().map(|&i| clf.token_row(i)[target]).collect()
    });
    let scores = clf
        .encode(doc)
        .iter()
        .map(|i| match i {
            Some(i) => {
                let slot = types.binary_search(i).expect("type present in counts");
                type_attr[slot] / input[slot]
            }
            None => 0.0,
        })
        .collect();
    Ok(Attribution {
        scores,
        target_label: target,
        method: "integrated_gradients".into(),
    })
}

/// Leave-one-out: `f(ŷ | doc) − f(ŷ | doc without position t)`.
pub fn occlusion_attribution(clf: &Classifier, doc: &Document) -> Attribution {
    let full = clf.predict_proba(doc);
    let target = full.argmax();
    let idx = clf.encode(doc);
    let scores = (0..doc.len())
        .map(|t| full.get(target) - proba_of(clf, &idx, |p| p != t).get(target))
        .collect();
    Attribution {
        scores,
        target_label: target,
        method: "occlusion".into(),
    }
}

/// i.i.d. uniform scores; never looks at a model. `target_label` is 0.
pub fn random_attribution(doc: &Document, seed: u64) -> Attribution {
    let mut rng = seed::rng(seed);
    Attribution {
        scores: (0..doc.len()).map(|_| rng.random::<f64>()).collect(),
        target_label: 0,
        method: "random".into(),
    }
}

/// Number of positions kept for `fraction` of `len` tokens: `max(1, ceil(fraction·len))`.
pub fn top_k_for(fraction: f64, len: usize) -> usize {
    // tolerance so that e.g. 0.1 * 110 = 11.000000000000002 rounds to 11
    let k = (fraction * len as f64 - 1e-9).ceil().max(1.0) as usize;
    k.min(len)
}

/// The `k` highest-scoring positions (ties toward earlier positions), sorted.
pub fn top_k_positions(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut top: Vec<usize> = order.into_iter().take(k).collect();
    top.sort_unstable();
    top
}

/// Keeps the top `fraction` of positions, at least one.
pub fn top_fraction(attr: &Attribution, fraction: f64) -> Vec<usize> {
    top_k_positions(&attr.scores, top_k_for(fraction, attr.scores.len()))
}

/// Explanations for every instance of `corpus`, in corpus order.
///
/// The per-document seed is derived from `seed` and the document id, so the
/// result does not depend on thread count or order.
pub fn explain_corpus(
    method: &SaliencyMethod,
    clf: &Classifier,
    corpus: &LabeledCorpus,
    fraction: f64,
    seed: u64,
) -> Result<Vec<Explanation>> {
    let name = method.to_string();
    corpus
        .instances()
        .par_iter()
        .map(|inst| {
            explain_doc(method, clf, &inst.doc, fraction, seed)
                .map(|p| Explanation::new(inst.doc.id.clone(), name.clone(), p))
        })
        .collect()
}

/// Positions selected by `method` on one document; empty for an empty document.
pub fn explain_doc(
    method: &SaliencyMethod,
    clf: &Classifier,
    doc: &Document,
    fraction: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if doc.is_empty() {
        return Ok(Vec::new());
    }
    let attr = method.attribute(clf, doc, seed::derive_seed(seed, &doc.id))?;
    Ok(top_fraction(&attr, fraction))
}
