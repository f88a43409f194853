//! Sufficiency, comprehensiveness and macro-F1.
//!
//! Sign convention: both scores are "higher is better".
//!
//! - sufficiency = f(ŷ | explanation only) − f(ŷ | x)
//! - comprehensiveness = f(ŷ | x) − f(ŷ | x without the explanation)
//!
//! Metrics query any [`ConfidenceModel`], so a base classifier and a wrapped
//! one are scored by exactly the same code.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, Document, LabeledCorpus};
use crate::error::{Error, Result};
use crate::models::{Classifier, Predictor, ProbDistribution};
use crate::saliency::Explanation;

const BOUND_TOL: f64 = 1e-9;

/// What a metric query is, from the benchmark's point of view.
///
/// Ordinary models ignore the role. An oracle-routed wrapper reads it instead
/// of running a case detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputRole {
    Original,
    ExplanationOnly { predicted: usize },
    NonExplanation { predicted: usize },
}

/// One confidence query: the instance id, the (possibly masked) document, and its role.
#[derive(Debug, Clone, Copy)]
pub struct Probe<'a> {
    pub id: &'a str,
    pub doc: &'a Document,
    pub role: InputRole,
}

impl<'a> Probe<'a> {
    pub fn original(doc: &'a Document) -> Self {
        Probe {
            id: &doc.id,
            doc,
            role: InputRole::Original,
        }
    }
}

/// The confidence function `f(Y | X)` a faithfulness metric evaluates.
pub trait ConfidenceModel: Sync {
    fn num_labels(&self) -> usize;

    fn confidence(&self, probe: &Probe<'_>) -> ProbDistribution;
}

impl ConfidenceModel for Classifier {
    fn num_labels(&self) -> usize {
        Predictor::num_labels(self)
    }

    fn confidence(&self, probe: &Probe<'_>) -> ProbDistribution {
        self.predict_proba(probe.doc)
    }
}

/// Scores for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFaithfulness {
    pub id: String,
    pub predicted: usize,
    pub gold: usize,
    /// f(ŷ | x)
    pub confidence: f64,
    /// f(ŷ | explanation only)
    pub confidence_explanation: f64,
    /// f(ŷ | x without explanation)
    pub confidence_non_explanation: f64,
    pub sufficiency: f64,
    pub comprehensiveness: f64,
}

impl InstanceFaithfulness {
    /// Checks the ranges implied by `c = f(ŷ | x)`.
    pub fn check_bounds(&self) -> Result<()> {
        let c = self.confidence;
        let fail = |detail: String| {
            Err(Error::BoundViolation {
                id: self.id.clone(),
                detail,
            })
        };
        if !(-BOUND_TOL..=1.0 + BOUND_TOL).contains(&c) {
            return fail(format!("confidence {c} outside [0, 1]"));
        }
        if self.sufficiency < -c - BOUND_TOL || self.sufficiency > 1.0 - c + BOUND_TOL {
            return fail(format!(
                "sufficiency {} outside [-c, 1-c] for c = {c}",
                self.sufficiency
            ));
        }
        if self.comprehensiveness < c - 1.0 - BOUND_TOL || self.comprehensiveness > c + BOUND_TOL {
            return fail(format!(
                "comprehensiveness {} outside [c-1, c] for c = {c}",
                self.comprehensiveness
            ));
        }
        if self.sufficiency + self.comprehensiveness > 1.0 + BOUND_TOL {
            return fail("sufficiency + comprehensiveness exceeds 1".into());
        }
        Ok(())
    }
}

/// Aggregate faithfulness for one (model, method) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub model: String,
    pub method: String,
    pub macro_f1: f64,
    pub mean_sufficiency: f64,
    pub mean_comprehensiveness: f64,
    pub mean_sum: f64,
    pub mean_confidence_explanation: f64,
    pub mean_confidence_non_explanation: f64,
    pub instances: Vec<InstanceFaithfulness>,
}

pub const TABLE1_HEADER: [&str; 5] = ["method", "f1", "comp", "suff", "comp_plus_suff"];

impl FaithfulnessReport {
    pub fn write_csv_row<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.write_record([
            self.method.clone(),
            fmt4(self.macro_f1),
            fmt4(self.mean_comprehensiveness),
            fmt4(self.mean_sufficiency),
            fmt4(self.mean_sum),
        ])?;
        Ok(())
    }
}

pub(crate) fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

/// Scores one instance given the full-input confidence vector.
fn score_instance(
    f: &dyn ConfidenceModel,
    doc: &Document,
    positions: &[usize],
) -> Result<(usize, f64, f64, f64)> {
    let full = f.confidence(&Probe::original(doc));
    let predicted = full.argmax();
    let expl_doc = corpus::extract(doc, positions)?;
    let rest_doc = corpus::complement(doc, positions)?;
    let on_expl = f
        .confidence(&Probe {
            id: &doc.id,
            doc: &expl_doc,
            role: InputRole::ExplanationOnly { predicted },
        })
        .get(predicted);
    let on_rest = f
        .confidence(&Probe {
            id: &doc.id,
            doc: &rest_doc,
            role: InputRole::NonExplanation { predicted },
        })
        .get(predicted);
    Ok((predicted, full.get(predicted), on_expl, on_rest))
}

/// `f(ŷ | explanation only) − f(ŷ | x)`, with ŷ the argmax of `f` on `doc`.
pub fn sufficiency(f: &dyn ConfidenceModel, doc: &Document, positions: &[usize]) -> Result<f64> {
    let (_, c, on_expl, _) = score_instance(f, doc, positions)?;
    Ok(on_expl - c)
}

/// `f(ŷ | x) − f(ŷ | x without the explanation)`.
pub fn comprehensiveness(
    f: &dyn ConfidenceModel,
    doc: &Document,
    positions: &[usize],
) -> Result<f64> {
    let (_, c, _, on_rest) = score_instance(f, doc, positions)?;
    Ok(c - on_rest)
}

/// Unweighted mean of per-label F1 over `num_labels` labels. A label that
/// never occurs in either list contributes 0.
pub fn macro_f1(preds: &[usize], golds: &[usize], num_labels: usize) -> Result<f64> {
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: golds.len(),
        });
    }
    if num_labels == 0 {
        return Err(Error::InvalidParam(
            "macro-F1 needs at least one label".into(),
        ));
    }
    let mut tp = vec![0usize; num_labels];
    let mut fp = vec![0usize; num_labels];
    let mut fn_ = vec![0usize; num_labels];
    for (&p, &g) in preds.iter().zip(golds) {
        if p >= num_labels || g >= num_labels {
            return Err(Error::InvalidParam(format!(
                "label {} out of range for {num_labels} labels",
                p.max(g)
            )));
        }
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let total: f64 = (0..num_labels)
        .map(|l| {
            let denom = 2 * tp[l] + fp[l] + fn_[l];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[l] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / num_labels as f64)
}

/// Scores every instance of `corpus` against its explanation.
///
/// Instances are scored in parallel and aggregated in corpus order. Every
/// instance is checked against the metric range bounds.
pub fn evaluate_faithfulness(
    f: &dyn ConfidenceModel,
    model_id: &str,
    corpus: &LabeledCorpus,
    explanations: &[Explanation],
) -> Result<FaithfulnessReport> {
    let by_id: HashMap<&str, &Explanation> =
        explanations.iter().map(|e| (e.id.as_str(), e)).collect();
    let method = explanations
        .first()
        .map(|e| e.method.clone())
        .unwrap_or_default();
    let instances: Vec<InstanceFaithfulness> = corpus
        .instances()
        .par_iter()
        .map(|inst| {
            let expl = by_id
                .get(inst.doc.id.as_str())
                .ok_or_else(|| Error::MissingExplanation(inst.doc.id.clone()))?;
            let (predicted, c, on_expl, on_rest) = score_instance(f, &inst.doc, &expl.positions)?;
            let rec = InstanceFaithfulness {
                id: inst.doc.id.clone(),
                predicted,
                gold: inst.label,
                confidence: c,
                confidence_explanation: on_expl,
                confidence_non_explanation: on_rest,
                sufficiency: on_expl - c,
                comprehensiveness: c - on_rest,
            };
            rec.check_bounds()?;
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    aggregate(model_id, &method, instances, corpus.num_labels())
}

/// Builds a report from per-instance records (also used to regenerate tables).
pub fn aggregate(
    model_id: &str,
    method: &str,
    instances: Vec<InstanceFaithfulness>,
    num_labels: usize,
) -> Result<FaithfulnessReport> {
    let n = instances.len().max(1) as f64;
    let mean = |g: fn(&InstanceFaithfulness) -> f64| instances.iter().map(g).sum::<f64>() / n;
    let preds: Vec<usize> = instances.iter().map(|i| i.predicted).collect();
    let golds: Vec<usize> = instances.iter().map(|i| i.gold).collect();
    Ok(FaithfulnessReport {
        model: model_id.to_string(),
        method: method.to_string(),
        macro_f1: macro_f1(&preds, &golds, num_labels)?,
        mean_sufficiency: mean(|i| i.sufficiency),
        mean_comprehensiveness: mean(|i| i.comprehensiveness),
        mean_sum: mean(|i| i.sufficiency + i.comprehensiveness),
        mean_confidence_explanation: mean(|i| i.confidence_explanation),
        mean_confidence_non_explanation: mean(|i| i.confidence_non_explanation),
        instances,
    })
}
