//! The case-detector wrapper that inflates sufficiency and comprehensiveness.
//!
//! A detector learns to tell original inputs from explanation-only and
//! non-explanation inputs (per predicted label, `2|Y| + 1` cases). The wrapper
//! passes original inputs through to the base model unchanged and overrides
//! the confidence on everything it recognises as masked:
//!
//! - explanation-only for label `j`: one-hot on `j`
//! - non-explanation for label `j`: zero on `j`, one on a random other label

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, Document, Instance, LabeledCorpus, SplitTag};
use crate::eraser::{self, ConfidenceModel, FaithfulnessReport, InputRole, Probe};
use crate::error::{Error, Result};
use crate::models::{self, Classifier, LengthFeatures, LrConfig, Predictor, ProbDistribution};
use crate::saliency::{self, Explanation, SaliencyMethod};
use crate::seed;

pub const DETECTOR_FORMAT: &str = "faithlab-detector/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    Original,
    ExplanationOnly(usize),
    NonExplanation(usize),
}

impl CaseLabel {
    pub fn count(num_labels: usize) -> usize {
        2 * num_labels + 1
    }

    /// Dense index: original = 0, explanation-only j = 1 + j, non-explanation j = 1 + |Y| + j.
    pub fn index(self, num_labels: usize) -> usize {
        match self {
            CaseLabel::Original => 0,
            CaseLabel::ExplanationOnly(j) => 1 + j,
            CaseLabel::NonExplanation(j) => 1 + num_labels + j,
        }
    }

    pub fn from_index(index: usize, num_labels: usize) -> Option<Self> {
        match index {
            0 => Some(CaseLabel::Original),
            i if i <= num_labels => Some(CaseLabel::ExplanationOnly(i - 1)),
            i if i <= 2 * num_labels => Some(CaseLabel::NonExplanation(i - 1 - num_labels)),
            _ => None,
        }
    }

    pub fn name(self) -> String {
        match self {
            CaseLabel::Original => "original".into(),
            CaseLabel::ExplanationOnly(j) => format!("expl_{j}"),
            CaseLabel::NonExplanation(j) => format!("nonexpl_{j}"),
        }
    }

    /// Case names in index order.
    pub fn names(num_labels: usize) -> Vec<String> {
        (0..Self::count(num_labels))
            .map(|i| Self::from_index(i, num_labels).expect("in range").name())
            .collect()
    }

    pub fn from_role(role: InputRole) -> Self {
        match role {
            InputRole::Original => CaseLabel::Original,
            InputRole::ExplanationOnly { predicted } => CaseLabel::ExplanationOnly(predicted),
            InputRole::NonExplanation { predicted } => CaseLabel::NonExplanation(predicted),
        }
    }
}

/// Case-labelled documents for one (model, method) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseDataset {
    /// Label names follow [`CaseLabel::names`].
    pub corpus: LabeledCorpus,
    /// Source instance id of every case document.
    pub sources: Vec<String>,
    pub num_task_labels: usize,
    pub model_id: String,
    pub method_id: String,
}

/// For every document `x`: `(x, original)`, `(ê, expl_ŷ)` and `(x∖ê, nonexpl_ŷ)`,
/// where ŷ is the base model's prediction and ê its top-`fraction` explanation.
pub fn build_case_dataset(
    base: &Classifier,
    method: &SaliencyMethod,
    docs: &LabeledCorpus,
    fraction: f64,
    seed: u64,
) -> Result<CaseDataset> {
    let explanations = saliency::explain_corpus(method, base, docs, fraction, seed)?;
    case_dataset_from_explanations(base, method, docs, &explanations)
}

/// Case dataset from precomputed explanations (one per instance, corpus order).
pub fn case_dataset_from_explanations(
    base: &Classifier,
    method: &SaliencyMethod,
    docs: &LabeledCorpus,
    explanations: &[Explanation],
) -> Result<CaseDataset> {
    if explanations.len() != docs.len() {
        return Err(Error::LengthMismatch {
            left: docs.len(),
            right: explanations.len(),
        });
    }
    let k = docs.num_labels();
    let triples: Vec<[Instance; 3]> = docs
        .instances()
        .par_iter()
        .zip(explanations)
        .map(|(inst, expl)| {
            let doc = &inst.doc;
            if expl.id != doc.id {
                return Err(Error::MissingExplanation(doc.id.clone()));
            }
            let predicted = base.predict(doc);
            let only = corpus::extract(doc, &expl.positions)?;
            let rest = corpus::complement(doc, &expl.positions)?;
            Ok([
                Instance {
                    doc: doc.clone(),
                    label: CaseLabel::Original.index(k),
                },
                Instance {
                    doc: Document::new(format!("{}#expl", doc.id), only.tokens),
                    label: CaseLabel::ExplanationOnly(predicted).index(k),
                },
                Instance {
                    doc: Document::new(format!("{}#nonexpl", doc.id), rest.tokens),
                    label: CaseLabel::NonExplanation(predicted).index(k),
                },
            ])
        })
        .collect::<Result<_>>()?;
    let mut instances = Vec::with_capacity(3 * triples.len());
    let mut sources = Vec::with_capacity(3 * triples.len());
    for (triple, inst) in triples.into_iter().zip(docs.instances()) {
        for case in triple {
            instances.push(case);
            sources.push(inst.doc.id.clone());
        }
    }
    Ok(CaseDataset {
        corpus: LabeledCorpus::new(instances, CaseLabel::names(k), docs.split_tag())?,
        sources,
        num_task_labels: k,
        model_id: base.fingerprint(),
        method_id: method.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub lr: LrConfig,
    /// Fraction of source documents (with all three of their cases) held out
    /// to measure case accuracy.
    pub holdout_fraction: f64,
    /// Scale of the standardized length features (see [`LengthFeatures`]).
    pub length_gain: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            lr: LrConfig {
                l2: 1e-4,
                epochs: 1500,
                learning_rate: 0.02,
            },
            holdout_fraction: 0.2,
            length_gain: 12.0,
        }
    }
}

/// Softmax regression over BOW counts plus two length features, paired to
/// exactly one (model, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDetector {
    pub format: String,
    pub classifier: Classifier,
    pub num_task_labels: usize,
    pub model_id: String,
    pub method_id: String,
    pub heldout_accuracy: f64,
    /// Case labels with no training instances (never predicted).
    pub absent_cases: Vec<String>,
}

impl CaseDetector {
    pub fn detect(&self, doc: &Document) -> CaseLabel {
        CaseLabel::from_index(self.classifier.predict(doc), self.num_task_labels)
            .expect("detector labels are case indices")
    }

    pub fn accuracy(&self, cases: &LabeledCorpus) -> f64 {
        let hits: usize = cases
            .instances()
            .par_iter()
            .filter(|i| self.classifier.predict(&i.doc) == i.label)
            .count();
        hits as f64 / cases.len().max(1) as f64
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let det: CaseDetector = serde_json::from_str(&text)?;
        if det.format != DETECTOR_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unsupported detector format `{}`",
                det.format
            )));
        }
        Ok(det)
    }
}

fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n == 0 {
        return 1.0;
    }
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

/// Trains a case detector, holding out a seeded fraction of source documents.
pub fn train_case_detector(
    cases: &CaseDataset,
    config: &DetectorConfig,
    seed: u64,
) -> Result<CaseDetector> {
    if cases.corpus.is_empty() {
        return Err(Error::InvalidParam("case corpus is empty".into()));
    }
    if !(config.holdout_fraction > 0.0 && config.holdout_fraction < 1.0) {
        return Err(Error::InvalidParam(
            "holdout_fraction must lie in (0, 1)".into(),
        ));
    }
    let mut sources: Vec<&str> = cases.sources.iter().map(String::as_str).collect();
    sources.dedup();
    let mut shuffled = sources.clone();
    shuffled.shuffle(&mut seed::rng_for(seed, "detector-holdout"));
    let n_hold = ((sources.len() as f64) * config.holdout_fraction).round() as usize;
    let n_hold = n_hold.clamp(1, sources.len().saturating_sub(1).max(1));
    let held: std::collections::HashSet<&str> = shuffled.into_iter().take(n_hold).collect();

    let (mut fit, mut hold) = (Vec::new(), Vec::new());
    for (inst, src) in cases.corpus.instances().iter().zip(&cases.sources) {
        if held.contains(src.as_str()) {
            hold.push(inst.clone());
        } else {
            fit.push(inst.clone());
        }
    }
    let names = cases.corpus.label_names().to_vec();
    let fit = LabeledCorpus::new(fit, names.clone(), SplitTag::Train)?;
    let hold = LabeledCorpus::new(hold, names.clone(), SplitTag::Test)?;

    let counts = fit.label_counts();
    let absent_cases: Vec<String> = counts
        .iter()
        .zip(&names)
        .filter(|(&c, _)| c == 0)
        .map(|(_, n)| n.clone())
        .collect();
    if !absent_cases.is_empty() {
        log::warn!(
            "case labels without training instances: {}",
            absent_cases.join(", ")
        );
    }

    let k = cases.num_task_labels;
    let mut original_lengths: Vec<usize> = fit
        .instances()
        .iter()
        .filter(|i| i.label == CaseLabel::Original.index(k))
        .map(|i| i.doc.len())
        .collect();
    let median_len = median(&mut original_lengths).max(1.0);
    let lengths: Vec<usize> = fit.docs().map(Document::len).collect();
    let length_features = LengthFeatures::fit(median_len, &lengths, config.length_gain);
    let classifier = models::train_lr_with_length(&fit, length_features, &config.lr, seed)?;

    let mut detector = CaseDetector {
        format: DETECTOR_FORMAT.to_string(),
        classifier,
        num_task_labels: k,
        model_id: cases.model_id.clone(),
        method_id: cases.method_id.clone(),
        heldout_accuracy: 0.0,
        absent_cases,
    };
    detector.heldout_accuracy = detector.accuracy(&hold);
    Ok(detector)
}

/// How the wrapper decides which case it is facing.
#[derive(Debug, Clone, PartialEq)]
pub enum Router {
    /// Read the role attached to each metric query.
    Oracle,
    Detector(Box<CaseDetector>),
}

/// A base classifier behind case routing. Exposes the same confidence interface.
#[derive(Debug, Clone)]
pub struct WrappedClassifier {
    pub base: Classifier,
    pub router: Router,
    /// Seeds the per-instance "random other label" draw.
    pub seed: u64,
}

impl WrappedClassifier {
    pub fn oracle(base: Classifier, seed: u64) -> Self {
        WrappedClassifier {
            base,
            router: Router::Oracle,
            seed,
        }
    }

    pub fn with_detector(base: Classifier, detector: CaseDetector, seed: u64) -> Self {
        WrappedClassifier {
            base,
            router: Router::Detector(Box::new(detector)),
            seed,
        }
    }

    pub fn routing_name(&self) -> &'static str {
        match self.router {
            Router::Oracle => "oracle",
            Router::Detector(_) => "detector",
        }
    }

    /// Output for a document already assigned to `case`.
    pub fn route(&self, id: &str, doc: &Document, case: CaseLabel) -> ProbDistribution {
        let k = Predictor::num_labels(&self.base);
        match case {
            CaseLabel::Original => self.base.predict_proba(doc),
            CaseLabel::ExplanationOnly(j) => ProbDistribution::one_hot(k, j),
            CaseLabel::NonExplanation(j) => ProbDistribution::one_hot(k, self.other_label(id, j)),
        }
    }

    /// Uniform draw from `Y ∖ {j}`, keyed by instance id (forced when |Y| = 2).
    pub fn other_label(&self, id: &str, j: usize) -> usize {
        let k = Predictor::num_labels(&self.base);
        if k == 2 {
            return 1 - j;
        }
        let r = seed::rng_for(self.seed, id).random_range(0..k - 1);
        if r >= j {
            r + 1
        } else {
            r
        }
    }

    /// The case the wrapper acts on for this query.
    pub fn case_for(&self, probe: &Probe<'_>) -> CaseLabel {
        match &self.router {
            Router::Oracle => CaseLabel::from_role(probe.role),
            Router::Detector(d) => d.detect(probe.doc),
        }
    }
}

impl ConfidenceModel for WrappedClassifier {
    fn num_labels(&self) -> usize {
        Predictor::num_labels(&self.base)
    }

    fn confidence(&self, probe: &Probe<'_>) -> ProbDistribution {
        self.route(probe.id, probe.doc, self.case_for(probe))
    }
}

/// Base and wrapped faithfulness over the same base-model explanations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedReport {
    pub method: String,
    pub routing: String,
    pub base: FaithfulnessReport,
    pub wrapped: FaithfulnessReport,
    /// Test documents whose wrapped prediction differs from the base prediction.
    pub flip_count: usize,
    pub detector_heldout_accuracy: Option<f64>,
    /// Detector accuracy on the test documents' own case triples.
    pub detector_test_accuracy: Option<f64>,
}

pub const PAIRED_HEADER: [&str; 7] = [
    "method",
    "f1",
    "comp",
    "suff",
    "comp_plus_suff",
    "detector_accuracy",
    "flip_count",
];

/// Scores base and wrapped models on the same explanations, which must come
/// from the base model on the original test inputs.
pub fn attack_report(
    base: &Classifier,
    wrap: &WrappedClassifier,
    method: &SaliencyMethod,
    test: &LabeledCorpus,
    explanations: &[Explanation],
) -> Result<PairedReport> {
    let model_id = base.fingerprint();
    if wrap.base.fingerprint() != model_id {
        return Err(Error::InvalidParam(
            "wrapper does not wrap this base model".into(),
        ));
    }
    let method_id = method.to_string();
    let mut detector_heldout_accuracy = None;
    let mut detector_test_accuracy = None;
    if let Router::Detector(d) = &wrap.router {
        if d.model_id != model_id || d.method_id != method_id {
            return Err(Error::StaleDetector {
                trained_model: d.model_id.clone(),
                trained_method: d.method_id.clone(),
                model: model_id,
                method: method_id,
            });
        }
        detector_heldout_accuracy = Some(d.heldout_accuracy);
        let test_cases = case_dataset_from_explanations(base, method, test, explanations)?;
        detector_test_accuracy = Some(d.accuracy(&test_cases.corpus));
    }

    let base_report = eraser::evaluate_faithfulness(base, &model_id, test, explanations)?;
    let wrapped_report = eraser::evaluate_faithfulness(
        wrap,
        &format!("{model_id}+meta-algo({})", wrap.routing_name()),
        test,
        explanations,
    )?;
    let flip_count = base_report
        .instances
        .iter()
        .zip(&wrapped_report.instances)
        .filter(|(b, w)| b.predicted != w.predicted)
        .count();
    Ok(PairedReport {
        method: method.name().to_string(),
        routing: wrap.routing_name().to_string(),
        base: base_report,
        wrapped: wrapped_report,
        flip_count,
        detector_heldout_accuracy,
        detector_test_accuracy,
    })
}
