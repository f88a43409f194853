//! Pipeline steps. Each step reads its inputs from the run directory and
//! writes its outputs there, so steps can run one at a time from the CLI or
//! all together through [`run`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::{AttackMode, CorpusSource, ExperimentConfig};
use super::report;
use super::synthetic::generate_synthetic_corpus;
use crate::corpus::{self, LabeledCorpus, SplitTag};
use crate::eraser::{self, FaithfulnessReport};
use crate::error::{Error, Result};
use crate::evalx::{self, BaseScores, CodeBook, DropRule, EvalXInstance, EvaluatorModel, Recovery};
use crate::meta_attack::{self, CaseDetector, PairedReport, WrappedClassifier};
use crate::models::Classifier;
use crate::saliency::{self, Explanation, SaliencyMethod};
use crate::seed::derive_seed;

/// File layout of one run directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunLayout { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }
    pub fn split(&self, tag: SplitTag) -> PathBuf {
        let name = match tag {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
            SplitTag::Full => "full",
        };
        self.root.join("data").join(format!("{name}.json"))
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model.json")
    }
    pub fn explanations(&self, method: &str) -> PathBuf {
        self.root
            .join("explanations")
            .join(format!("{method}.json"))
    }
    pub fn eraser(&self, method: &str) -> PathBuf {
        self.root.join("eraser").join(format!("{method}.json"))
    }
    pub fn cases(&self, method: &str) -> PathBuf {
        self.root.join("cases").join(format!("{method}.jsonl"))
    }
    pub fn detector(&self, method: &str) -> PathBuf {
        self.root.join("detectors").join(format!("{method}.json"))
    }
    pub fn attack(&self, mode: AttackMode, method: &str) -> PathBuf {
        self.root
            .join("attack")
            .join(format!("{}-{method}.json", mode.name()))
    }
    pub fn evaluator(&self, index: usize) -> PathBuf {
        self.root
            .join("evalx")
            .join(format!("evaluator-{index}.json"))
    }
    pub fn codebook(&self) -> PathBuf {
        self.root.join("evalx").join("codebook.json")
    }
    pub fn evalx_runs(&self, table: &str) -> PathBuf {
        self.root.join("evalx").join(format!("{table}.json"))
    }
    pub fn provenance(&self, artifact: &str) -> PathBuf {
        self.root
            .join("provenance")
            .join(format!("{artifact}.json"))
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T, pretty: bool) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let text = if pretty {
        serde_json::to_string_pretty(value)?
    } else {
        serde_json::to_string(value)?
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(())
}

/// Which split a trained artifact was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub artifact: String,
    pub split: SplitTag,
    pub instances: usize,
}

fn record_provenance(layout: &RunLayout, artifact: &str, corpus: &LabeledCorpus) -> Result<()> {
    write_json(
        &layout.provenance(artifact),
        &Provenance {
            artifact: artifact.to_string(),
            split: corpus.split_tag(),
            instances: corpus.len(),
        },
        true,
    )
}

/// Seed of a named pipeline component.
pub fn step_seed(config: &ExperimentConfig, tag: &str) -> u64 {
    derive_seed(config.seed, tag)
}

pub fn load_split(layout: &RunLayout, tag: SplitTag) -> Result<LabeledCorpus> {
    let corpus: LabeledCorpus = read_json(&layout.split(tag))?;
    if corpus.split_tag() != tag {
        return Err(Error::InvalidParam(format!(
            "{} holds a {:?} split",
            layout.split(tag).display(),
            corpus.split_tag()
        )));
    }
    Ok(corpus)
}

pub fn load_model(layout: &RunLayout) -> Result<Classifier> {
    Classifier::load(&layout.model())
}

pub fn load_explanations(layout: &RunLayout, method: &SaliencyMethod) -> Result<Vec<Explanation>> {
    read_json(&layout.explanations(method.name()))
}

pub fn load_evaluators(
    layout: &RunLayout,
    config: &ExperimentConfig,
) -> Result<Vec<EvaluatorModel>> {
    (0..=config.evalx.approximations)
        .map(|i| EvaluatorModel::load(&layout.evaluator(i), config.evalx.evaluator.variants))
        .collect()
}

/// Loads or generates the corpus, splits it, and stores both sides plus the config.
pub fn gen_data(config: &ExperimentConfig, layout: &RunLayout) -> Result<()> {
    let full = match &config.corpus.source {
        CorpusSource::Synthetic(params) => {
            generate_synthetic_corpus(params, step_seed(config, "synthetic"))?
        }
        CorpusSource::File { path, format } => corpus::load_corpus(path, *format)?,
    };
    let (train, test) = corpus::split(
        &full,
        config.corpus.test_fraction,
        step_seed(config, "split"),
    )?;
    write_json(&layout.split(SplitTag::Train), &train, false)?;
    write_json(&layout.split(SplitTag::Test), &test, false)?;
    ensure_parent(&layout.config())?;
    fs::write(layout.config(), config.to_toml()?).map_err(|e| Error::io(layout.config(), e))
}

pub fn train(config: &ExperimentConfig, layout: &RunLayout) -> Result<()> {
    let train = load_split(layout, SplitTag::Train)?;
    let model = config.model.train(&train, step_seed(config, "model"))?;
    model.save(&layout.model())?;
    record_provenance(layout, "model", &train)
}

pub fn explain(config: &ExperimentConfig, layout: &RunLayout) -> Result<()> {
    let model = load_model(layout)?;
    let test = load_split(layout, SplitTag::Test)?;
    for method in &config.explain.methods {
        let seed = step_seed(config, &format!("explain/{}", method.name()));
        let expl = saliency::explain_corpus(method, &model, &test, config.explain.fraction, seed)?;
        write_json(&layout.explanations(method.name()), &expl, false)?;
    }
    Ok(())
}

pub fn eval_eraser(config: &ExperimentConfig, layout: &RunLayout) -> Result<()> {
    let model = load_model(layout)?;
    let test = load_split(layout, SplitTag::Test)?;
    for method in &config.explain.methods {
        let expl = load_explanations(layout, method)?;
        let rep = eraser::evaluate_faithfulness(&model, &model.fingerprint(), &test, &expl)?;
        write_json(&layout.eraser(method.name()), &rep, false)?;
    }
    Ok(())
}

/// Trains a case detector for `method` on the training split.
pub fn train_detector(
    config: &ExperimentConfig,
    model: &Classifier,
    train: &LabeledCorpus,
    method: &SaliencyMethod,
) -> Result<(meta_attack::CaseDataset, CaseDetector)> {
    let explain_seed = step_seed(config, &format!("explain/{}", method.name()));
    let cases = meta_attack::build_case_dataset(
        model,
        method,
        train,
        config.explain.fraction,
        explain_seed,
    )?;
    let det = meta_attack::train_case_detector(
        &cases,
        &config.meta_attack.detector,
        step_seed(config, &format!("detector/{}", method.name())),
    )?;
    Ok((cases, det))
}

pub fn attack_eraser(config: &ExperimentConfig, layout: &RunLayout) -> Result<()> {
    let model = load_model(layout)?;
    let test = load_split(layout, SplitTag::Test)?;
    let wrapper_seed = step_seed(config, "wrapper");
    let mut train = None;
    for method in &config.explain.methods {
        let expl = load_explanations(layout, method)?;
        for &mode in &config.meta_attack.modes {
            let wrap = match mode {
                AttackMode::Oracle => WrappedClassifier::oracle(model.clone(), wrapper_seed),
                AttackMode::Trained => {
                    if train.is_none() {
                        train = Some(load_split(layout, SplitTag::Train)?);
                    }
                    let train = train.as_ref().expect("loaded above");
                    let (cases, det) = train_detector(config, &model, train, method)?;
                    ensure_parent(&layout.cases(method.name()))?;
                    cases.corpus.write_jsonl(&layout.cases(method.name()))?;
                    ensure_parent(&layout.detector(method.name()))?;
                    det.save(&layout.detector(method.name()))?;
                    record_provenance(layout, &format!("detector-{}", method.name()), train)?;
                    WrappedClassifier::with_detector(model.clone(), det, wrapper_seed)
                }
            };
            let rep = meta_attack::attack_report(&model, &wrap, method, &test, &expl)?;
            write_json(&layout.attack(mode, method.name()), &rep, false)?;
        }
    }
    Ok(())
}

pub fn train_evalx(config: &ExperimentConfig, layout: &RunLayout) -> Result<()> {
    let train = load_split(layout, SplitTag::Train)?;
    for i in 0..=config.evalx.approximations {
        let ev = evalx::train_evaluator_with(
            &train,
            &config.evalx.evaluator,
            step_seed(config, &format!("evaluator/{i}")),
        )?;
        ensure_parent(&layout.evaluator(i))?;
        ev.save(&layout.evaluator(i))?;
        record_provenance(layout, &format!("evaluator-{i}"), &train)?;
    }
    let cb = CodeBook::build(&train, config.evalx.codebook_alpha)?;
    write_json(&layout.codebook(), &cb, false)?;
    record_provenance(layout, "codebook", &train)
}

/// One scored explanation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalXRun {
    pub k: usize,
    /// Index of the scoring evaluator (Method 1) or of the queried
    /// approximation (single-approximation query runs).
    pub evaluator: usize,
    pub instances: Vec<EvalXInstance>,
}

/// Per-instance results of one attack sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalXTable {
    pub method: String,
    pub base: BaseScores,
    pub drop_rule: DropRule,
    pub runs: Vec<EvalXRun>,
}

pub const EVALX_TABLES: [&str; 4] = [
    "likelihood_ratio",
    "query_direct",
    "query_majority",
    "query_single",
];

pub fn attack_evalx(config: &ExperimentConfig, layout: &RunLayout) -> Result<()> {
    let model = load_model(layout)?;
    let test = load_split(layout, SplitTag::Test)?;
    let evaluators = load_evaluators(layout, config)?;
    let cb: CodeBook = read_json(&layout.codebook())?;
    let base = evalx::base_scores(&model, &test);
    let ks = &config.evalx.k_grid;
    let rule = config.evalx.drop_rule;
    let truth = &evaluators[0];
    let approx: Vec<&EvaluatorModel> = evaluators[1..].iter().collect();
    let table = |method: &str, runs| EvalXTable {
        method: method.to_string(),
        base,
        drop_rule: rule,
        runs,
    };

    let mut runs = Vec::new();
    for (k, enc) in ks
        .iter()
        .zip(evalx::likelihood_ratio_sweep(&model, &cb, &test, ks))
    {
        for (i, ev) in evaluators.iter().enumerate() {
            runs.push(EvalXRun {
                k: *k,
                evaluator: i,
                instances: evalx::score_encoded(ev, &test, &enc, &Recovery::CodeBook(&cb))?,
            });
        }
    }
    write_json(
        &layout.evalx_runs(EVALX_TABLES[0]),
        &table("likelihood_ratio", runs),
        false,
    )?;

    let query = |queried: &[&EvaluatorModel], index: usize| -> Result<Vec<EvalXRun>> {
        ks.iter()
            .zip(evalx::query_sweep(&model, queried, &test, ks))
            .map(|(k, enc)| {
                Ok(EvalXRun {
                    k: *k,
                    evaluator: index,
                    instances: evalx::score_encoded(truth, &test, &enc, &Recovery::Evaluator)?,
                })
            })
            .collect()
    };
    write_json(
        &layout.evalx_runs(EVALX_TABLES[1]),
        &table("query_direct", query(&[truth], 0)?),
        false,
    )?;
    if !approx.is_empty() {
        write_json(
            &layout.evalx_runs(EVALX_TABLES[2]),
            &table("query_majority", query(&approx, 0)?),
            false,
        )?;
        let mut single = Vec::new();
        for (i, a) in approx.iter().enumerate() {
            single.extend(query(&[a], i + 1)?);
        }
        write_json(
            &layout.evalx_runs(EVALX_TABLES[3]),
            &table("query_single", single),
            false,
        )?;
    }
    Ok(())
}

/// Runs `f` on a dedicated pool of `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
    pool.install(f)
}

/// Summary of an emitted run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub versions: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    /// Artifact name → split it was built from.
    pub provenance: BTreeMap<String, SplitTag>,
    /// Every file of the run, relative to the run directory.
    pub artifacts: Vec<String>,
}

pub type Step = fn(&ExperimentConfig, &RunLayout) -> Result<()>;

pub const STEPS: [(&str, Step); 7] = [
    ("gen-data", gen_data),
    ("train", train),
    ("explain", explain),
    ("eval-eraser", eval_eraser),
    ("attack-eraser", attack_eraser),
    ("train-evalx", train_evalx),
    ("attack-evalx", attack_evalx),
];

fn run_steps(config: &ExperimentConfig, layout: &RunLayout) -> Result<RunManifest> {
    for (name, step) in STEPS {
        let skip = match name {
            "attack-eraser" => config.meta_attack.modes.is_empty(),
            "train-evalx" | "attack-evalx" => !config.evalx.enabled,
            _ => false,
        };
        if !skip {
            log::info!("step {name}");
            step(config, layout).map_err(Error::in_step(name))?;
        }
    }
    report::write_reports(layout).map_err(Error::in_step("report"))
}

/// Executes every step into `<output_dir>/run-<hash>`. Work happens in a
/// `.partial` sibling that is renamed on success and removed on failure.
pub fn run(config: &ExperimentConfig, threads: Option<usize>) -> Result<RunManifest> {
    config.validate()?;
    let final_dir = config.run_dir();
    let partial = final_dir.with_extension("partial");
    if partial.exists() {
        fs::remove_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;
    }
    fs::create_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;
    let result = with_threads(threads, || run_steps(config, &RunLayout::new(&partial)));
    match result {
        Ok(manifest) => {
            if final_dir.exists() {
                fs::remove_dir_all(&final_dir).map_err(|e| Error::io(&final_dir, e))?;
            }
            fs::rename(&partial, &final_dir).map_err(|e| Error::io(&final_dir, e))?;
            Ok(manifest)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&partial);
            Err(e)
        }
    }
}

/// Seeds of every configured component, keyed by tag.
pub fn component_seeds(config: &ExperimentConfig) -> BTreeMap<String, u64> {
    let mut tags = vec![
        "synthetic".to_string(),
        "split".into(),
        "model".into(),
        "wrapper".into(),
    ];
    for m in &config.explain.methods {
        tags.push(format!("explain/{}", m.name()));
        if config.meta_attack.modes.contains(&AttackMode::Trained) {
            tags.push(format!("detector/{}", m.name()));
        }
    }
    if config.evalx.enabled {
        tags.extend((0..=config.evalx.approximations).map(|i| format!("evaluator/{i}")));
    }
    tags.into_iter()
        .map(|t| {
            let s = step_seed(config, &t);
            (t, s)
        })
        .collect()
}

/// Reads the persisted base report for a method.
pub fn load_eraser(layout: &RunLayout, method: &str) -> Result<FaithfulnessReport> {
    read_json(&layout.eraser(method))
}

pub fn load_attack(layout: &RunLayout, mode: AttackMode, method: &str) -> Result<PairedReport> {
    read_json(&layout.attack(mode, method))
}
