//! Text ingestion, tokenization, splitting and the masking constructions.
//!
//! Masked inputs are built by deleting tokens, never by substituting a
//! placeholder: an explanation-only document keeps the explanation's tokens,
//! a non-explanation document keeps everything else, and both preserve the
//! original token order.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// An ordered token sequence with a stable instance identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Self {
        Document {
            id: id.into(),
            tokens,
        }
    }

    pub fn from_text(id: impl Into<String>, text: &str) -> Self {
        Document::new(id, tokenize(text))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens joined by single spaces. Re-tokenizing the result is lossless.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Lowercase, then split on whitespace and at every punctuation mark.
///
/// Alphanumeric runs become tokens; every other non-whitespace character is a
/// token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            word.push(ch);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Full,
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    ExplanationOnly,
    NonExplanation,
    RandomMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub doc: Document,
    pub label: usize,
}

/// Documents paired with dense integer labels in `[0, num_labels)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    instances: Vec<Instance>,
    label_names: Vec<String>,
    split: SplitTag,
}

impl LabeledCorpus {
    /// Validates label ranges and id uniqueness.
    pub fn new(
        instances: Vec<Instance>,
        label_names: Vec<String>,
        split: SplitTag,
    ) -> Result<Self> {
        if label_names.len() < 2 {
            return Err(Error::InvalidParam(format!(
                "a corpus needs at least 2 labels, got {}",
                label_names.len()
            )));
        }
        let mut seen = HashSet::with_capacity(instances.len());
        for inst in &instances {
            if inst.label >= label_names.len() {
                return Err(Error::InvalidParam(format!(
                    "instance `{}` has label {} but the corpus has {} labels",
                    inst.doc.id,
                    inst.label,
                    label_names.len()
                )));
            }
            if !seen.insert(inst.doc.id.as_str()) {
                return Err(Error::InvalidParam(format!(
                    "duplicate instance id `{}`",
                    inst.doc.id
                )));
            }
        }
        Ok(LabeledCorpus {
            instances,
            label_names,
            split,
        })
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn num_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn split_tag(&self) -> SplitTag {
        self.split
    }

    pub fn docs(&self) -> impl Iterator<Item = &Document> {
        self.instances.iter().map(|i| &i.doc)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.instances.iter().map(|i| i.label).collect()
    }

    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_labels()];
        for inst in &self.instances {
            counts[inst.label] += 1;
        }
        counts
    }

    /// Writes the corpus as jsonl records `{"id", "text", "label"}`.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        for inst in &self.instances {
            let record = Record {
                id: Some(inst.doc.id.clone()),
                text: Some(inst.doc.text()),
                label: Some(self.label_names[inst.label].clone()),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::Jsonl => "jsonl",
            CorpusFormat::Csv => "csv",
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: Option<String>,
    text: Option<String>,
    label: Option<String>,
}

/// Loads a jsonl or csv corpus. Label names are mapped to dense integers in
/// sorted name order. Records without an `id` get `line-<n>`.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LabeledCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    // (line, id, text, label name)
    let mut rows: Vec<(usize, String, String, String)> = Vec::new();
    let check = |line: usize, rec: Record| -> Result<(usize, String, String, String)> {
        let text = rec.text.ok_or_else(|| Error::Record {
            line,
            message: "missing field `text`".into(),
        })?;
        let label = rec.label.ok_or_else(|| Error::Record {
            line,
            message: "missing field `label`".into(),
        })?;
        let id = rec.id.unwrap_or_else(|| format!("line-{line}"));
        Ok((line, id, text, label))
    };
    match format {
        CorpusFormat::Jsonl => {
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line_no = i + 1;
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Record {
                    line: line_no,
                    message: e.to_string(),
                })?;
                rows.push(check(line_no, rec)?);
            }
        }
        CorpusFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_reader(file);
            for (i, rec) in reader.deserialize::<Record>().enumerate() {
                // header is line 1
                let line_no = i + 2;
                let rec = rec.map_err(|e| Error::Record {
                    line: line_no,
                    message: e.to_string(),
                })?;
                rows.push(check(line_no, rec)?);
            }
        }
    }

    let names: BTreeSet<&str> = rows.iter().map(|r| r.3.as_str()).collect();
    let label_names: Vec<String> = names.into_iter().map(str::to_string).collect();
    let index: BTreeMap<&str, usize> = label_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut seen = HashSet::new();
    let mut instances = Vec::with_capacity(rows.len());
    for (line, id, text, label) in &rows {
        if !seen.insert(id.as_str()) {
            return Err(Error::Record {
                line: *line,
                message: format!("duplicate id `{id}`"),
            });
        }
        instances.push(Instance {
            doc: Document::from_text(id.clone(), text),
            label: index[label.as_str()],
        });
    }
    LabeledCorpus::new(instances, label_names, SplitTag::Full)
}

/// Stratified, seeded train/test split.
///
/// The test side receives `round(n * test_fraction)` instances, allocated
/// across labels by largest remainder so every label is represented in
/// proportion (within one instance). Both sides keep the corpus order.
pub fn split(
    corpus: &LabeledCorpus,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledCorpus, LabeledCorpus)> {
    if corpus.is_empty() {
        return Err(Error::Split("corpus is empty".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = corpus.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::Split(format!(
            "test_fraction {test_fraction} on {n} instances leaves one side empty"
        )));
    }

    let counts = corpus.label_counts();
    let mut quota: Vec<usize> = counts
        .iter()
        .map(|&c| (c as f64 * test_fraction).floor() as usize)
        .collect();
    let mut remainders: Vec<(f64, usize)> = counts
        .iter()
        .enumerate()
        .map(|(l, &c)| (c as f64 * test_fraction - quota[l] as f64, l))
        .collect();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut missing = n_test.saturating_sub(quota.iter().sum());
    for &(_, l) in remainders.iter().cycle() {
        if missing == 0 {
            break;
        }
        if quota[l] < counts[l] {
            quota[l] += 1;
            missing -= 1;
        }
    }

    let mut rng = seed::rng_for(seed, "split");
    let mut is_test = vec![false; n];
    for (label, &q) in quota.iter().enumerate() {
        let mut members: Vec<usize> = corpus
            .instances
            .iter()
            .enumerate()
            .filter(|(_, inst)| inst.label == label)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        for &i in members.iter().take(q) {
            is_test[i] = true;
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (inst, &t) in corpus.instances.iter().zip(&is_test) {
        if t {
            test.push(inst.clone());
        } else {
            train.push(inst.clone());
        }
    }
    Ok((
        LabeledCorpus::new(train, corpus.label_names.clone(), SplitTag::Train)?,
        LabeledCorpus::new(test, corpus.label_names.clone(), SplitTag::Test)?,
    ))
}

fn position_mask(doc: &Document, positions: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; doc.len()];
    for &p in positions {
        if p >= doc.len() {
            return Err(Error::PositionOutOfRange {
                position: p,
                len: doc.len(),
            });
        }
        mask[p] = true;
    }
    Ok(mask)
}

fn keep_where(doc: &Document, mask: &[bool], keep: bool) -> Document {
    let tokens = doc
        .tokens
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m == keep)
        .map(|(t, _)| t.clone())
        .collect();
    Document::new(doc.id.clone(), tokens)
}

/// Tokens at `positions`, in document order (the explanation-only input).
pub fn extract(doc: &Document, positions: &[usize]) -> Result<Document> {
    let mask = position_mask(doc, positions)?;
    Ok(keep_where(doc, &mask, true))
}

/// Tokens not at `positions`, in document order (the non-explanation input).
pub fn complement(doc: &Document, positions: &[usize]) -> Result<Document> {
    let mask = position_mask(doc, positions)?;
    Ok(keep_where(doc, &mask, false))
}

/// Draws a keep rate `u ~ U[0, 1)` and keeps each token independently with
/// probability `u`.
pub fn random_mask(doc: &Document, seed: u64) -> Document {
    let mut rng = seed::rng(seed);
    let u: f64 = rng.random();
    let mask: Vec<bool> = (0..doc.len()).map(|_| rng.random::<f64>() < u).collect();
    keep_where(doc, &mask, true)
}

/// Applies one of the three masking constructions.
pub fn mask(doc: &Document, kind: MaskKind, positions: &[usize], seed: u64) -> Result<Document> {
    match kind {
        MaskKind::ExplanationOnly => extract(doc, positions),
        MaskKind::NonExplanation => complement(doc, positions),
        MaskKind::RandomMask => Ok(random_mask(doc, seed)),
    }
}
