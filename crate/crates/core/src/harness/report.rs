//! Tables, summaries and the manifest, regenerated purely from the
//! per-instance JSON of a run directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{AttackMode, ExperimentConfig};
use super::pipeline::{
    self, read_json, write_json, EvalXTable, Provenance, RunLayout, RunManifest, EVALX_TABLES,
};
use crate::eraser::{self, FaithfulnessReport};
use crate::error::{Error, Result};
use crate::evalx::{self, DropRule};
use crate::meta_attack::{PairedReport, PAIRED_HEADER};
use crate::models::MODEL_FORMAT;

pub const TABLE2_HEADER: [&str; 3] = ["method", "detector_accuracy", "detector_test_accuracy"];

pub const SWEEP_HEADER: [&str; 10] = [
    "num_tokens",
    "label_recovery_rate",
    "acc",
    "eacc",
    "eacc_std",
    "auroc",
    "eauroc",
    "eauroc_std",
    "fallback_rate",
    "encoded",
];

pub const FIG4_HEADER: [&str; 6] = [
    "method",
    "num_tokens",
    "eacc",
    "eauroc",
    "eacc_cutoff",
    "eauroc_cutoff",
];

/// Mean EVAL-X scores at one explanation length, over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub num_tokens: usize,
    pub label_recovery_rate: Option<f64>,
    pub acc: f64,
    pub eacc: f64,
    pub eacc_std: f64,
    pub auroc: Option<f64>,
    pub eauroc: Option<f64>,
    pub eauroc_std: Option<f64>,
    pub fallback_rate: f64,
    pub encoded: bool,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row per `k` (in first-seen order), averaging over runs.
pub fn sweep_rows(table: &EvalXTable) -> Result<Vec<SweepRow>> {
    let mut ks: Vec<usize> = Vec::new();
    for r in &table.runs {
        if !ks.contains(&r.k) {
            ks.push(r.k);
        }
    }
    ks.into_iter()
        .map(|k| {
            let reports = table
                .runs
                .iter()
                .filter(|r| r.k == k)
                .map(|r| {
                    evalx::summarize(&table.method, k, &r.instances, &table.base, table.drop_rule)
                })
                .collect::<Result<Vec<_>>>()?;
            let (eacc, eacc_std) = mean_std(&reports.iter().map(|r| r.eacc).collect::<Vec<_>>());
            let eaucs: Option<Vec<f64>> = reports.iter().map(|r| r.eauroc).collect();
            let (eauroc, eauroc_std) = match eaucs {
                Some(v) => {
                    let (m, s) = mean_std(&v);
                    (Some(m), Some(s))
                }
                None => (None, None),
            };
            let recov: Option<Vec<f64>> = reports.iter().map(|r| r.label_recovery_rate).collect();
            let fallback = mean_std(&reports.iter().map(|r| r.fallback_rate).collect::<Vec<_>>()).0;
            Ok(SweepRow {
                num_tokens: k,
                label_recovery_rate: recov.map(|v| mean_std(&v).0),
                acc: table.base.acc,
                eacc,
                eacc_std,
                auroc: table.base.auroc,
                eauroc,
                eauroc_std,
                fallback_rate: fallback,
                encoded: table
                    .drop_rule
                    .is_encoded(table.base.acc, eacc, table.base.auroc, eauroc),
            })
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(eraser::fmt4).unwrap_or_else(|| "n/a".into())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.num_tokens.to_string(),
            opt(r.label_recovery_rate),
            eraser::fmt4(r.acc),
            eraser::fmt4(r.eacc),
            eraser::fmt4(r.eacc_std),
            opt(r.auroc),
            opt(r.eauroc),
            opt(r.eauroc_std),
            eraser::fmt4(r.fallback_rate),
            r.encoded.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Fig.-3-style confidence means for one method and attack mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSummary {
    pub method: String,
    pub mode: String,
    pub base_confidence: f64,
    pub base_confidence_explanation: f64,
    pub base_confidence_non_explanation: f64,
    pub wrapped_confidence_explanation: f64,
    pub wrapped_confidence_non_explanation: f64,
}

fn mean_confidence(r: &FaithfulnessReport) -> f64 {
    r.instances.iter().map(|i| i.confidence).sum::<f64>() / r.instances.len().max(1) as f64
}

pub fn confidence_summary(mode: AttackMode, p: &PairedReport) -> ConfidenceSummary {
    ConfidenceSummary {
        method: p.method.clone(),
        mode: mode.name().to_string(),
        base_confidence: mean_confidence(&p.base),
        base_confidence_explanation: p.base.mean_confidence_explanation,
        base_confidence_non_explanation: p.base.mean_confidence_non_explanation,
        wrapped_confidence_explanation: p.wrapped.mean_confidence_explanation,
        wrapped_confidence_non_explanation: p.wrapped.mean_confidence_non_explanation,
    }
}

fn table1_row(
    label: String,
    r: &FaithfulnessReport,
    acc: Option<f64>,
    flips: Option<usize>,
) -> Vec<String> {
    vec![
        label,
        eraser::fmt4(r.macro_f1),
        eraser::fmt4(r.mean_comprehensiveness),
        eraser::fmt4(r.mean_sufficiency),
        eraser::fmt4(r.mean_sum),
        acc.map(eraser::fmt4).unwrap_or_default(),
        flips.map(|f| f.to_string()).unwrap_or_default(),
    ]
}

fn list_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            list_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("under root");
            out.push(
                rel.components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/"),
            );
        }
    }
    Ok(())
}

/// Regenerates every table, the confidence summary and the manifest.
pub fn write_reports(layout: &RunLayout) -> Result<RunManifest> {
    let config = ExperimentConfig::load(&layout.config())?;
    let root = &layout.root;

    let mut t1 = csv_writer(&root.join("table1.csv"))?;
    t1.write_record(PAIRED_HEADER)?;
    let mut t2 = csv_writer(&root.join("table2.csv"))?;
    t2.write_record(TABLE2_HEADER)?;
    let mut summaries = Vec::new();
    for method in &config.explain.methods {
        let name = method.name();
        let base = pipeline::load_eraser(layout, name)?;
        t1.write_record(table1_row(name.to_string(), &base, None, None))?;
        for &mode in &config.meta_attack.modes {
            let p = pipeline::load_attack(layout, mode, name)?;
            t1.write_record(table1_row(
                format!("{name} + meta-algo ({})", mode.name()),
                &p.wrapped,
                p.detector_heldout_accuracy,
                Some(p.flip_count),
            ))?;
            if let (Some(h), Some(t)) = (p.detector_heldout_accuracy, p.detector_test_accuracy) {
                t2.write_record([name.to_string(), eraser::fmt4(h), eraser::fmt4(t)])?;
            }
            summaries.push(confidence_summary(mode, &p));
        }
    }
    t1.flush().map_err(|e| Error::io(root, e))?;
    t2.flush().map_err(|e| Error::io(root, e))?;
    if !config.meta_attack.modes.is_empty() {
        write_json(&root.join("confidence_summary.json"), &summaries, true)?;
    }

    if config.evalx.enabled {
        let files = [
            ("likelihood_ratio", "table3.csv"),
            ("query_direct", "evalx_direct.csv"),
            ("query_majority", "table4.csv"),
            ("query_single", "table5.csv"),
        ];
        let mut fig = csv_writer(&root.join("fig4.csv"))?;
        fig.write_record(FIG4_HEADER)?;
        for (table_name, csv_name) in files {
            debug_assert!(EVALX_TABLES.contains(&table_name));
            let path = layout.evalx_runs(table_name);
            if !path.exists() && table_name != "likelihood_ratio" && table_name != "query_direct" {
                continue;
            }
            let table: EvalXTable = read_json(&path)?;
            let rows = sweep_rows(&table)?;
            write_sweep(&root.join(csv_name), &rows)?;
            if table_name == "query_direct" {
                continue;
            }
            let rule: DropRule = table.drop_rule;
            for r in &rows {
                fig.write_record([
                    table_name.to_string(),
                    r.num_tokens.to_string(),
                    eraser::fmt4(r.eacc),
                    opt(r.eauroc),
                    eraser::fmt4(rule.cutoff(r.acc)),
                    opt(r.auroc.map(|a| rule.cutoff(a))),
                ])?;
            }
        }
        fig.flush().map_err(|e| Error::io(root, e))?;
    }

    let mut provenance = BTreeMap::new();
    let prov_dir = root.join("provenance");
    if prov_dir.exists() {
        let mut files = Vec::new();
        list_files(&prov_dir, &prov_dir, &mut files)?;
        for f in files {
            let p: Provenance = read_json(&prov_dir.join(&f))?;
            provenance.insert(p.artifact, p.split);
        }
    }
    let mut artifacts = Vec::new();
    list_files(root, root, &mut artifacts)?;
    artifacts.retain(|a| a != "manifest.json");
    artifacts.push("manifest.json".into());
    let manifest = RunManifest {
        config_hash: config.hash(),
        versions: BTreeMap::from([
            (
                "faithlab".to_string(),
                env!("CARGO_PKG_VERSION").to_string(),
            ),
            ("model_format".to_string(), MODEL_FORMAT.to_string()),
            (
                "detector_format".to_string(),
                crate::meta_attack::DETECTOR_FORMAT.to_string(),
            ),
        ]),
        seeds: pipeline::component_seeds(&config),
        provenance,
        artifacts,
    };
    write_json(&layout.manifest(), &manifest, true)?;
    Ok(manifest)
}
