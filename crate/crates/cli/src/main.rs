use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use faithlab::harness::pipeline::{self, RunLayout};
use faithlab::harness::{report, ExperimentConfig};

/// Faithfulness-metric laboratory: train, explain, score and attack text classifiers.
#[derive(Parser, Debug)]
#[command(name = "faithlab", version)]
struct Cli {
    /// Experiment config (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (all cores by default). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override any config field, e.g. `--set explain.fraction=0.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Use this run directory instead of `<out>/run-<config hash>`.
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate or load the corpus and write the train/test split.
    GenData,
    /// Train the prediction model on the train split.
    Train,
    /// Explain the test split with every configured saliency method.
    Explain,
    /// Sufficiency / comprehensiveness of the base model.
    EvalEraser,
    /// Wrap the model (oracle and/or trained case detector) and re-score.
    AttackEraser,
    /// Train the EVAL-X evaluator, its approximations and the code book.
    TrainEvalx,
    /// Run both label-encoding attacks against the evaluator.
    AttackEvalx,
    /// Regenerate tables and the manifest from persisted per-instance results.
    Report,
    /// Every step above, in order, into a fresh run directory.
    Run,
    /// Print the effective config as TOML.
    ShowConfig,
}

fn parse_value(raw: &str) -> toml::Value {
    // bare words become strings
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        bail!("override `{assignment}` is not KEY=VALUE");
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut node = table;
    for p in parents {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .with_context(|| format!("`{p}` in `{key}` is not a table"))?;
    }
    node.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let base = match &cli.config {
        Some(path) => {
            ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    let mut config = if cli.overrides.is_empty() {
        base
    } else {
        let mut table: toml::Table = toml::from_str(&base.to_toml()?)?;
        for o in &cli.overrides {
            apply_override(&mut table, o)?;
        }
        ExperimentConfig::from_toml(&toml::to_string(&table)?)?
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = execute(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let config = build_config(cli)?;
    let layout = RunLayout::new(cli.run_dir.clone().unwrap_or_else(|| config.run_dir()));
    let step = |name: &str| {
        let (_, f) = pipeline::STEPS
            .iter()
            .find(|(n, _)| *n == name)
            .expect("known step");
        pipeline::with_threads(cli.threads, || f(&config, &layout))
            .with_context(|| format!("step `{name}` failed"))?;
        println!("{name}: done ({})", layout.root.display());
        Ok::<(), anyhow::Error>(())
    };
    match cli.command {
        Command::GenData => step("gen-data"),
        Command::Train => step("train"),
        Command::Explain => step("explain"),
        Command::EvalEraser => step("eval-eraser"),
        Command::AttackEraser => step("attack-eraser"),
        Command::TrainEvalx => step("train-evalx"),
        Command::AttackEvalx => step("attack-evalx"),
        Command::Report => {
            let manifest = report::write_reports(&layout)
                .with_context(|| format!("reporting on {}", layout.root.display()))?;
            println!(
                "report: {} files ({})",
                manifest.artifacts.len(),
                layout.root.display()
            );
            Ok(())
        }
        Command::Run => {
            if cli.run_dir.is_some() {
                bail!("`run` always writes to <out>/run-<config hash>; drop --run-dir");
            }
            let manifest = pipeline::run(&config, cli.threads)?;
            println!(
                "run {}: {} files in {}",
                manifest.config_hash,
                manifest.artifacts.len(),
                config.run_dir().display()
            );
            Ok(())
        }
        Command::ShowConfig => {
            print!("{}", config.to_toml()?);
            Ok(())
        }
    }
}
