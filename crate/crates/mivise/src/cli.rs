//! Command-line entry point.
//!
//! Subcommands: `synth`, `train`, `eval`, `query`, `ablate`, `sweep-k`,
//! `gradcheck`, `export-attention`. Every run resolves its configuration
//! (file defaults, then `--set key=value` overrides) and writes the result
//! next to its outputs as `config.resolved.json`.

use crate::config::RunConfig;
use crate::data::{featurize_sentence, Dataset, EmbeddingTable, Split};
use crate::error::{Error, Result};
use crate::retrieval;
use crate::trainer::{self, load_checkpoint, save_checkpoint, AblationSpec};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "mivise",
    about = "Train and evaluate multiple-instance visual-semantic embeddings",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file of flat dotted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory to write outputs into.
    #[arg(long)]
    out_dir: PathBuf,
    /// Override one config key, e.g. --set model.d=128 (repeatable; wins
    /// over the config file).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic planted-concept dataset.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train a model and save the best checkpoint.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Rank the corpus videos for one sentence.
    Query {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Sentence text (featurized through data.embedding_table).
        #[arg(long, conflicts_with = "sentence_id")]
        sentence: Option<String>,
        /// Sentence feature id from the sentence feature file.
        #[arg(long)]
        sentence_id: Option<String>,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Train and evaluate the five named ablation configurations.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train one model per K in grid.k and report nMR.
    SweepK {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check analytic gradients of the full objective against central
    /// finite differences on the bundled toy instance (64-bit).
    Gradcheck {
        /// Optional directory for the JSON report.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write the attention maps of one pair (both modalities) as JSON.
    ExportAttention {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Pair id from the manifest.
        #[arg(long)]
        pair: String,
    },
}

/// Parse argv and dispatch; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn resolve(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    for assignment in &common.set {
        cfg.set(assignment)?;
    }
    Ok(cfg)
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let manifest = cfg
        .opt_str("data.manifest")?
        .ok_or_else(|| Error::Config("missing required config key `data.manifest`".into()))?;
    let video = cfg
        .opt_str("data.video_features")?
        .ok_or_else(|| Error::Config("missing required config key `data.video_features`".into()))?;
    let sentence = cfg.opt_str("data.sentence_features")?;
    let table = cfg
        .opt_str("data.embedding_table")?
        .map(|p| EmbeddingTable::load(Path::new(p)))
        .transpose()?;
    Dataset::load(
        Path::new(manifest),
        Path::new(video),
        sentence.map(Path::new),
        table.as_ref(),
    )
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value)?)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth { common } => {
            let cfg = resolve(&common)?;
            let spec = cfg.synthetic_spec()?;
            let data = crate::data::generate_synthetic(&spec)?;
            data.write(&common.out_dir)?;
            cfg.write_resolved(&common.out_dir)?;
            println!(
                "wrote {} pairs to {} (manifest.tsv, video.mvft, sentence.mvft, truth.json)",
                spec.pairs,
                common.out_dir.display()
            );
            Ok(())
        }
        Command::Train { common } => {
            let cfg = resolve(&common)?;
            let train_cfg = cfg.train_config()?;
            let dataset = load_dataset(&cfg)?;
            let outcome = trainer::train(&dataset, &train_cfg)?;
            std::fs::create_dir_all(&common.out_dir)
                .map_err(|e| Error::io(common.out_dir.display().to_string(), e))?;
            let ckpt = common.out_dir.join("checkpoint.mvck");
            let last = outcome.log.last().expect("at least one epoch");
            save_checkpoint(&outcome.model, outcome.best_epoch, last.mean_objective, &ckpt)?;
            let log_path = common.out_dir.join("loss_log.jsonl");
            let mut lines = String::new();
            for entry in &outcome.log {
                lines.push_str(&serde_json::to_string(entry)?);
                lines.push('\n');
            }
            std::fs::write(&log_path, lines)
                .map_err(|e| Error::io(log_path.display().to_string(), e))?;
            cfg.write_resolved(&common.out_dir)?;
            println!(
                "trained {} epochs; final mean objective {:.6}; best epoch {}{}; checkpoint {}",
                outcome.log.len(),
                last.mean_objective,
                outcome.best_epoch,
                match outcome.best_val_nmr {
                    Some(nmr) => format!(" (val nMR {nmr:.2})"),
                    None => String::new(),
                },
                ckpt.display()
            );
            Ok(())
        }
        Command::Eval { common, checkpoint } => {
            let cfg = resolve(&common)?;
            let dataset = load_dataset(&cfg)?;
            let (model, _, _) = load_checkpoint(&checkpoint)?;
            let report = retrieval::evaluate(&dataset, Split::Test, &model)?;
            write_json(&common.out_dir, "report.json", &serde_json::to_value(&report)?)?;
            let table = format!(
                "{}\n{}\n",
                retrieval::RetrievalReport::table_header("test"),
                report.table_row("test")
            );
            let table_path = common.out_dir.join("report.txt");
            std::fs::write(&table_path, &table)
                .map_err(|e| Error::io(table_path.display().to_string(), e))?;
            cfg.write_resolved(&common.out_dir)?;
            print!("{table}");
            Ok(())
        }
        Command::Query {
            common,
            checkpoint,
            sentence,
            sentence_id,
            top,
        } => {
            let cfg = resolve(&common)?;
            let dataset = load_dataset(&cfg)?;
            let (model, _, _) = load_checkpoint(&checkpoint)?;
            let features = match (&sentence, &sentence_id) {
                (Some(text), None) => {
                    let table_path = cfg.opt_str("data.embedding_table")?.ok_or_else(|| {
                        Error::Config(
                            "querying by text needs `data.embedding_table` in the config".into(),
                        )
                    })?;
                    let table = EmbeddingTable::load(Path::new(table_path))?;
                    featurize_sentence(text, &table)?
                }
                (None, Some(id)) => dataset
                    .sentence
                    .get(id)
                    .cloned()
                    .ok_or_else(|| Error::UnknownId(id.clone()))?,
                _ => {
                    return Err(Error::Config(
                        "query needs exactly one of --sentence or --sentence-id".into(),
                    ))
                }
            };
            let index = retrieval::build_index(
                dataset
                    .records
                    .iter()
                    .map(|r| Ok((r.video_ref.clone(), dataset.video_features(r)?.clone())))
                    .collect::<Result<Vec<_>>>()?,
                &model,
            )?;
            let (ranked, pairs) = retrieval::query(&features, &index, &model, top)?;
            cfg.write_resolved(&common.out_dir)?;
            for (rank, (id, score)) in ranked.iter().enumerate() {
                println!("{:>3}  {id}  {score:.4}", rank + 1);
            }
            eprintln!("scored {} items ({pairs} row-pair products)", index.len());
            Ok(())
        }
        Command::Ablate { common } => {
            let cfg = resolve(&common)?;
            let base = cfg.train_config()?;
            let dataset = load_dataset(&cfg)?;
            let spec = AblationSpec::full(base);
            let outcomes = trainer::run_ablation(&dataset, &spec)?;
            let mut table = retrieval::RetrievalReport::table_header("config");
            table.push('\n');
            let mut rows = Vec::new();
            for o in &outcomes {
                table.push_str(&o.report.table_row(o.row.name()));
                table.push('\n');
                rows.push(json!({ "config": o.row.name(), "report": o.report }));
            }
            write_json(&common.out_dir, "ablation.json", &serde_json::Value::Array(rows))?;
            let table_path = common.out_dir.join("ablation.txt");
            std::fs::write(&table_path, &table)
                .map_err(|e| Error::io(table_path.display().to_string(), e))?;
            cfg.write_resolved(&common.out_dir)?;
            print!("{table}");
            Ok(())
        }
        Command::SweepK { common } => {
            let cfg = resolve(&common)?;
            let base = cfg.train_config()?;
            let ks = base
                .grid
                .as_ref()
                .map(|g| g.k.clone())
                .unwrap_or_default();
            let dataset = load_dataset(&cfg)?;
            let outcomes = trainer::sweep_k(&dataset, &base, &ks)?;
            let mut rows = Vec::new();
            println!("{:>4} {:>8} {:>8}", "K", "MR", "nMR");
            for o in &outcomes {
                println!("{:>4} {:>8} {:>8.2}", o.k, o.report.mr, o.report.nmr);
                rows.push(json!({ "k": o.k, "report": o.report }));
            }
            write_json(&common.out_dir, "sweep_k.json", &serde_json::Value::Array(rows))?;
            cfg.write_resolved(&common.out_dir)?;
            Ok(())
        }
        Command::Gradcheck { out_dir } => {
            let reports = trainer::toy_objective_gradcheck()?;
            let mut all_pass = true;
            let mut rows = Vec::new();
            for (label, report) in &reports {
                println!("{label}: {}", report.summary());
                all_pass &= report.pass;
                rows.push(json!({
                    "combination": label,
                    "pass": report.pass,
                    "max_relative_error": report.max_relative_error,
                    "tolerance": report.tolerance,
                }));
            }
            if let Some(dir) = out_dir {
                write_json(&dir, "gradcheck.json", &serde_json::Value::Array(rows))?;
            }
            if all_pass {
                println!("PASS");
                Ok(())
            } else {
                Err(Error::Contract(
                    "gradient check failed; see per-combination output".into(),
                ))
            }
        }
        Command::ExportAttention {
            common,
            checkpoint,
            pair,
        } => {
            let cfg = resolve(&common)?;
            let dataset = load_dataset(&cfg)?;
            let (model, _, _) = load_checkpoint(&checkpoint)?;
            let record = dataset
                .records
                .iter()
                .find(|r| r.pair_id == pair)
                .ok_or_else(|| Error::UnknownId(pair.clone()))?;
            let video = model.embed_video(dataset.video_features(record)?)?;
            let sentence = model.embed_sentence(dataset.sentence_features(record)?)?;
            let map = |set: &crate::encoder::EmbeddingSet<f32>| {
                let a = &set.attention;
                json!({
                    "k": a.rows(),
                    "t": a.cols(),
                    "rows": (0..a.rows())
                        .map(|i| a.row(i).to_vec())
                        .collect::<Vec<_>>(),
                })
            };
            let value = json!({
                "pair": pair,
                "video": map(&video),
                "sentence": map(&sentence),
            });
            let path = write_json(
                &common.out_dir,
                &format!("attention_{pair}.json"),
                &value,
            )?;
            cfg.write_resolved(&common.out_dir)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}
