//! Command-line frontend.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::model::{load_dataset, Dataset};
use crate::pipeline::{self, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "litpref", version, about = "Perspectivist literary-evaluation pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true)]
    pub top_fraction: Option<f64>,
    /// Profile clusters (0 = choose by silhouette).
    #[arg(long, global = true)]
    pub k_clusters: Option<usize>,
    /// Candidate k range for silhouette selection, e.g. 2-6.
    #[arg(long, global = true, value_parser = parse_range)]
    pub k_range: Option<[usize; 2]>,
    /// Standardize features before PCA.
    #[arg(long, global = true)]
    pub pca_standardize: Option<bool>,
    /// Forest search: full, small or fixed.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Cap on untied pairs per reader (0 = no cap).
    #[arg(long, global = true)]
    pub max_pairs_per_reader: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate annotation bundles and compute feature vectors.
    Extract(DatasetArg),
    /// Normalize scores, compute centroids and pairwise instances.
    Prefs(DatasetArg),
    /// Train per-reader forests and the logistic baseline.
    Train(DatasetArg),
    /// Correlation filter, PCA map, clusters and AI-preference rates.
    Analyze(DatasetArg),
    /// Run a synthetic-reader recovery experiment.
    Simulate {
        /// Experiment specification (JSON); defaults apply when omitted.
        #[arg(long)]
        experiment: Option<PathBuf>,
    },
    /// Run extract, prefs, train and analyze in sequence.
    Report(DatasetArg),
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArg {
    /// Dataset manifest (TOML).
    #[arg(long)]
    pub dataset: PathBuf,
}

fn parse_range(s: &str) -> std::result::Result<[usize; 2], String> {
    let (a, b) = s.split_once('-').ok_or_else(|| format!("expected LO-HI, got {s:?}"))?;
    let lo = a.trim().parse().map_err(|_| format!("bad bound {a:?}"))?;
    let hi = b.trim().parse().map_err(|_| format!("bad bound {b:?}"))?;
    Ok([lo, hi])
}

/// Merges defaults, the config file and flags, in increasing precedence.
pub fn resolve_config(args: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let raw = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            RunConfig::from_toml(&raw, p)?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.top_fraction {
        cfg.top_fraction = v;
    }
    if let Some(v) = args.k_clusters {
        cfg.k_clusters = v;
    }
    if let Some(v) = args.k_range {
        cfg.k_range = v;
    }
    if let Some(v) = args.pca_standardize {
        cfg.pca_standardize = v;
    }
    if let Some(g) = &args.grid {
        cfg.grid = serde_json::from_value(serde_json::Value::String(g.clone()))
            .map_err(|_| Error::Invalid(format!("unknown grid {g:?}; expected full, small or fixed")))?;
    }
    if let Some(v) = args.max_pairs_per_reader {
        cfg.max_pairs_per_reader = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stage_inputs(out: &Path, names: &[&str]) -> Vec<PathBuf> {
    names.iter().map(|n| out.join(n)).collect()
}

fn finish(out: &Path, command: &str, cfg: &RunConfig, inputs: Vec<PathBuf>, files: &[String]) -> Result<()> {
    pipeline::validate_outputs(out, files)?;
    let manifest = pipeline::write_manifest(out, command, cfg, &inputs, files)?;
    log::info!("{command}: wrote {} artifacts and {manifest}", files.len());
    Ok(())
}

fn run_stage(stage: &str, dataset: &Dataset, cfg: &RunConfig, out: &Path) -> Result<(Vec<PathBuf>, Vec<String>)> {
    use pipeline::*;
    let mut inputs = dataset.sources.clone();
    let files = match stage {
        "extract" => {
            if let Some(p) = &dataset.annotations_path {
                inputs.push(p.clone());
            }
            run_extract(dataset, cfg, out)?
        }
        "prefs" => {
            inputs.extend(stage_inputs(out, &[FEATURES_FILE]));
            run_prefs(dataset, cfg, out)?
        }
        "train" => {
            inputs.extend(stage_inputs(out, &[PAIRS_FILE]));
            run_train(&dataset.name, cfg, out)?
        }
        "analyze" => {
            inputs.extend(stage_inputs(out, &[FEATURES_FILE, PROFILES_FILE, SCORES_FILE, CENTROIDS_FILE]));
            run_analyze(dataset, cfg, out)?
        }
        other => unreachable!("unknown stage {other}"),
    };
    Ok((inputs, files))
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(&cli.global)?;
    if cfg.workers > 0 {
        // Fails only if the pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global();
    }
    let out = cli.global.out_dir.as_path();
    match &cli.command {
        Command::Simulate { experiment } => {
            let files = pipeline::run_simulate(experiment.as_deref(), &cfg, out)?;
            let inputs = experiment.iter().cloned().collect();
            finish(out, "simulate", &cfg, inputs, &files)
        }
        Command::Report(d) => {
            let dataset = load_dataset(&d.dataset)?;
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            let mut inputs = dataset.sources.clone();
            if let Some(p) = &dataset.annotations_path {
                inputs.push(p.clone());
            }
            let mut files = Vec::new();
            for stage in ["extract", "prefs", "train", "analyze"] {
                log::info!("report: running {stage}");
                let (_, f) = run_stage(stage, &dataset, &cfg, out)?;
                files.extend(f);
            }
            finish(out, "report", &cfg, inputs, &files)
        }
        Command::Extract(d) | Command::Prefs(d) | Command::Train(d) | Command::Analyze(d) => {
            let stage = match &cli.command {
                Command::Extract(_) => "extract",
                Command::Prefs(_) => "prefs",
                Command::Train(_) => "train",
                _ => "analyze",
            };
            let dataset = load_dataset(&d.dataset)?;
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            let (inputs, files) = run_stage(stage, &dataset, &cfg, out)?;
            finish(out, stage, &cfg, inputs, &files)
        }
    }
}
