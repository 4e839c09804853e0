//! Command-line front end: ask a single question, sweep a benchmark
//! metadata file, or re-render the report for a finished sweep.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use conclave_core::agent::{run_ensemble, RunRequest};
use conclave_core::config::{assemble, Config, GatewayMode};
use conclave_core::harness::{
    ablation_label, aggregate, load_dataset, load_results_dir, run_benchmark, BenchOptions,
};

#[derive(Parser)]
#[command(
    name = "conclave",
    version,
    about = "Tool-using agent runtime and benchmark harness"
)]
struct Cli {
    /// Path to a TOML config file; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GatewayArgs {
    /// Replay LLM responses from recorded transcripts in this directory.
    #[arg(long, conflicts_with = "record")]
    replay: Option<PathBuf>,

    /// Record LLM responses into this directory while running live.
    #[arg(long)]
    record: Option<PathBuf>,
}

impl GatewayArgs {
    fn mode(&self) -> GatewayMode {
        match (&self.replay, &self.record) {
            (Some(dir), _) => GatewayMode::Replay(dir.clone()),
            (None, Some(dir)) => GatewayMode::Record(dir.clone()),
            (None, None) => GatewayMode::Live,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Answer one question with the full pipeline.
    Ask {
        question: String,

        /// Attach a local file (copied into the interpreter workdir).
        #[arg(long)]
        file: Option<PathBuf>,

        #[command(flatten)]
        gateway: GatewayArgs,

        /// Skip the actor/critic review.
        #[arg(long)]
        no_jury: bool,

        /// Number of independent runs to vote over.
        #[arg(long)]
        ensemble: Option<usize>,

        #[arg(long)]
        max_steps: Option<usize>,

        /// Where to keep traces and scratch space (default: a temp dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Run a benchmark sweep over a JSONL metadata file.
    Bench {
        /// Metadata file, or a dataset root combined with --split.
        dataset: PathBuf,

        /// Subdirectory to resolve when DATASET is a directory; also labels
        /// the report.
        #[arg(long)]
        split: Option<String>,

        #[arg(long, default_value = "bench-out")]
        out: PathBuf,

        #[command(flatten)]
        gateway: GatewayArgs,

        /// Ablation: disable the actor/critic review.
        #[arg(long)]
        no_jury: bool,

        /// Ablation: single run per task instead of an ensemble.
        #[arg(long)]
        no_ensemble: bool,

        /// Ensemble size override.
        #[arg(long)]
        ensemble: Option<usize>,

        #[arg(long)]
        max_steps: Option<usize>,

        /// Parallel task workers.
        #[arg(long)]
        workers: Option<usize>,

        /// Report row label override.
        #[arg(long)]
        label: Option<String>,

        /// Run only the first N tasks.
        #[arg(long)]
        limit: Option<usize>,
    },

    /// Re-render the report for a finished sweep directory.
    Report { results_dir: PathBuf },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(path) => Config::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => Config::default(),
    };

    match cli.command {
        Command::Ask {
            question,
            file,
            gateway,
            no_jury,
            ensemble,
            max_steps,
            out,
        } => {
            if no_jury {
                config.run.jury = false;
            }
            if let Some(n) = ensemble {
                config.run.ensemble = n.max(1);
            }
            if let Some(n) = max_steps {
                config.run.max_steps = n.max(1);
            }
            let deps = assemble(&config, &gateway.mode())?;

            let keep_out = out.is_some();
            let out_dir = match out {
                Some(dir) => dir,
                None => std::env::temp_dir().join(format!("conclave-ask-{}", std::process::id())),
            };
            std::fs::create_dir_all(&out_dir)?;

            let request = match file {
                Some(path) => {
                    if !path.is_file() {
                        bail!("attached file {} does not exist", path.display());
                    }
                    RunRequest::with_file(question, path)
                }
                None => RunRequest::new(question),
            };

            let started = Instant::now();
            let outcome = run_ensemble(
                &request,
                &deps,
                &config,
                &out_dir.join("work"),
                Some(&out_dir.join("traces")),
                "ask",
            )?;
            println!("{}", outcome.vote.winner.formatted);
            eprintln!(
                "runs: {}, agreement: {}/{}, steps (winning run): {}, elapsed: {:.1}s",
                outcome.vote.n_runs,
                outcome
                    .vote
                    .tally
                    .get(&outcome.vote.winner.normalized)
                    .copied()
                    .unwrap_or(0),
                outcome.vote.n_runs,
                outcome.runs[outcome.vote.winner.run_index].steps,
                started.elapsed().as_secs_f64(),
            );
            if keep_out {
                eprintln!("traces under {}", out_dir.join("traces").display());
            } else {
                let _ = std::fs::remove_dir_all(&out_dir);
            }
        }

        Command::Bench {
            dataset,
            split,
            out,
            gateway,
            no_jury,
            no_ensemble,
            ensemble,
            max_steps,
            workers,
            label,
            limit,
        } => {
            if no_jury {
                config.run.jury = false;
            }
            if no_ensemble {
                config.run.ensemble = 1;
            }
            if let Some(n) = ensemble {
                config.run.ensemble = n.max(1);
            }
            if let Some(n) = max_steps {
                config.run.max_steps = n.max(1);
            }
            if let Some(n) = workers {
                config.run.workers = n.max(1);
            }

            let metadata = if dataset.is_dir() {
                let split_name = split.clone().unwrap_or_else(|| "validation".into());
                dataset.join(split_name).join("metadata.jsonl")
            } else {
                dataset
            };
            let mut tasks = load_dataset(&metadata)
                .with_context(|| format!("loading {}", metadata.display()))?;
            if let Some(n) = limit {
                tasks.truncate(n);
            }

            let deps = assemble(&config, &gateway.mode())?;
            let options = BenchOptions {
                label: label.unwrap_or_else(|| ablation_label(no_jury, no_ensemble).to_string()),
                out_dir: out.clone(),
                workers: config.run.workers,
                split,
            };
            let output = run_benchmark(&tasks, &config, &deps, &options)?;
            print!("{}", conclave_core::harness::render_text(&output.report));
            eprintln!("artifacts under {}", out.display());
        }

        Command::Report { results_dir } => {
            let sweep = load_results_dir(&results_dir)?;
            let report = aggregate(
                &sweep.results,
                &sweep.tasks,
                &sweep.label,
                sweep.split.as_deref(),
            )?;
            print!("{}", conclave_core::harness::render_text(&report));
        }
    }
    Ok(())
}
