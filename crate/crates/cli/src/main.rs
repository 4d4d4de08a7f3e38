use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use solsum_core::callgraph::DEFAULT_MAX_DEPTH;
use solsum_core::pipeline::{self, PipelineConfig, RetrieveQuery, TargetSelector};

#[derive(Debug, Parser)]
#[command(
    name = "solsum",
    version,
    about = "Summarize Solidity functions with call-graph aware prompts"
)]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Repository directory.
    #[arg(long, global = true)]
    repo: Option<PathBuf>,
    /// Number of retrieved examples: 0, 1, 3 or 5.
    #[arg(long, global = true)]
    shots: Option<usize>,
    /// Included semantic facts: `all`, `none` or a list of cfg,if,idgv.
    #[arg(long, global = true)]
    mask: Option<String>,
    /// `mock` or `remote`.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Split seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse contracts and add their documented functions to the repository.
    Ingest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Partition the repository into train, validation and test splits.
    Split,
    /// Build or refresh the embedding index over the train split.
    Index,
    /// Generate summaries for the selected targets.
    Summarize {
        /// `train`, `validation`, `test`, `uuid:<a,b>` or `glob:<pattern>`.
        #[arg(long, default_value = "test")]
        targets: String,
    },
    /// Score a run's summaries against the reference comments.
    Evaluate { run_dir: PathBuf },
    /// Summarize and evaluate the targets under every ablation mask.
    Ablate {
        #[arg(long, default_value = "test")]
        targets: String,
    },
    /// Print the DOT call tree of one function.
    Calltree {
        file: PathBuf,
        contract: String,
        function: String,
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
        depth: usize,
        /// Also render a PNG with graphviz.
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Print the top-k train samples nearest a sample or a code snippet.
    Retrieve {
        #[arg(long, conflicts_with = "text", required_unless_present = "text")]
        uuid: Option<String>,
        #[arg(long)]
        text: Option<String>,
        #[arg(short, long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut config = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(repo) = &cli.repo {
        config.repo_root = repo.clone();
    }
    if let Some(shots) = cli.shots {
        config.set("shots", &shots.to_string())?;
    }
    if let Some(mask) = &cli.mask {
        config.set("mask", mask).context("--mask")?;
    }
    if let Some(backend) = &cli.backend {
        config.set("backend", backend).context("--backend")?;
    }
    if let Some(seed) = cli.seed {
        config.split_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Ingest { paths } => {
            let report = pipeline::cmd_ingest(&config, &paths)?;
            print!("{}", pipeline::format_ingest(&report));
        }
        Command::Split => {
            let splits = pipeline::cmd_split(&config)?;
            println!(
                "train {}, validation {}, test {}",
                splits.train.len(),
                splits.validation.len(),
                splits.test.len()
            );
        }
        Command::Index => {
            let summary = pipeline::cmd_index(&config)?;
            let state = if summary.cache_hit { "cached" } else { "built" };
            println!(
                "{} entries ({state}, {})",
                summary.entries, summary.provider_id
            );
        }
        Command::Summarize { targets } => {
            let selector: TargetSelector = targets.parse()?;
            let run = pipeline::cmd_summarize(&config, &selector)?;
            println!("{} outputs in {}", run.outputs, run.run_dir.display());
        }
        Command::Evaluate { run_dir } => {
            let report = pipeline::cmd_evaluate(&config, &run_dir)?;
            print!("{}", report.report.to_table());
            if report.skipped > 0 {
                println!("skipped {} outputs without a reference", report.skipped);
            }
        }
        Command::Ablate { targets } => {
            let selector: TargetSelector = targets.parse()?;
            let (table, dir) = pipeline::cmd_ablate(&config, &selector)?;
            print!("{}", table.to_table());
            println!("written to {}", dir.display());
        }
        Command::Calltree {
            file,
            contract,
            function,
            depth,
            png,
        } => {
            print!(
                "{}",
                pipeline::calltree(&file, &contract, &function, depth, png.as_deref())?
            );
        }
        Command::Retrieve { uuid, text, k, out } => {
            let query = match (uuid, text) {
                (Some(uuid), _) => RetrieveQuery::Sample(uuid),
                (None, Some(text)) => RetrieveQuery::Text(text),
                (None, None) => unreachable!("clap requires --uuid or --text"),
            };
            let saved = pipeline::cmd_retrieve(&config, &query, k, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&saved)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Library errors already embed their cause in the message.
            let mut message = e.to_string();
            for cause in e.chain().skip(1) {
                let text = cause.to_string();
                if !message.contains(&text) {
                    message = format!("{message}: {text}");
                }
            }
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
