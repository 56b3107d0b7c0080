use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{ArgGroup, Parser, Subcommand};
use matec_core::domain::ConsultMode;
use matec_core::gateway::FaultInjection;
use matec_core::rag::{HashEmbedder, VectorStore, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP};
use matec_core::stats::{format_summary_table, parse_ratings_csv, summarize_survey};
use matec_service::config::ServiceConfig;
use matec_service::demo::{load_case, run_demo, DemoOptions};
use matec_service::state::seed_references;

#[derive(Parser)]
#[command(name = "matec", version, about = "Multi-agent clinical team consultation engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API and the vitals monitor.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Add a plain-text reference document to a store's retrieval corpus.
    #[command(group(ArgGroup::new("target").required(true).args(["config", "store"])))]
    Ingest {
        file: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Store directory, when no config file is at hand.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Defaults to the file stem.
        #[arg(long)]
        doc_id: Option<String>,
        #[arg(long)]
        title: Option<String>,
    },
    /// Summarize a `question,rating` CSV with per-question signed-rank tests.
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run one mock consultation and print the transcript as JSON.
    Demo {
        /// A bundled case name or a path to a case document.
        #[arg(long)]
        case: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// e.g. `timeout@CriticalCare` or `fabricate:Lab:lactate:2.0@Nurse`.
        #[arg(long)]
        fault: Option<FaultInjection>,
        #[arg(long)]
        timeout_ms: Option<u64>,
        #[arg(long, default_value = "TeamAssessment", value_parser = parse_mode)]
        mode: ConsultMode,
        #[arg(long, default_value = "")]
        question: String,
    },
}

fn parse_mode(s: &str) -> Result<ConsultMode, String> {
    ConsultMode::parse(s).ok_or_else(|| {
        let known: Vec<_> = ConsultMode::TEAM.iter().map(|m| m.as_str()).collect();
        format!("unknown mode {s:?}; expected one of {}", known.join(", "))
    })
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Serve { config } => matec_service::serve(ServiceConfig::load(&config)?).await,
        Command::Ingest { file, config, store, doc_id, title } => {
            let store_dir = match (config, store) {
                (Some(c), _) => ServiceConfig::load(&c)?.store_dir,
                (None, Some(s)) => s,
                (None, None) => unreachable!("clap requires one"),
            };
            ingest(&file, &store_dir, doc_id, title).await
        }
        Command::Stats { input } => {
            let reader = BufReader::new(File::open(&input).with_context(|| format!("opening {}", input.display()))?);
            let summary = summarize_survey(&parse_ratings_csv(reader)?)?;
            print!("{}", format_summary_table(&summary));
            Ok(())
        }
        Command::Demo { case, seed, fault, timeout_ms, mode, question } => {
            if !mode.is_team_mode() {
                bail!("demo runs team modes only");
            }
            let defaults = DemoOptions::default();
            let options =
                DemoOptions { seed, fault, timeout_ms: timeout_ms.unwrap_or(defaults.timeout_ms), mode, question };
            let transcript = run_demo(&load_case(&case)?, &options).await?;
            let mut out = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &transcript)?;
            writeln!(out)?;
            Ok(())
        }
    }
}

async fn ingest(file: &Path, store_dir: &Path, doc_id: Option<String>, title: Option<String>) -> anyhow::Result<()> {
    if !store_dir.is_dir() {
        bail!("store directory {} does not exist", store_dir.display());
    }
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("document").to_string();
    let doc_id = doc_id.unwrap_or_else(|| stem.clone());
    let title = title.unwrap_or(stem);
    let store = VectorStore::open(&store_dir.join("reference.vec"), Arc::new(HashEmbedder::default()))?;
    seed_references(&store).await?;
    let chunks = store.ingest(&doc_id, &title, &text, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP).await?;
    println!("ingested {doc_id}: {chunks} chunks");
    Ok(())
}
