use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use leafdx::detect::{ClassList, ImageInput};
use leafdx::eval::{evaluate_dataset, EvalOptions, ImageSizes};
use leafdx::ingest::ChunkSpec;
use leafdx::llmclient::{ChatModel, LlmClient};
use leafdx::pipeline::ingest_into;
use leafdx::ragchat::{RagEngine, Session};
use leafdx::service::{serve, AppConfig};
use leafdx::vectorstore::VectorStore;

type CliResult = Result<(), Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "leafdx", version, about = "Coffee leaf disease diagnosis assistant")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "LEAFDX_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve,
    /// Chunk and embed a knowledge-base directory into a store file.
    Ingest {
        dir: PathBuf,
        #[arg(long)]
        chunk_size: Option<usize>,
        #[arg(long)]
        overlap: Option<usize>,
        /// Output store (defaults to `store_path` from the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add to an existing store instead of replacing it.
        #[arg(long)]
        append: bool,
    },
    /// Print the top-k chunks for a text.
    Query {
        store: PathBuf,
        text: String,
        #[arg(short, default_value_t = 4)]
        k: usize,
    },
    /// Run the configured detector on an image and print JSON detections.
    Detect { image: PathBuf },
    /// Ask a single question against the configured store and model.
    Ask { question: String },
    /// Compute the per-class metric table for YOLO-format predictions.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// One class name per line, in class-id order.
        #[arg(long)]
        classes: PathBuf,
        /// `filename,width,height` CSV; without it every image is treated as the same size.
        #[arg(long)]
        sizes: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        conf: f64,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn load_store(path: &Path, dim: usize) -> Result<VectorStore, Box<dyn Error>> {
    let store = VectorStore::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if store.dim() != dim {
        return Err(format!("store dim {} does not match embedding dim {dim}", store.dim()).into());
    }
    Ok(store)
}

async fn run(cli: Cli) -> CliResult {
    let cfg = AppConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Serve => serve(cfg).await?,

        Command::Ingest { dir, chunk_size, overlap, out, append } => {
            let spec = ChunkSpec {
                chunk_size: chunk_size.unwrap_or(cfg.chunking.chunk_size),
                overlap: overlap.unwrap_or(cfg.chunking.overlap),
                separators: cfg.chunking.separators.clone(),
            };
            spec.validate()?;
            cfg.validate_indexing()?;
            let embedder = cfg.embedding.build()?;
            let out = out.unwrap_or_else(|| cfg.store_path.clone());
            let mut store = if append && out.exists() {
                load_store(&out, embedder.dim())?
            } else {
                VectorStore::new(embedder.dim())
            };
            let summary = ingest_into(&mut store, &dir, &spec, embedder.as_ref()).await?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            store.persist(&out)?;
            println!(
                "{} documents, {} chunks ({} new), store size {} -> {}",
                summary.documents,
                summary.chunks,
                summary.chunks_added,
                store.len(),
                out.display()
            );
        }

        Command::Query { store, text, k } => {
            cfg.validate_indexing()?;
            let embedder = cfg.embedding.build()?;
            let store = load_store(&store, embedder.dim())?;
            let q = embedder
                .embed_texts(&[text])
                .await?
                .pop()
                .ok_or("embedding provider returned nothing")?;
            for hit in store.search(&q, k)? {
                println!("{:.6}\t{}", hit.score, hit.chunk.chunk_id);
            }
        }

        Command::Detect { image } => {
            cfg.detector.validate()?;
            let detector = cfg.detector.build()?;
            let bytes = std::fs::read(&image).map_err(|e| format!("{}: {e}", image.display()))?;
            let name = image.file_name().and_then(|n| n.to_str());
            let output = detector.detect(ImageInput { filename: name, bytes: &bytes }).await?;
            println!("{}", serde_json::to_string_pretty(&output)?);
        }

        Command::Ask { question } => {
            cfg.validate_indexing()?;
            cfg.llm.validate()?;
            let embedder = cfg.embedding.build()?;
            let store = load_store(&cfg.store_path, embedder.dim())?;
            let llm: Arc<dyn ChatModel> = Arc::new(LlmClient::new(cfg.llm.clone())?);
            let engine = RagEngine::new(embedder, llm, cfg.rag.clone());
            let mut session = Session::new("cli", cfg.rag.window_size, Vec::new());
            let answer = engine.answer(&store, &mut session, &question).await?;
            println!("{}", answer.text);
            if !answer.sources.is_empty() {
                println!();
                for s in &answer.sources {
                    println!("source: {}", s.chunk_id);
                }
            }
        }

        Command::Eval { pred, gt, classes, sizes, conf, iou, json } => {
            let classes = ClassList::from_file(&classes)?;
            let sizes = match sizes {
                Some(p) => ImageSizes::from_manifest(&p)?,
                None => ImageSizes::Uniform(1, 1),
            };
            let opts = EvalOptions { conf_threshold: conf, iou_threshold: iou, ..EvalOptions::default() };
            let report = evaluate_dataset(&pred, &gt, &classes, &sizes, &opts)?;
            print!("{}", report.to_table());
            if let Some(path) = json {
                std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
            }
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    match run(Cli::parse()).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
