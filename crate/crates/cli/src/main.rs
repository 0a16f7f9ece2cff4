use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use hybridqa_core::config::EngineConfig;
use hybridqa_core::engine::{self, AnswerOutputs, Engine};
use hybridqa_core::evaluation::render_table;
use hybridqa_core::Error;

/// Hybrid-retrieval question answering over page-structured documents.
#[derive(Parser)]
#[command(name = "hybridqa", version)]
struct Cli {
    /// Engine config (TOML).
    #[arg(short, long, global = true, default_value = "engine.toml")]
    config: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the document index and the per-document chunk stores.
    Index,
    /// Answer a questions file.
    Answer {
        #[arg(long)]
        questions: PathBuf,
        /// Directory for predictions and audit logs.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Score predictions against gold labels.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Retrieval audit log, for page recall@k.
        #[arg(long)]
        retrieval: Option<PathBuf>,
        /// Write the full report here as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Index, answer and evaluate in one run.
    Pipeline {
        #[arg(long)]
        questions: PathBuf,
        /// Gold labels; defaults to the labels inside the questions file.
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate a synthetic multiple-choice dataset from the corpus.
    Synthgen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        domain_desc: Option<String>,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        min_page_chars: Option<usize>,
        #[arg(long)]
        concurrency: Option<usize>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_PROVIDER: u8 = 3;
const EXIT_BUDGET: u8 = 4;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => EXIT_CONFIG,
        Some(Error::BudgetExceeded { .. }) => EXIT_BUDGET,
        Some(e) if e.is_provider_failure() => EXIT_PROVIDER,
        _ => 1,
    }
}

fn load_config(path: &PathBuf) -> anyhow::Result<EngineConfig> {
    Ok(EngineConfig::load(path)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Index => {
            let engine = Engine::new(load_config(&cli.config)?)?;
            let r = engine::cmd_index(&engine)?;
            println!(
                "indexed {} documents, {} chunks ({} embed calls, {:.2}s)",
                r.docs, r.chunks, r.embed_calls, r.timings.wall_secs
            );
            if !r.empty_docs.is_empty() {
                println!("documents without text: {}", r.empty_docs.join(", "));
            }
        }
        Command::Answer { questions, out } => {
            let engine = Engine::new(load_config(&cli.config)?)?;
            let s = engine::cmd_answer(&engine, &questions, &AnswerOutputs::new(&out))?;
            println!(
                "answered {}/{} questions ({} degraded) in {:.2}s; outputs in {}",
                s.answered,
                s.questions,
                s.degraded,
                s.timings.wall_secs,
                out.display()
            );
        }
        Command::Evaluate {
            pred,
            gold,
            corpus,
            retrieval,
            report,
        } => {
            let r = engine::cmd_evaluate(
                &pred,
                &gold,
                &corpus,
                retrieval.as_deref(),
                Default::default(),
            )?;
            print!("{}", render_table(&r));
            if let Some(path) = report {
                engine::write_json(&path, &r)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Pipeline {
            questions,
            gold,
            out,
        } => {
            let engine = Engine::new(load_config(&cli.config)?)?;
            let o = engine::cmd_pipeline(
                &engine,
                &questions,
                gold.as_deref(),
                &AnswerOutputs::new(&out),
            )?;
            print!("{}", render_table(&o.report));
        }
        Command::Synthgen {
            out,
            report,
            domain_desc,
            temperature,
            min_page_chars,
            concurrency,
        } => {
            let mut cfg = load_config(&cli.config)?;
            if let Some(d) = domain_desc {
                cfg.synth.domain_description = d;
            }
            if let Some(t) = temperature {
                cfg.synth.temperature = t;
            }
            if let Some(m) = min_page_chars {
                cfg.synth.min_page_chars = m;
            }
            if let Some(c) = concurrency {
                cfg.synth.concurrency = c;
            }
            let engine = Engine::new(cfg)?;
            let o = engine::cmd_synthgen(&engine, &out, report.as_deref())?;
            println!(
                "wrote {} questions to {} ({} pages attempted, {} skipped, {} failed)",
                o.questions_written,
                o.dataset.display(),
                o.report.pages_attempted,
                o.report.pages_skipped,
                o.report.pages_failed
            );
        }
    }
    Ok(())
}
