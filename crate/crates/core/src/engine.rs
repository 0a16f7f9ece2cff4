//! End-to-end orchestration: indexing, answering, evaluation and synthetic
//! data generation over one [`EngineConfig`].
//!
//! Each command runs as a sequence of stages (load, route, retrieve,
//! generate, write, ...). Work inside a stage is spread over questions or
//! documents; the stages themselves run one after another so that their
//! wall-clock durations add up to the run's total.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::chunking::chunk_document;
use crate::config::{EngineConfig, ProviderKind};
use crate::corpus::{load_corpus, Corpus};
use crate::doc_router::{route, DocIndex, RoutePath, RoutingAudit, RoutingDecision};
use crate::error::Error;
use crate::evaluation::{evaluate, EvalReport, RetrievalAudit};
use crate::generation::{
    answer_question, AnswerFailure, ContextPage, ExtractiveGenerator, GroundedAnswer,
};
use crate::page_retriever::{
    embed_chunks, load_chunk_store, pages_in_order, retrieve_pages, save_chunk_store, DocChunks,
    PageRetrieval,
};
use crate::par;
use crate::providers::{
    CachedEmbedder, CallCounter, CountingEmbedder, Embedder, EmbeddingCache, Generator,
    HashEmbedder, HttpEmbedder, HttpGenerator, HttpReranker, LexicalReranker, Reranker,
};
use crate::question::{
    load_gold, load_questions, write_jsonl, write_predictions, write_predictions_csv, Letter,
    Prediction, Question,
};
use crate::synth_qa::{generate_dataset, write_dataset, ClozeSynthGenerator, SynthReport};
use crate::text_prep::TextPrep;

pub const RECALL_KS: [usize; 2] = [1, 3];

const MANIFEST: &str = "manifest.json";
const CACHE_FILE: &str = "embed_cache.jsonl";

/// The three model services plus bookkeeping around the embedder.
pub struct Providers {
    pub embedder: Arc<dyn Embedder>,
    pub reranker: Arc<dyn Reranker>,
    pub generator: Arc<dyn Generator>,
    pub synth_generator: Arc<dyn Generator>,
    pub cache: Option<Arc<EmbeddingCache>>,
    embed_calls: CallCounter,
}

impl Providers {
    /// Wraps `embedder` so that calls reaching it are counted and, with a
    /// cache, so that fully cached batches never reach it.
    pub fn new(
        embedder: Arc<dyn Embedder>,
        reranker: Arc<dyn Reranker>,
        generator: Arc<dyn Generator>,
        synth_generator: Arc<dyn Generator>,
        cache: Option<Arc<EmbeddingCache>>,
    ) -> Self {
        let counting = CountingEmbedder::new(embedder);
        let embed_calls = counting.counter();
        let embedder: Arc<dyn Embedder> = match &cache {
            Some(c) => Arc::new(CachedEmbedder::new(counting, Arc::clone(c))),
            None => Arc::new(counting),
        };
        Self {
            embedder,
            reranker,
            generator,
            synth_generator,
            cache,
            embed_calls,
        }
    }

    pub fn from_config(config: &EngineConfig, prep: &TextPrep) -> Result<Self, Error> {
        let p = &config.providers;
        let cache = if p.cache {
            Some(Arc::new(EmbeddingCache::load(
                config.index_path().join(CACHE_FILE),
            )?))
        } else {
            None
        };
        Ok(match p.kind {
            ProviderKind::Builtin => Self::new(
                Arc::new(HashEmbedder::new(p.builtin_dim).with_prep(prep.clone())),
                Arc::new(LexicalReranker::new(prep.clone())),
                Arc::new(ExtractiveGenerator::new(prep.clone())),
                Arc::new(ClozeSynthGenerator::new(prep.clone())),
                cache,
            ),
            ProviderKind::Http => {
                let settings = p.http_settings();
                let url = |u: &Option<String>| u.clone().unwrap_or_default();
                let generator: Arc<dyn Generator> =
                    Arc::new(HttpGenerator::new(&url(&p.generate_url), &settings));
                Self::new(
                    Arc::new(HttpEmbedder::connect(&url(&p.embed_url), &settings)?),
                    Arc::new(HttpReranker::new(&url(&p.rerank_url), &settings)),
                    Arc::clone(&generator),
                    generator,
                    cache,
                )
            }
        })
    }

    /// Embedding calls that reached the underlying provider so far.
    pub fn embed_calls(&self) -> usize {
        self.embed_calls.get()
    }
}

/// Wall-clock budget shared by the stages of a command.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    start: Instant,
    limit: Option<Duration>,
}

impl Budget {
    pub fn new(limit_secs: Option<f64>) -> Self {
        Self {
            start: Instant::now(),
            limit: limit_secs.map(Duration::from_secs_f64),
        }
    }

    pub fn exceeded(&self) -> bool {
        self.limit.is_some_and(|l| self.start.elapsed() >= l)
    }

    pub fn limit_secs(&self) -> f64 {
        self.limit.map_or(f64::INFINITY, |l| l.as_secs_f64())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub secs: f64,
}

/// Per-stage wall-clock durations of one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<StageTime>,
    pub wall_secs: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl Timings {
    pub fn start() -> Self {
        Self {
            stages: Vec::new(),
            wall_secs: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.stages.push(StageTime {
            stage: name.to_owned(),
            secs: t.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn finish(&mut self) {
        if let Some(s) = self.started {
            self.wall_secs = s.elapsed().as_secs_f64();
        }
    }

    pub fn stage_total(&self) -> f64 {
        self.stages.iter().map(|s| s.secs).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestEntry {
    doc_id: String,
    store: String,
    chunks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    dim: usize,
    docs: Vec<ManifestEntry>,
    /// Documents without any text; they can be routed to but have no pages.
    empty_docs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub docs: usize,
    pub chunks: usize,
    pub empty_docs: Vec<String>,
    pub embed_calls: usize,
    pub cache_entries: usize,
    pub timings: Timings,
}

/// Document index plus per-document chunk stores, ready for querying.
pub struct LoadedIndex {
    pub docs: DocIndex,
    pub chunks: HashMap<String, DocChunks>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSummary {
    pub questions: usize,
    pub answered: usize,
    pub degraded: usize,
    pub out_of_context: usize,
    pub routed_by_agreement: usize,
    pub routed_by_rerank: usize,
    pub routed_degenerate: usize,
    pub aborted: bool,
    pub embed_calls: usize,
    pub timings: Timings,
}

/// Everything one answering run produced, in question order. When the
/// budget ran out, only questions that finished every stage are present.
pub struct AnswerRun {
    pub answers: Vec<GroundedAnswer>,
    pub routing: Vec<RoutingDecision>,
    pub retrieval: Vec<RetrievalAudit>,
    pub aborted: bool,
}

impl AnswerRun {
    pub fn predictions(&self) -> Vec<Prediction> {
        self.answers.iter().map(|a| a.prediction.clone()).collect()
    }
}

pub struct Engine {
    pub config: EngineConfig,
    pub prep: TextPrep,
    pub providers: Providers,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self, Error> {
        config.validate()?;
        let prep = config.text_prep()?;
        let providers = Providers::from_config(&config, &prep)?;
        Ok(Self {
            config,
            prep,
            providers,
        })
    }

    pub fn with_providers(config: EngineConfig, providers: Providers) -> Result<Self, Error> {
        config.validate()?;
        let prep = config.text_prep()?;
        Ok(Self {
            config,
            prep,
            providers,
        })
    }

    pub fn load_corpus(&self) -> Result<Corpus, Error> {
        Ok(load_corpus(self.config.corpus_path())?)
    }

    /// Builds and persists the document index and the chunk stores.
    pub fn index(&self, corpus: &Corpus, timings: &mut Timings) -> Result<IndexReport, Error> {
        let dir = self.config.index_path();
        let calls_before = self.providers.embed_calls();
        let exec = self.config.execution;
        let embedder = self.providers.embedder.as_ref();

        let docs = timings.stage("doc_index", || {
            DocIndex::build(
                corpus,
                embedder,
                &self.prep,
                self.config.bm25,
                &self.config.router,
            )
        })?;

        let all: Vec<_> = corpus.documents().collect();
        let chunked = timings.stage("chunk_embed", || {
            par::try_map(exec, &all, |doc| {
                let mut chunks = chunk_document(doc, &self.config.chunking)?;
                embed_chunks(&mut chunks, embedder, self.config.window, exec)
                    .map_err(|e| Error::in_document(doc.doc_id(), e))?;
                Ok::<_, Error>((doc.doc_id().to_owned(), chunks))
            })
        })?;

        timings.stage("write", || -> Result<(), Error> {
            let chunk_dir = dir.join("chunks");
            std::fs::create_dir_all(&chunk_dir).map_err(|e| Error::io(&chunk_dir, e))?;
            docs.save(&dir)?;
            let mut manifest = Manifest {
                version: 1,
                dim: embedder.dim(),
                docs: Vec::new(),
                empty_docs: Vec::new(),
            };
            for (i, (doc_id, chunks)) in chunked.iter().enumerate() {
                if chunks.is_empty() {
                    log::warn!("document {doc_id:?} has no text; it will have no pages to cite");
                    manifest.empty_docs.push(doc_id.clone());
                    continue;
                }
                let store = format!("chunks/{i:05}");
                save_chunk_store(
                    chunks,
                    &dir.join(format!("{store}.jsonl")),
                    &dir.join(format!("{store}.vec")),
                )
                .map_err(|e| Error::in_document(doc_id, e))?;
                manifest.docs.push(ManifestEntry {
                    doc_id: doc_id.clone(),
                    store,
                    chunks: chunks.len(),
                });
            }
            write_json(&dir.join(MANIFEST), &manifest)?;
            if let Some(cache) = &self.providers.cache {
                cache.save(dir.join(CACHE_FILE))?;
            }
            Ok(())
        })?;

        Ok(IndexReport {
            docs: docs.len(),
            chunks: chunked.iter().map(|(_, c)| c.len()).sum(),
            empty_docs: chunked
                .iter()
                .filter(|(_, c)| c.is_empty())
                .map(|(d, _)| d.clone())
                .collect(),
            embed_calls: self.providers.embed_calls() - calls_before,
            cache_entries: self.providers.cache.as_ref().map_or(0, |c| c.len()),
            timings: timings.clone(),
        })
    }

    pub fn load_index(&self, corpus: &Corpus) -> Result<LoadedIndex, Error> {
        let dir = self.config.index_path();
        let manifest_path = dir.join(MANIFEST);
        if !manifest_path.exists() {
            return Err(Error::Invalid(format!(
                "no index at {}; run `index` first",
                dir.display()
            )));
        }
        let raw = std::fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_slice(&raw)
            .map_err(|e| Error::json(manifest_path.display().to_string(), e))?;
        if manifest.dim != self.providers.embedder.dim() {
            return Err(Error::Invalid(format!(
                "index was built with dim {} but the embedder has dim {}; rerun index",
                manifest.dim,
                self.providers.embedder.dim()
            )));
        }
        let docs = DocIndex::load(&dir, corpus, self.config.bm25)?;
        let loaded = par::try_map(self.config.execution, &manifest.docs, |entry| {
            let chunks = load_chunk_store(
                &dir.join(format!("{}.jsonl", entry.store)),
                &dir.join(format!("{}.vec", entry.store)),
            )?;
            let dc = DocChunks::from_chunks(&entry.doc_id, chunks, &self.prep, self.config.bm25)?;
            if !dc.is_embedded() {
                return Err(Error::in_document(
                    &entry.doc_id,
                    Error::Invalid("chunk vectors missing; rerun index".into()),
                ));
            }
            Ok((entry.doc_id.clone(), dc))
        })?;
        Ok(LoadedIndex {
            docs,
            chunks: loaded.into_iter().collect(),
        })
    }

    /// Routes, retrieves and answers every question, stage by stage.
    pub fn answer(
        &self,
        corpus: &Corpus,
        index: &LoadedIndex,
        questions: &[Question],
        budget: &Budget,
        timings: &mut Timings,
    ) -> Result<AnswerRun, Error> {
        let exec = self.config.execution;
        let p = &self.providers;

        let routed: Vec<Option<RoutingDecision>> = timings.stage("route", || {
            par::try_map(exec, questions, |q| {
                if budget.exceeded() {
                    return Ok(None);
                }
                route(
                    q,
                    &index.docs,
                    &self.prep,
                    p.embedder.as_ref(),
                    p.reranker.as_ref(),
                    &self.config.router,
                )
                .map(Some)
            })
        })?;

        let pairs: Vec<(&Question, Option<&RoutingDecision>)> = questions
            .iter()
            .zip(routed.iter().map(Option::as_ref))
            .collect();
        let retrieved: Vec<Option<Option<PageRetrieval>>> = timings.stage("retrieve", || {
            par::try_map(exec, &pairs, |(q, decision)| {
                let Some(d) = decision else { return Ok(None) };
                if budget.exceeded() {
                    return Ok(None);
                }
                match index.chunks.get(&d.chosen_doc) {
                    Some(dc) => retrieve_pages(
                        q,
                        dc,
                        &self.prep,
                        p.embedder.as_ref(),
                        p.reranker.as_ref(),
                        &self.config.fusion,
                    )
                    .map(|r| Some(Some(r))),
                    None => Ok(Some(None)),
                }
            })
        })?;

        let jobs: Vec<(&Question, &RoutingDecision, Option<&PageRetrieval>)> = questions
            .iter()
            .zip(&routed)
            .zip(&retrieved)
            .filter_map(|((q, d), r)| Some((q, d.as_ref()?, r.as_ref()?.as_ref())))
            .collect();
        let generated: Vec<Option<GroundedAnswer>> = timings.stage("generate", || {
            par::try_map(exec, &jobs, |(q, d, r)| {
                if budget.exceeded() {
                    return Ok(None);
                }
                let Some(r) = r else {
                    return Ok(Some(no_context_answer(q, &d.chosen_doc)));
                };
                let doc = corpus
                    .get(&d.chosen_doc)
                    .expect("routed documents come from the corpus");
                let pages: Vec<ContextPage> = r
                    .pages
                    .iter()
                    .filter_map(|rp| doc.page(rp.page_number))
                    .filter(|pg| !pg.markdown().is_empty())
                    .map(|pg| ContextPage::new(pg.page_number(), pg.markdown()))
                    .collect();
                if pages.is_empty() {
                    return Ok(Some(no_context_answer(q, &d.chosen_doc)));
                }
                answer_question(
                    q,
                    &d.chosen_doc,
                    &pages,
                    p.generator.as_ref(),
                    &self.config.generation,
                )
                .map(Some)
            })
        })?;

        let mut run = AnswerRun {
            answers: Vec::new(),
            routing: Vec::new(),
            retrieval: Vec::new(),
            aborted: generated.len() < questions.len() || generated.iter().any(Option::is_none),
        };
        for ((_, d, r), a) in jobs.iter().zip(generated) {
            let Some(a) = a else { continue };
            run.routing.push((*d).clone());
            run.retrieval.push(RetrievalAudit {
                question_id: a.prediction.question_id.clone(),
                doc_id: d.chosen_doc.clone(),
                pages: r.map_or_else(Vec::new, |r| all_pages(r, index)),
            });
            run.answers.push(a);
        }
        Ok(run)
    }
}

fn all_pages(r: &PageRetrieval, index: &LoadedIndex) -> Vec<u32> {
    let dc = &index.chunks[&r.doc_id];
    pages_in_order(
        r.reranked
            .ids()
            .filter_map(|id| Some((dc.chunk(id)?.page_number, id))),
        usize::MAX,
    )
    .into_iter()
    .map(|p| p.page_number)
    .collect()
}

fn no_context_answer(q: &Question, doc_id: &str) -> GroundedAnswer {
    GroundedAnswer {
        prediction: Prediction {
            question_id: q.question_id.clone(),
            answer: Letter::A,
            doc_id: doc_id.to_owned(),
            page: 1,
        },
        raw_output: String::new(),
        out_of_context: false,
        degraded: true,
        failure: Some(AnswerFailure::NoContext),
        context_pages: Vec::new(),
        context_truncated: false,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    bytes.push(b'\n');
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Output locations of an answering run.
#[derive(Debug, Clone)]
pub struct AnswerOutputs {
    pub dir: PathBuf,
}

impl AnswerOutputs {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn predictions(&self) -> PathBuf {
        self.dir.join("predictions.jsonl")
    }

    pub fn predictions_csv(&self) -> PathBuf {
        self.dir.join("predictions.csv")
    }

    pub fn routing_audit(&self) -> PathBuf {
        self.dir.join("routing_audit.jsonl")
    }

    pub fn retrieval_audit(&self) -> PathBuf {
        self.dir.join("retrieval_audit.jsonl")
    }

    pub fn generation_audit(&self) -> PathBuf {
        self.dir.join("generation_audit.jsonl")
    }

    pub fn summary(&self) -> PathBuf {
        self.dir.join("answer_summary.json")
    }

    pub fn eval_report(&self) -> PathBuf {
        self.dir.join("eval_report.json")
    }

    fn write(&self, run: &AnswerRun) -> Result<(), Error> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let preds = run.predictions();
        write_predictions(self.predictions(), &preds)?;
        write_predictions_csv(self.predictions_csv(), &preds)?;
        write_jsonl(
            &self.routing_audit(),
            run.routing.iter().map(RoutingAudit::from),
        )?;
        write_jsonl(&self.retrieval_audit(), &run.retrieval)?;
        write_jsonl(&self.generation_audit(), &run.answers)
    }
}

pub fn cmd_index(engine: &Engine) -> Result<IndexReport, Error> {
    let mut timings = Timings::start();
    let corpus = timings.stage("load", || engine.load_corpus())?;
    let mut report = engine.index(&corpus, &mut timings)?;
    timings.finish();
    report.timings = timings;
    write_json(
        &engine.config.index_path().join("index_report.json"),
        &report,
    )?;
    Ok(report)
}

/// Answers a questions file into `out`. On budget exhaustion the finished
/// prefix of work is still written and [`Error::BudgetExceeded`] returned.
pub fn cmd_answer(
    engine: &Engine,
    questions_path: &Path,
    out: &AnswerOutputs,
) -> Result<AnswerSummary, Error> {
    let budget = Budget::new(engine.config.budget_secs);
    let mut timings = Timings::start();
    let questions = timings.stage("load_questions", || load_questions(questions_path))?;
    let (run, summary) = answer_stage(engine, &questions, &budget, &mut timings, out)?;
    finish_answer(&budget, &run, summary)
}

fn answer_stage(
    engine: &Engine,
    questions: &[Question],
    budget: &Budget,
    timings: &mut Timings,
    out: &AnswerOutputs,
) -> Result<(AnswerRun, AnswerSummary), Error> {
    let calls_before = engine.providers.embed_calls();
    let run = if budget.exceeded() {
        AnswerRun {
            answers: Vec::new(),
            routing: Vec::new(),
            retrieval: Vec::new(),
            aborted: true,
        }
    } else {
        let corpus = timings.stage("load_corpus", || engine.load_corpus())?;
        let index = timings.stage("load_index", || engine.load_index(&corpus))?;
        engine.answer(&corpus, &index, questions, budget, timings)?
    };
    timings.stage("write", || out.write(&run))?;
    timings.finish();
    let count = |path: RoutePath, degenerate: bool| {
        run.routing
            .iter()
            .filter(|d| d.path == path && d.degenerate == degenerate)
            .count()
    };
    let summary = AnswerSummary {
        questions: questions.len(),
        answered: run.answers.len(),
        degraded: run.answers.iter().filter(|a| a.degraded).count(),
        out_of_context: run.answers.iter().filter(|a| a.out_of_context).count(),
        routed_by_agreement: count(RoutePath::Agreement, false),
        routed_by_rerank: count(RoutePath::Rerank, false),
        routed_degenerate: count(RoutePath::Rerank, true),
        aborted: run.aborted,
        embed_calls: engine.providers.embed_calls() - calls_before,
        timings: timings.clone(),
    };
    write_json(&out.summary(), &summary)?;
    Ok((run, summary))
}

fn finish_answer(
    budget: &Budget,
    run: &AnswerRun,
    summary: AnswerSummary,
) -> Result<AnswerSummary, Error> {
    if run.aborted {
        return Err(Error::BudgetExceeded {
            budget_secs: budget.limit_secs(),
            completed: run.answers.len(),
        });
    }
    Ok(summary)
}

pub fn cmd_evaluate(
    predictions: &Path,
    gold: &Path,
    corpus: &Path,
    retrieval_audit: Option<&Path>,
    exec: par::Execution,
) -> Result<EvalReport, Error> {
    let preds = crate::question::load_predictions(predictions)?;
    let gold = load_gold(gold)?;
    let corpus = load_corpus(corpus)?;
    let audit = retrieval_audit
        .map(crate::evaluation::load_retrieval_audit)
        .transpose()?;
    evaluate(&preds, &gold, &corpus, audit.as_deref(), &RECALL_KS, exec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub index: IndexReport,
    pub answer: AnswerSummary,
    pub report: EvalReport,
}

/// Index, answer and evaluate in one go. Gold labels come from a separate
/// file or, when absent, from the questions file itself.
pub fn cmd_pipeline(
    engine: &Engine,
    questions_path: &Path,
    gold_path: Option<&Path>,
    out: &AnswerOutputs,
) -> Result<PipelineOutcome, Error> {
    let budget = Budget::new(engine.config.budget_secs);
    let mut index_timings = Timings::start();
    let corpus = index_timings.stage("load", || engine.load_corpus())?;
    let mut index = engine.index(&corpus, &mut index_timings)?;
    index_timings.finish();
    index.timings = index_timings;

    let mut timings = Timings::start();
    let questions = timings.stage("load_questions", || load_questions(questions_path))?;
    let (run, summary) = answer_stage(engine, &questions, &budget, &mut timings, out)?;
    let summary = finish_answer(&budget, &run, summary)?;

    let gold = match gold_path {
        Some(p) => load_gold(p)?,
        None => questions
            .iter()
            .map(|q| {
                let g = q.gold.as_ref().ok_or_else(|| {
                    Error::Invalid(format!("question {} has no gold label", q.question_id))
                })?;
                Ok(crate::question::GoldRecord {
                    question_id: q.question_id.clone(),
                    answer: g.answer,
                    doc_id: g.doc_id.clone(),
                    page: g.page,
                })
            })
            .collect::<Result<_, Error>>()?,
    };
    let report = evaluate(
        &run.predictions(),
        &gold,
        &corpus,
        Some(&run.retrieval),
        &RECALL_KS,
        engine.config.execution,
    )?;
    write_json(&out.eval_report(), &report)?;
    Ok(PipelineOutcome {
        index,
        answer: summary,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOutcome {
    pub dataset: PathBuf,
    pub questions_written: usize,
    pub report: SynthReport,
}

pub fn cmd_synthgen(
    engine: &Engine,
    dataset: &Path,
    report_path: Option<&Path>,
) -> Result<SynthOutcome, Error> {
    let corpus = engine.load_corpus()?;
    let results = generate_dataset(
        &corpus,
        engine.providers.synth_generator.as_ref(),
        &engine.config.synth,
        engine.config.execution,
    )?;
    let report = SynthReport::from_results(&results);
    let questions_written = write_dataset(dataset, &results)?;
    if let Some(p) = report_path {
        write_json(p, &report)?;
    }
    Ok(SynthOutcome {
        dataset: dataset.to_path_buf(),
        questions_written,
        report,
    })
}
