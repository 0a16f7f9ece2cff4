//! Sequential vs. data-parallel execution on the hot paths.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use hybridqa_core::chunking::{chunk_document, ChunkingConfig};
use hybridqa_core::config::EngineConfig;
use hybridqa_core::corpus::{write_corpus, Corpus, Document, Page};
use hybridqa_core::engine::{cmd_index, Budget, Engine, Timings};
use hybridqa_core::evaluation::evaluate;
use hybridqa_core::page_retriever::{embed_chunks, WindowConfig};
use hybridqa_core::par::Execution;
use hybridqa_core::providers::HashEmbedder;
use hybridqa_core::question::{Gold, GoldRecord, Letter, Prediction, Question};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 16] = [
    "правила",
    "змагання",
    "спортсмен",
    "доза",
    "таблетка",
    "лікар",
    "суддя",
    "гравець",
    "хвилина",
    "команда",
    "препарат",
    "протипоказання",
    "категорія",
    "поєдинок",
    "тренер",
    "інструкція",
];

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn corpus(docs: usize, pages: u32, rng: &mut ChaCha8Rng) -> Corpus {
    Corpus::from_documents((0..docs).map(|d| {
        let pages = (1..=pages)
            .map(|p| {
                let mut text = format!("doc{d} page{p} ");
                for _ in 0..rng.gen_range(80..200) {
                    text.push_str(WORDS.choose(rng).unwrap());
                    text.push(' ');
                }
                Page::new(p, text).unwrap()
            })
            .collect();
        Document::new(format!("doc{d:02}"), "", pages).unwrap()
    }))
    .unwrap()
}

fn bench_embed_chunks(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let corpus = corpus(1, 120, &mut rng);
    let chunks = chunk_document(
        corpus.documents().next().unwrap(),
        &ChunkingConfig::default(),
    )
    .unwrap();
    let embedder = HashEmbedder::new(256);
    let mut group = c.benchmark_group("embed_chunks");
    group.throughput(Throughput::Elements(chunks.len() as u64));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let mut chunks = chunks.clone();
                embed_chunks(&mut chunks, &embedder, WindowConfig::default(), exec).unwrap();
                black_box(chunks)
            })
        });
    }
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let corpus = corpus(20, 5, &mut rng);
    let ids: Vec<String> = corpus.documents().map(|d| d.doc_id().to_owned()).collect();
    let (mut gold, mut preds) = (Vec::new(), Vec::new());
    for i in 0..20_000 {
        let record = |rng: &mut ChaCha8Rng| {
            (
                *Letter::ALL.choose(rng).unwrap(),
                ids.choose(rng).unwrap().clone(),
                rng.gen_range(1..=5u32),
            )
        };
        let (answer, doc_id, page) = record(&mut rng);
        gold.push(GoldRecord {
            question_id: format!("q{i}"),
            answer,
            doc_id,
            page,
        });
        let (answer, doc_id, page) = record(&mut rng);
        preds.push(Prediction {
            question_id: format!("q{i}"),
            answer,
            doc_id,
            page,
        });
    }
    let mut group = c.benchmark_group("evaluate");
    group.throughput(Throughput::Elements(gold.len() as u64));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(evaluate(&preds, &gold, &corpus, None, &[1, 3], exec).unwrap()))
        });
    }
    group.finish();
}

fn bench_answer(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let corpus = corpus(10, 12, &mut rng);
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&corpus, dir.path().join("corpus.jsonl")).unwrap();
    let engine_for = |execution| {
        Engine::new(EngineConfig {
            base_dir: dir.path().to_path_buf(),
            execution,
            ..Default::default()
        })
        .unwrap()
    };
    cmd_index(&engine_for(Execution::Parallel)).unwrap();

    let questions: Vec<Question> = (0..64)
        .map(|i| {
            let d = i % 10;
            let p = rng.gen_range(1..=12u32);
            let options = Letter::ALL.map(|_| WORDS.choose(&mut rng).unwrap().to_string());
            Question::new(
                format!("q{i}"),
                format!("Що сказано про doc{d} page{p}?"),
                options,
            )
            .with_gold(Gold {
                answer: Letter::A,
                doc_id: format!("doc{d:02}"),
                page: p,
            })
        })
        .collect();

    let mut group = c.benchmark_group("answer");
    group.sample_size(10);
    group.throughput(Throughput::Elements(questions.len() as u64));
    for (name, exec) in MODES {
        let engine = engine_for(exec);
        let index = engine.load_index(&corpus).unwrap();
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let mut timings = Timings::start();
                black_box(
                    engine
                        .answer(
                            &corpus,
                            &index,
                            &questions,
                            &Budget::new(None),
                            &mut timings,
                        )
                        .unwrap(),
                )
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_embed_chunks, bench_evaluate, bench_answer);
criterion_main!(benches);
