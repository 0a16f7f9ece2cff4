use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybridqa"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .env_remove("ENGINE_BUDGET_SECS")
        .output()
        .unwrap()
}

fn topics() -> [(&'static str, &'static str); 3] {
    [("sambo", "самбо"), ("fervex", "фервекс"), ("chess", "шахи")]
}

fn workspace(config_extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let mut corpus = String::new();
    let mut questions = String::new();
    for (i, (id, topic)) in topics().iter().enumerate() {
        let pages: Vec<_> = (1..=4)
            .map(|p| {
                json!({
                    "page_number": p,
                    "markdown": format!(
                        "# {topic}\nСторінка {p} про {topic}. Маркер{i}x{p} описує правило номер {p} для {topic}. \
                         Спортсмени та лікарі читають цей розділ уважно, бо він містить конкретні факти."
                    ),
                })
            })
            .collect();
        corpus.push_str(&json!({"doc_id": id, "title": topic, "pages": pages}).to_string());
        corpus.push('\n');
        let q = json!({
            "question_id": format!("q{i}"),
            "question": format!("Що описує маркер{i}x3?"),
            "options": {"A": "правило", "B": "лікар", "C": "зал", "D": "м'яч", "E": "суддя", "F": "час"},
            "answer": "A", "doc_id": id, "page": 3,
        });
        questions.push_str(&q.to_string());
        questions.push('\n');
    }
    fs::write(dir.path().join("corpus.jsonl"), corpus).unwrap();
    fs::write(dir.path().join("questions.jsonl"), questions).unwrap();
    fs::write(
        dir.path().join("engine.toml"),
        format!("corpus = \"corpus.jsonl\"\nindex_dir = \"index\"\n{config_extra}"),
    )
    .unwrap();
    dir
}

#[test]
fn index_answer_evaluate() {
    let ws = workspace("");
    let d = ws.path();
    let out = run(d, &["index"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("indexed 3 documents"));

    let out = run(
        d,
        &["answer", "--questions", "questions.jsonl", "--out", "out"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let preds = fs::read_to_string(d.join("out/predictions.jsonl")).unwrap();
    assert_eq!(preds.lines().count(), 3);
    let csv = fs::read_to_string(d.join("out/predictions.csv")).unwrap();
    assert!(csv.starts_with("question_id,answer,doc_id,page\n"));

    let out = run(
        d,
        &[
            "evaluate",
            "--pred",
            "out/predictions.jsonl",
            "--gold",
            "questions.jsonl",
            "--corpus",
            "corpus.jsonl",
            "--retrieval",
            "out/retrieval_audit.jsonl",
            "--report",
            "report.json",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("document accuracy"));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["n"], 3);
    assert_eq!(report["mean_d"], 1.0);
}

#[test]
fn pipeline_is_deterministic() {
    let ws = workspace("");
    let d = ws.path();
    for out in ["a", "b"] {
        let o = run(
            d,
            &["pipeline", "--questions", "questions.jsonl", "--out", out],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "predictions.jsonl",
        "eval_report.json",
        "routing_audit.jsonl",
    ] {
        assert_eq!(
            fs::read(d.join("a").join(f)).unwrap(),
            fs::read(d.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn zero_budget_exits_4() {
    let ws = workspace("budget_secs = 0.0\n");
    let d = ws.path();
    let out = run(
        d,
        &["answer", "--questions", "questions.jsonl", "--out", "out"],
    );
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(
        fs::read_to_string(d.join("out/predictions.jsonl")).unwrap(),
        ""
    );
}

#[test]
fn bad_config_exits_2() {
    let ws = workspace("[chunking]\nmax_chunk_chars = 3\n");
    assert_eq!(run(ws.path(), &["index"]).status.code(), Some(2));
    let ws = workspace("no_such_key = 1\n");
    assert_eq!(run(ws.path(), &["index"]).status.code(), Some(2));
}

#[test]
fn unreachable_provider_exits_3() {
    let ws = workspace(
        "[providers]\nkind = \"http\"\nembed_url = \"http://127.0.0.1:9\"\nrerank_url = \"http://127.0.0.1:9\"\n\
         generate_url = \"http://127.0.0.1:9\"\nmax_retries = 0\ntimeout_secs = 2.0\n",
    );
    let out = run(ws.path(), &["index"]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn synthgen_writes_dataset_and_report() {
    let ws = workspace("");
    let d = ws.path();
    let out = run(
        d,
        &[
            "synthgen",
            "--out",
            "synth.jsonl",
            "--report",
            "synth_report.json",
            "--min-page-chars",
            "50",
            "--domain-desc",
            "спорт",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("synth_report.json")).unwrap()).unwrap();
    assert_eq!(report["pages_attempted"], 12);
    let first = fs::read_to_string(d.join("synth.jsonl")).unwrap();
    let line: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert!(line["source_page"].as_u64().unwrap() >= 1);
}
