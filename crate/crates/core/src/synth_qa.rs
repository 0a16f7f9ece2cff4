//! Synthetic multiple-choice question generation, one page at a time.
//!
//! Each sufficiently long page is sent once to the generator with the
//! question-writer prompt. The JSON reply is validated item by item; valid
//! questions (at most ten per page) are emitted with their source page.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::Corpus;
use crate::error::Error;
use crate::par::{self, Execution};
use crate::providers::{ConcurrencyLimit, GenRequest, Generator, ProviderError};
use crate::question::{write_jsonl, Gold, Letter, Question, QuestionRecord};
use crate::text_prep::TextPrep;

pub const MAX_QUESTIONS_PER_PAGE: usize = 10;

pub const REASON_INVALID_JSON: &str = "invalid json";
pub const REASON_MISSING_ENTITY: &str = "missing entity_name";
pub const REASON_MISSING_QUESTIONS: &str = "missing questions list";
pub const REASON_NOT_OBJECT: &str = "item is not an object";
pub const REASON_EMPTY_QUESTION: &str = "empty question text";
pub const REASON_BAD_ANSWER: &str = "correct_answer not in A-F";
pub const REASON_NO_ENTITY: &str = "questions without entity_name";
pub const REASON_OVER_LIMIT: &str = "over limit";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub domain_description: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Pages shorter than this are skipped without a provider call.
    pub min_page_chars: usize,
    pub concurrency: usize,
    pub few_shot: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            domain_description: String::new(),
            temperature: 0.7,
            max_tokens: 4096,
            min_page_chars: 200,
            concurrency: 4,
            few_shot: Vec::new(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::Config(format!(
                "synth temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 || self.concurrency == 0 {
            return Err(Error::Config(
                "synth max_tokens and concurrency must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Renders the question-writer prompt. The domain description fills both
/// the system-side context and the user-side domain line.
pub fn synth_prompt(
    domain_description: &str,
    page_text: &str,
    few_shot: &[String],
) -> Result<String, Error> {
    if page_text.is_empty() {
        return Err(Error::Invalid("synthesis page text is empty".into()));
    }
    let examples = few_shot.join("\n");
    let mut out = String::new();
    let _ = write!(
        out,
        r#"SYSTEM:
You are an expert Ukrainian-language exam question writer.

DOMAIN CONTEXT:
{domain_description}

YOUR TASK:
You will receive the text of a single page from a Ukrainian PDF document. You must:

1. IDENTIFY the specific subject: the exact sport name
   (e.g. "strongman", "sambo") or drug name
   (e.g. "retabolil", "fervex"). This is the ENTITY NAME.
2. DECIDE whether this page contains specific factual
   content suitable for question generation (specific
   rules, dosages, penalties, contraindications, etc.).
   SKIP pages that are tables of contents, title pages,
   abbreviation lists, or general introductions.
3. If suitable, generate up to 10 MCQs that:
   - Are written entirely in Ukrainian.
   - CRITICAL: Every question MUST explicitly name the
     ENTITY NAME. Generic questions are FORBIDDEN.
   - Are answerable ONLY from the provided page text.
   - Have exactly 6 options (A-F), one correct answer,
     and 5 plausible distractors.
   - NEVER use quotation marks or braces.
   - Match the style of: {examples}
4. If NOT suitable, return an empty questions list.

RESPONSE FORMAT (strict JSON):
{{
  "entity_name": "<sport or drug name>",
  "questions": [
    {{
      "question": "...",
      "A": "...", "B": "...", "C": "...",
      "D": "...", "E": "...", "F": "...",
      "correct_answer": "A"
    }}
  ]
}}

Return ONLY valid JSON. "correct_answer" must be one of: A, B, C, D, E, F.
If not suitable: {{"entity_name": "", "questions": []}}

USER:
Domain: {domain_description}
Document page text: {page_text}"#
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthQuestion {
    pub question: String,
    pub options: [String; 6],
    pub correct_answer: Letter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub item: Value,
    pub reason: String,
}

/// A reply that passed the top-level checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedResponse {
    pub entity_name: String,
    pub questions: Vec<SynthQuestion>,
    pub rejected: Vec<Rejection>,
    /// Accepted questions whose text does not contain the entity name.
    pub entity_not_named: usize,
}

static FENCE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)^```[A-Za-z]*\s*\n(.*?)\n?```$").unwrap());

/// Validates a generator reply. A reply that is not a JSON object with an
/// `entity_name` string and a `questions` list is rejected whole.
pub fn validate_synth_response(raw: &str) -> Result<ValidatedResponse, Rejection> {
    let trimmed = raw.trim();
    let body = FENCE
        .captures(trimmed)
        .map_or(trimmed, |c| c.get(1).unwrap().as_str());
    let whole = |reason: &str| Rejection {
        item: Value::String(raw.to_owned()),
        reason: reason.to_owned(),
    };
    let value: Value = serde_json::from_str(body).map_err(|_| whole(REASON_INVALID_JSON))?;
    let entity_name = value
        .get("entity_name")
        .and_then(Value::as_str)
        .ok_or_else(|| whole(REASON_MISSING_ENTITY))?
        .trim()
        .to_owned();
    let items = value
        .get("questions")
        .and_then(Value::as_array)
        .ok_or_else(|| whole(REASON_MISSING_QUESTIONS))?;

    let mut out = ValidatedResponse {
        entity_name,
        questions: Vec::new(),
        rejected: Vec::new(),
        entity_not_named: 0,
    };
    for item in items {
        let verdict = if out.entity_name.is_empty() {
            Err(REASON_NO_ENTITY.to_owned())
        } else {
            validate_item(item)
        };
        match verdict {
            Ok(_) if out.questions.len() >= MAX_QUESTIONS_PER_PAGE => {
                out.rejected.push(Rejection {
                    item: item.clone(),
                    reason: REASON_OVER_LIMIT.into(),
                })
            }
            Ok(q) => {
                if !q
                    .question
                    .to_lowercase()
                    .contains(&out.entity_name.to_lowercase())
                {
                    out.entity_not_named += 1;
                }
                out.questions.push(q);
            }
            Err(reason) => out.rejected.push(Rejection {
                item: item.clone(),
                reason,
            }),
        }
    }
    Ok(out)
}

fn validate_item(item: &Value) -> Result<SynthQuestion, String> {
    let obj = item.as_object().ok_or(REASON_NOT_OBJECT)?;
    let question = obj
        .get("question")
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or(REASON_EMPTY_QUESTION)?;
    let mut options: [String; 6] = Default::default();
    for l in Letter::ALL {
        options[l.index()] = obj
            .get(&l.to_string())
            .and_then(Value::as_str)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| format!("missing option {l}"))?
            .to_owned();
    }
    let correct_answer = obj
        .get("correct_answer")
        .and_then(Value::as_str)
        .and_then(|s| {
            let s = s.trim();
            (s.len() == 1).then(|| {
                s.chars()
                    .next()
                    .filter(char::is_ascii_uppercase)
                    .and_then(Letter::from_char)
            })?
        })
        .ok_or(REASON_BAD_ANSWER)?;
    Ok(SynthQuestion {
        question: question.to_owned(),
        options,
        correct_answer,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum PageOutcome {
    /// Shorter than the length gate; no provider call.
    Skipped,
    /// The generator judged the page unsuitable (empty entity name).
    Unsuitable,
    Generated,
    /// The whole reply failed validation.
    Invalid(String),
    /// The provider failed after retries.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPageResult {
    pub doc_id: String,
    pub page_number: u32,
    pub outcome: PageOutcome,
    pub entity_name: String,
    pub questions: Vec<Question>,
    pub rejected: Vec<Rejection>,
    pub entity_not_named: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub pages_total: usize,
    pub pages_attempted: usize,
    pub pages_skipped: usize,
    pub pages_unsuitable: usize,
    pub pages_invalid: usize,
    pub pages_failed: usize,
    pub questions_accepted: usize,
    pub questions_rejected: usize,
    pub rejected_by_reason: BTreeMap<String, usize>,
    /// Accepted questions that do not mention their entity name.
    pub entity_name_flags: usize,
}

impl SynthReport {
    pub fn from_results(results: &[SynthPageResult]) -> Self {
        let mut r = SynthReport {
            pages_total: results.len(),
            ..Default::default()
        };
        for p in results {
            match &p.outcome {
                PageOutcome::Skipped => r.pages_skipped += 1,
                PageOutcome::Unsuitable => r.pages_unsuitable += 1,
                PageOutcome::Invalid(reason) => {
                    r.pages_invalid += 1;
                    *r.rejected_by_reason.entry(reason.clone()).or_default() += 1;
                }
                PageOutcome::Failed(_) => r.pages_failed += 1,
                PageOutcome::Generated => {}
            }
            if p.outcome != PageOutcome::Skipped {
                r.pages_attempted += 1;
            }
            r.questions_accepted += p.questions.len();
            r.questions_rejected += p.rejected.len();
            r.entity_name_flags += p.entity_not_named;
            for rej in &p.rejected {
                *r.rejected_by_reason.entry(rej.reason.clone()).or_default() += 1;
            }
        }
        r
    }
}

pub fn synth_question_id(doc_id: &str, page: u32, index: usize) -> String {
    format!("{doc_id}-p{page}-q{index}")
}

/// Runs the generator over every page of the corpus. Results are in
/// `(doc_id, page_number)` order regardless of scheduling.
pub fn generate_dataset(
    corpus: &Corpus,
    generator: &dyn Generator,
    config: &SynthConfig,
    exec: Execution,
) -> Result<Vec<SynthPageResult>, Error> {
    config.validate()?;
    let pages: Vec<(&str, &crate::corpus::Page)> = corpus
        .documents()
        .flat_map(|d| d.pages().iter().map(move |p| (d.doc_id(), p)))
        .collect();
    let limit = ConcurrencyLimit::new(config.concurrency);
    let results = par::try_map(exec, &pages, |(doc_id, page)| {
        let base = SynthPageResult {
            doc_id: doc_id.to_string(),
            page_number: page.page_number(),
            outcome: PageOutcome::Skipped,
            entity_name: String::new(),
            questions: Vec::new(),
            rejected: Vec::new(),
            entity_not_named: 0,
        };
        if page.markdown().trim().is_empty() || page.char_count() < config.min_page_chars {
            return Ok(base);
        }
        let request = GenRequest {
            prompt: synth_prompt(
                &config.domain_description,
                page.markdown(),
                &config.few_shot,
            )?,
            max_tokens: config.max_tokens,
            temperature: config.temperature,
        };
        let reply = {
            let _permit = limit.acquire();
            generator.generate(&request)
        };
        let raw = match reply {
            Ok(raw) => raw,
            Err(e) => {
                log::warn!(
                    "{doc_id} page {}: generation failed: {e}",
                    page.page_number()
                );
                return Ok(SynthPageResult {
                    outcome: PageOutcome::Failed(e.to_string()),
                    ..base
                });
            }
        };
        Ok::<_, Error>(match validate_synth_response(&raw) {
            Err(rej) => SynthPageResult {
                outcome: PageOutcome::Invalid(rej.reason),
                ..base
            },
            Ok(v) => {
                let questions = v
                    .questions
                    .into_iter()
                    .enumerate()
                    .map(|(i, q)| {
                        Question::new(
                            synth_question_id(doc_id, page.page_number(), i),
                            q.question,
                            q.options,
                        )
                        .with_gold(Gold {
                            answer: q.correct_answer,
                            doc_id: doc_id.to_string(),
                            page: page.page_number(),
                        })
                    })
                    .collect();
                SynthPageResult {
                    outcome: if v.entity_name.is_empty() {
                        PageOutcome::Unsuitable
                    } else {
                        PageOutcome::Generated
                    },
                    entity_name: v.entity_name,
                    questions,
                    rejected: v.rejected,
                    entity_not_named: v.entity_not_named,
                    ..base
                }
            }
        })
    })?;
    Ok(results)
}

/// One dataset line: the question schema plus its source page.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthRecord {
    #[serde(flatten)]
    pub record: QuestionRecord,
    pub source_doc_id: String,
    pub source_page: u32,
}

pub fn write_dataset(path: impl AsRef<Path>, results: &[SynthPageResult]) -> Result<usize, Error> {
    let rows: Vec<SynthRecord> = results
        .iter()
        .flat_map(|p| {
            p.questions.iter().map(|q| SynthRecord {
                record: QuestionRecord::from(q),
                source_doc_id: p.doc_id.clone(),
                source_page: p.page_number,
            })
        })
        .collect();
    let n = rows.len();
    write_jsonl(path.as_ref(), rows)?;
    Ok(n)
}

static PAGE_TEXT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)\nDocument page text: (.*)$").unwrap());

/// Offline stand-in for the question writer. It names the entity after the
/// page's first long word and turns up to three sentences into cloze
/// questions whose distractors are other words from the same page.
#[derive(Debug, Default)]
pub struct ClozeSynthGenerator {
    prep: TextPrep,
}

impl ClozeSynthGenerator {
    pub fn new(prep: TextPrep) -> Self {
        Self { prep }
    }

    fn reply(&self, page: &str) -> Value {
        let tokens = self.prep.tokens(page);
        let mut vocab: Vec<String> = Vec::new();
        for t in &tokens {
            if t.surface.chars().count() >= 5
                && t.surface.chars().all(char::is_alphabetic)
                && !vocab.contains(&t.surface)
            {
                vocab.push(t.surface.clone());
            }
        }
        let Some(entity) = vocab.first().cloned() else {
            return serde_json::json!({"entity_name": "", "questions": []});
        };
        let mut questions = Vec::new();
        for (si, sentence) in page
            .split(['.', '!', '?', '\n'])
            .map(str::trim)
            .filter(|s| s.chars().count() >= 20)
            .enumerate()
        {
            if questions.len() == 3 {
                break;
            }
            let Some(answer) = vocab.iter().skip(1).find(|w| sentence.contains(w.as_str())) else {
                continue;
            };
            let distractors: Vec<&String> = vocab.iter().filter(|w| *w != answer).take(5).collect();
            if distractors.len() < 5 {
                continue;
            }
            let correct = Letter::ALL[si % 6];
            let mut obj = serde_json::Map::new();
            obj.insert(
                "question".into(),
                Value::String(format!(
                    "{entity}: {}",
                    sentence.replacen(answer.as_str(), "___", 1)
                )),
            );
            let mut d = distractors.into_iter();
            for l in Letter::ALL {
                let text = if l == correct {
                    answer
                } else {
                    d.next().expect("five distractors")
                };
                obj.insert(l.to_string(), Value::String(text.clone()));
            }
            obj.insert("correct_answer".into(), Value::String(correct.to_string()));
            questions.push(Value::Object(obj));
        }
        serde_json::json!({"entity_name": entity, "questions": questions})
    }
}

impl Generator for ClozeSynthGenerator {
    fn complete(&self, req: &GenRequest) -> Result<String, ProviderError> {
        let page = PAGE_TEXT
            .captures(&req.prompt)
            .ok_or_else(|| ProviderError::InvalidRequest("prompt has no page text".into()))?;
        Ok(self.reply(&page[1]).to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Page};
    use crate::providers::{CountingGenerator, EchoGenerator, FnGenerator};
    use serde_json::json;

    fn item(q: &str) -> Value {
        json!({"question": q, "A": "a", "B": "b", "C": "c", "D": "d", "E": "e", "F": "f", "correct_answer": "C"})
    }

    fn reply(entity: &str, items: Vec<Value>) -> String {
        json!({"entity_name": entity, "questions": items}).to_string()
    }

    #[test]
    fn prompt_has_headers_and_is_stable() {
        let p = synth_prompt("спорт", "текст сторінки", &[]).unwrap();
        assert!(p.contains("YOUR TASK:"));
        assert!(p.contains("RESPONSE FORMAT (strict JSON):"));
        assert!(p.contains("Match the style of: \n"));
        assert!(p.contains(r#"If not suitable: {"entity_name": "", "questions": []}"#));
        assert!(p.ends_with("Document page text: текст сторінки"));
        assert_eq!(p, synth_prompt("спорт", "текст сторінки", &[]).unwrap());
        assert!(synth_prompt("спорт", "", &[]).is_err());
    }

    #[test]
    fn empty_skip_is_valid() {
        let v = validate_synth_response(r#"{"entity_name": "", "questions": []}"#).unwrap();
        assert!(v.questions.is_empty() && v.rejected.is_empty());
    }

    #[test]
    fn twelve_questions_keep_ten() {
        let items = (0..12)
            .map(|i| item(&format!("самбо питання {i}")))
            .collect();
        let v = validate_synth_response(&reply("самбо", items)).unwrap();
        assert_eq!(v.questions.len(), 10);
        assert_eq!(v.rejected.len(), 2);
        assert!(v.rejected.iter().all(|r| r.reason == REASON_OVER_LIMIT));
        assert_eq!(v.questions[9].question, "самбо питання 9");
    }

    #[test]
    fn per_item_rejections() {
        let mut no_f = item("самбо 1");
        no_f.as_object_mut().unwrap().remove("F");
        let mut bad_answer = item("самбо 2");
        bad_answer["correct_answer"] = json!("G");
        let mut blank = item("  ");
        blank["A"] = json!("x");
        let v = validate_synth_response(&reply(
            "самбо",
            vec![no_f, item("самбо 3"), bad_answer, blank, json!(5)],
        ))
        .unwrap();
        assert_eq!(v.questions.len(), 1);
        let reasons: Vec<&str> = v.rejected.iter().map(|r| r.reason.as_str()).collect();
        assert_eq!(
            reasons,
            vec![
                "missing option F",
                REASON_BAD_ANSWER,
                REASON_EMPTY_QUESTION,
                REASON_NOT_OBJECT
            ]
        );
    }

    #[test]
    fn fenced_json_and_whole_rejections() {
        let fenced = format!("```json\n{}\n```", reply("самбо", vec![item("самбо?")]));
        assert_eq!(validate_synth_response(&fenced).unwrap().questions.len(), 1);
        assert_eq!(
            validate_synth_response("not json").unwrap_err().reason,
            REASON_INVALID_JSON
        );
        assert_eq!(
            validate_synth_response(r#"{"questions": []}"#)
                .unwrap_err()
                .reason,
            REASON_MISSING_ENTITY
        );
        assert_eq!(
            validate_synth_response(r#"{"entity_name": "x"}"#)
                .unwrap_err()
                .reason,
            REASON_MISSING_QUESTIONS
        );
    }

    #[test]
    fn entity_rules() {
        let v = validate_synth_response(&reply("", vec![item("q")])).unwrap();
        assert!(v.questions.is_empty());
        assert_eq!(v.rejected[0].reason, REASON_NO_ENTITY);
        let v = validate_synth_response(&reply(
            "Фервекс",
            vec![item("Скільки фервексу?"), item("Скільки?")],
        ))
        .unwrap();
        assert_eq!(v.questions.len(), 2);
        assert_eq!(v.entity_not_named, 1);
    }

    fn corpus(pages: usize) -> Corpus {
        let pages = (1..=pages as u32)
            .map(|n| {
                Page::new(
                    n,
                    format!("Сторінка {n}. {}", "правила змагань ".repeat(20)),
                )
                .unwrap()
            })
            .collect();
        Corpus::from_documents([
            Document::new("b", "", pages).unwrap(),
            Document::new("a", "", vec![Page::new(1, "коротко").unwrap()]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn all_skip_run_attempts_every_long_page() {
        let g = CountingGenerator::new(EchoGenerator::new(
            r#"{"entity_name": "", "questions": []}"#,
        ));
        let calls = g.counter();
        let res =
            generate_dataset(&corpus(3), &g, &SynthConfig::default(), Execution::Parallel).unwrap();
        let rep = SynthReport::from_results(&res);
        assert_eq!(calls.get(), 3);
        assert_eq!(
            (rep.pages_total, rep.pages_attempted, rep.pages_skipped),
            (4, 3, 1)
        );
        assert_eq!((rep.pages_unsuitable, rep.questions_accepted), (3, 0));
        assert_eq!(res[0].doc_id, "a");
    }

    #[test]
    fn provenance_and_failures() {
        let g = FnGenerator::new(|req: &GenRequest| {
            if req.prompt.contains("Сторінка 2.") {
                return Err(ProviderError::Unreachable {
                    attempts: 4,
                    message: "down".into(),
                });
            }
            Ok(reply("самбо", vec![item("самбо 1"), item("самбо 2")]))
        });
        let res = generate_dataset(
            &corpus(3),
            &g,
            &SynthConfig::default(),
            Execution::Sequential,
        )
        .unwrap();
        let rep = SynthReport::from_results(&res);
        assert_eq!((rep.questions_accepted, rep.pages_failed), (4, 1));
        let qs: Vec<_> = res.iter().flat_map(|p| &p.questions).collect();
        let gold: Vec<(u32, &str)> = qs
            .iter()
            .map(|q| (q.gold.as_ref().unwrap().page, q.question_id.as_str()))
            .collect();
        assert_eq!(
            gold,
            vec![
                (1, "b-p1-q0"),
                (1, "b-p1-q1"),
                (3, "b-p3-q0"),
                (3, "b-p3-q1")
            ]
        );
    }

    #[test]
    fn cloze_generator_output_validates() {
        let page = "Самбо змагання проводяться на килимі. Тривалість сутички становить п'ять хвилин для дорослих. \
                    Суддя зупиняє поєдинок після сигналу. Спортсмени виходять на килим одночасно.";
        let req = GenRequest {
            prompt: synth_prompt("спорт", page, &[]).unwrap(),
            max_tokens: 100,
            temperature: 0.0,
        };
        let raw = ClozeSynthGenerator::default().complete(&req).unwrap();
        let v = validate_synth_response(&raw).unwrap();
        assert_eq!(v.entity_name, "Самбо");
        assert!(!v.questions.is_empty() && v.rejected.is_empty());
        assert_eq!(v.entity_not_named, 0);
    }

    #[test]
    fn dataset_file_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let text = "Самбо змагання проводяться на килимі. Тривалість сутички становить п'ять хвилин для дорослих. \
                    Суддя зупиняє поєдинок після сигналу. Спортсмени виходять на килим одночасно.";
        let pages = (1..=5)
            .map(|n| Page::new(n, format!("{text} Сторінка {n}.")).unwrap())
            .collect();
        let corpus = Corpus::from_documents([Document::new("d", "", pages).unwrap()]).unwrap();
        let run = |name: &str, exec| {
            let cfg = SynthConfig {
                min_page_chars: 100,
                ..Default::default()
            };
            let res =
                generate_dataset(&corpus, &ClozeSynthGenerator::default(), &cfg, exec).unwrap();
            let path = dir.path().join(name);
            write_dataset(&path, &res).unwrap();
            std::fs::read(path).unwrap()
        };
        let a = run("a.jsonl", Execution::Parallel);
        assert!(!a.is_empty());
        assert_eq!(a, run("b.jsonl", Execution::Sequential));
        let first: Value =
            serde_json::from_slice(a.split(|b| *b == b'\n').next().unwrap()).unwrap();
        assert_eq!(first["source_doc_id"], first["doc_id"]);
        assert_eq!(first["source_page"], first["page"]);
    }
}
