//! Grounded answer generation: prompt assembly from the retrieved pages,
//! the provider call, and parsing of the `"<letter> <page>"` reply.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::providers::{GenRequest, Generator, ProviderError};
use crate::question::{Letter, Prediction, Question};
use crate::text_prep::TextPrep;

pub const MAX_CONTEXT_PAGES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptLanguage {
    #[default]
    Ukrainian,
    English,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub language: PromptLanguage,
    pub max_tokens: u32,
    pub temperature: f64,
    /// Prompt budget in tokens; pages are dropped from the end to fit.
    pub token_budget: usize,
    /// Characters per token used to estimate prompt length.
    pub chars_per_token: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            language: PromptLanguage::Ukrainian,
            max_tokens: 16,
            temperature: 0.0,
            token_budget: 4000,
            chars_per_token: 3.0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.max_tokens == 0 || self.token_budget == 0 {
            return Err(Error::Config(
                "max_tokens and token_budget must be positive".into(),
            ));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if !(self.chars_per_token.is_finite() && self.chars_per_token > 0.0) {
            return Err(Error::Config("chars_per_token must be positive".into()));
        }
        Ok(())
    }

    fn budget_chars(&self) -> usize {
        (self.token_budget as f64 * self.chars_per_token).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextPage {
    pub page_number: u32,
    pub text: String,
}

impl ContextPage {
    pub fn new(page_number: u32, text: impl Into<String>) -> Self {
        Self {
            page_number,
            text: text.into(),
        }
    }
}

struct Template {
    preamble: &'static str,
    page_label: &'static str,
    question: &'static str,
    options: &'static str,
    instructions: &'static str,
}

const UKRAINIAN: Template = Template {
    preamble: "Контекст (уривки з PDF-файлів - кожен уривок\n\
               відокремлено символами ``` і містить номер\n\
               сторінки у квадратних дужках []):\n",
    page_label: "Сторінка",
    question: "Питання",
    options: "Варіанти",
    instructions: "Інструкції:\n\
                   - Дайте відповідь на Питання, використовуючи Контекст.\n\
                   - Поверніть літеру правильної відповіді (A B C D E F)\n  \
                   і номер сторінки, де знайдено інформацію,\n  \
                   через пробіл (наприклад, A 1).\n\
                   - Подумайте уважно; спершу відкиньте очевидно\n  \
                   нерелевантні варіанти.\n",
};

const ENGLISH: Template = Template {
    preamble: "Context (excerpts from PDF files - each excerpt is\n\
               separated by ``` characters and contains a page\n\
               number enclosed in []):\n",
    page_label: "Page",
    question: "Question",
    options: "Options",
    instructions: "Instructions:\n\
                   - Answer the Question using the Context.\n\
                   - Return the letter of the correct answer (A B C D E F)\n  \
                   and the page number where the information was found,\n  \
                   separated by a space (e.g., A 1).\n\
                   - Think carefully; first eliminate the obviously\n  \
                   irrelevant options.\n",
};

impl PromptLanguage {
    fn template(self) -> &'static Template {
        match self {
            PromptLanguage::Ukrainian => &UKRAINIAN,
            PromptLanguage::English => &ENGLISH,
        }
    }
}

/// Renders the answer prompt. Pages appear in the given order, each in its
/// own fenced block headed by its page number.
pub fn build_prompt(
    question: &Question,
    pages: &[ContextPage],
    language: PromptLanguage,
) -> Result<String, Error> {
    if pages.is_empty() || pages.len() > MAX_CONTEXT_PAGES {
        return Err(Error::Invalid(format!(
            "prompt needs 1 to {MAX_CONTEXT_PAGES} pages, got {}",
            pages.len()
        )));
    }
    if let Some(p) = pages.iter().find(|p| p.text.is_empty()) {
        return Err(Error::Invalid(format!(
            "context page {} is empty",
            p.page_number
        )));
    }
    let t = language.template();
    let mut out = String::from(t.preamble);
    for p in pages {
        let _ = write!(
            out,
            "```\n{}: [{}]\n{}\n```\n",
            t.page_label, p.page_number, p.text
        );
    }
    let _ = write!(out, "\n{}: {}\n{}:\n", t.question, question.text, t.options);
    for l in Letter::ALL {
        let _ = writeln!(out, "{l}: {}", question.option(l));
    }
    out.push_str(t.instructions);
    Ok(out)
}

/// The canonical reply for a letter and page.
pub fn format_answer(letter: Letter, page: u32) -> String {
    format!("{letter} {page}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum AnswerParseError {
    #[error("no answer letter found")]
    NoLetter,
    #[error("no page number found")]
    NoPage,
    #[error("answer letter outside A-F")]
    LetterOutOfRange,
    #[error("reply does not match \"<letter> <page>\"")]
    Unrecognized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParsedAnswer {
    pub letter: Letter,
    pub page: u32,
    /// The cited page was not among the context pages.
    pub out_of_context: bool,
}

static ANSWER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*([A-Fa-f])[\s,:]+(\d+)\s*$").unwrap());
static ANY_LETTER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([A-Za-z])\b").unwrap());
static ANY_NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").unwrap());

/// Parses a `"<letter> <page>"` reply after stripping markdown emphasis and
/// trailing punctuation. Capital Cyrillic look-alikes of A, B, C and E are
/// read as their Latin letters.
pub fn parse_answer(
    raw: &str,
    allowed_pages: &BTreeSet<u32>,
) -> Result<ParsedAnswer, AnswerParseError> {
    let cleaned: String = raw
        .chars()
        .filter(|c| !matches!(c, '*' | '_' | '`'))
        .map(fold_homoglyph)
        .collect();
    let cleaned = cleaned.trim_end_matches(|c: char| {
        c.is_whitespace() || matches!(c, '.' | ',' | ';' | ':' | '!' | '?' | ')')
    });

    if let Some(m) = ANSWER.captures(cleaned) {
        let letter = m[1]
            .chars()
            .next()
            .and_then(Letter::from_char)
            .expect("regex admits A-F only");
        return match m[2].parse::<u32>() {
            Ok(page) if page >= 1 => Ok(ParsedAnswer {
                letter,
                page,
                out_of_context: !allowed_pages.contains(&page),
            }),
            _ => Err(AnswerParseError::NoPage),
        };
    }

    let letters: Vec<char> = ANY_LETTER
        .captures_iter(cleaned)
        .filter_map(|c| c[1].chars().next())
        .collect();
    if letters.iter().any(|c| Letter::from_char(*c).is_some()) {
        if ANY_NUMBER.is_match(cleaned) {
            Err(AnswerParseError::Unrecognized)
        } else {
            Err(AnswerParseError::NoPage)
        }
    } else if letters.is_empty() {
        Err(AnswerParseError::NoLetter)
    } else {
        Err(AnswerParseError::LetterOutOfRange)
    }
}

fn fold_homoglyph(c: char) -> char {
    match c {
        'А' => 'A',
        'В' => 'B',
        'С' => 'C',
        'Е' => 'E',
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum AnswerFailure {
    Parse(AnswerParseError),
    Provider(String),
    /// The routed document has no text to show the generator.
    NoContext,
}

/// A prediction with the diagnostics of how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedAnswer {
    #[serde(flatten)]
    pub prediction: Prediction,
    pub raw_output: String,
    pub out_of_context: bool,
    /// The fallback policy produced this prediction.
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<AnswerFailure>,
    /// Pages that fit the prompt budget, in prompt order.
    pub context_pages: Vec<u32>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub context_truncated: bool,
}

/// Fits the pages into the token budget: the lowest-ranked page goes
/// first, and a lone page that still overflows is cut from its end.
/// Returns the prompt, the pages used and whether any text was removed.
pub fn fit_prompt(
    question: &Question,
    pages: &[ContextPage],
    config: &GenerationConfig,
) -> Result<(String, Vec<ContextPage>, bool), Error> {
    let mut kept: Vec<ContextPage> = pages.iter().take(MAX_CONTEXT_PAGES).cloned().collect();
    let mut truncated = kept.len() < pages.len();
    let limit = config.budget_chars();
    loop {
        let prompt = build_prompt(question, &kept, config.language)?;
        let len = prompt.chars().count();
        if len <= limit {
            return Ok((prompt, kept, truncated));
        }
        truncated = true;
        if kept.len() > 1 {
            kept.pop();
            continue;
        }
        let page = &mut kept[0];
        let page_len = page.text.chars().count();
        let keep = page_len.saturating_sub(len - limit).max(1);
        if keep == page_len {
            // Only the fixed template is over budget; send it anyway.
            return Ok((prompt, kept, truncated));
        }
        page.text = page.text.chars().take(keep).collect();
    }
}

/// Answers one routed question. Never fails because of the generator: an
/// unusable or missing reply yields letter A on the top-ranked page with
/// `degraded` set.
pub fn answer_question(
    question: &Question,
    doc_id: &str,
    pages: &[ContextPage],
    generator: &dyn Generator,
    config: &GenerationConfig,
) -> Result<GroundedAnswer, Error> {
    let top_page = pages
        .first()
        .ok_or_else(|| {
            Error::Invalid(format!(
                "question {}: no pages retrieved",
                question.question_id
            ))
        })?
        .page_number;
    let (prompt, used, context_truncated) = fit_prompt(question, pages, config)?;
    let allowed: BTreeSet<u32> = used.iter().map(|p| p.page_number).collect();
    let request = GenRequest {
        prompt,
        max_tokens: config.max_tokens,
        temperature: config.temperature,
    };

    let reply = generator.generate(&request);
    let (raw_output, parsed) = match reply {
        Ok(raw) => {
            let parsed = parse_answer(&raw, &allowed).map_err(AnswerFailure::Parse);
            (raw, parsed)
        }
        Err(e) => (String::new(), Err(provider_failure(&e))),
    };
    let prediction = |answer, page| Prediction {
        question_id: question.question_id.clone(),
        answer,
        doc_id: doc_id.to_owned(),
        page,
    };
    let context_pages = used.iter().map(|p| p.page_number).collect();
    Ok(match parsed {
        Ok(p) => GroundedAnswer {
            prediction: prediction(p.letter, p.page),
            raw_output,
            out_of_context: p.out_of_context,
            degraded: false,
            failure: None,
            context_pages,
            context_truncated,
        },
        Err(failure) => {
            log::warn!(
                "question {}: {failure:?}; using fallback answer",
                question.question_id
            );
            GroundedAnswer {
                prediction: prediction(Letter::A, top_page),
                raw_output,
                out_of_context: false,
                degraded: true,
                failure: Some(failure),
                context_pages,
                context_truncated,
            }
        }
    })
}

fn provider_failure(e: &ProviderError) -> AnswerFailure {
    AnswerFailure::Provider(e.to_string())
}

static PAGE_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:Page|Сторінка): \[(\d+)\]$").unwrap());
static OPTION_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([A-F]): (.*)$").unwrap());

/// Offline stand-in for a generative model. It reads the rendered prompt,
/// cites the first context page, and picks the option sharing the most
/// lemmas with that page (earliest option on ties).
#[derive(Debug, Default)]
pub struct ExtractiveGenerator {
    prep: TextPrep,
}

impl ExtractiveGenerator {
    pub fn new(prep: TextPrep) -> Self {
        Self { prep }
    }

    fn answer(&self, prompt: &str) -> Option<String> {
        let mut lines = prompt.lines();
        let mut page = None;
        let mut page_text = String::new();
        while let Some(line) = lines.next() {
            if let Some(m) = PAGE_HEADER.captures(line) {
                page = m[1].parse::<u32>().ok();
                for body in lines.by_ref() {
                    if body == "```" {
                        break;
                    }
                    page_text.push_str(body);
                    page_text.push('\n');
                }
                break;
            }
        }
        let page = page?;
        let in_page: BTreeSet<String> = self.prep.preprocess(&page_text).into_iter().collect();
        let options: Vec<(Letter, String)> = lines
            .filter_map(|l| OPTION_LINE.captures(l))
            .filter_map(|m| Some((Letter::from_char(m[1].chars().next()?)?, m[2].to_owned())))
            .collect();
        let mut best = (Letter::A, 0usize);
        for (letter, text) in &options {
            let lemmas: BTreeSet<String> = self.prep.preprocess(text).into_iter().collect();
            let overlap = lemmas.iter().filter(|l| in_page.contains(*l)).count();
            if overlap > best.1 {
                best = (*letter, overlap);
            }
        }
        Some(format_answer(best.0, page))
    }
}

impl Generator for ExtractiveGenerator {
    fn complete(&self, req: &GenRequest) -> Result<String, ProviderError> {
        self.answer(&req.prompt)
            .ok_or_else(|| ProviderError::InvalidRequest("prompt has no context page".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{EchoGenerator, FnGenerator};

    fn question() -> Question {
        Question::new(
            "q1",
            "Яка максимальна доза?",
            ["10 мг", "20 мг", "30 мг", "40 мг", "50 мг", "60 мг"].map(String::from),
        )
    }

    fn pages(nums: &[u32]) -> Vec<ContextPage> {
        nums.iter()
            .map(|n| ContextPage::new(*n, format!("текст сторінки {n}")))
            .collect()
    }

    fn allowed(p: &[u32]) -> BTreeSet<u32> {
        p.iter().copied().collect()
    }

    #[test]
    fn english_prompt_matches_template() {
        let p = build_prompt(
            &question(),
            &[ContextPage::new(2, "body")],
            PromptLanguage::English,
        )
        .unwrap();
        let expected = "Context (excerpts from PDF files - each excerpt is\n\
separated by ``` characters and contains a page\n\
number enclosed in []):\n\
```\nPage: [2]\nbody\n```\n\
\nQuestion: Яка максимальна доза?\nOptions:\n\
A: 10 мг\nB: 20 мг\nC: 30 мг\nD: 40 мг\nE: 50 мг\nF: 60 мг\n\
Instructions:\n\
- Answer the Question using the Context.\n\
- Return the letter of the correct answer (A B C D E F)\n  and the page number where the information was found,\n  separated by a space (e.g., A 1).\n\
- Think carefully; first eliminate the obviously\n  irrelevant options.\n";
        assert_eq!(p, expected);
        assert_eq!(p.matches("Page: [2]").count(), 1);
    }

    #[test]
    fn ukrainian_prompt_blocks_in_order() {
        let p = build_prompt(&question(), &pages(&[9, 2, 5]), PromptLanguage::Ukrainian).unwrap();
        let a = p.find("Сторінка: [9]").unwrap();
        let b = p.find("Сторінка: [2]").unwrap();
        let c = p.find("Сторінка: [5]").unwrap();
        assert!(a < b && b < c);
        assert_eq!(p.matches("```\nСторінка").count(), 3);
        for l in Letter::ALL {
            assert!(p.contains(&format!("\n{l}: ")));
        }
        assert_eq!(
            p,
            build_prompt(&question(), &pages(&[9, 2, 5]), PromptLanguage::Ukrainian).unwrap()
        );
    }

    #[test]
    fn prompt_rejects_bad_page_sets() {
        assert!(build_prompt(&question(), &[], PromptLanguage::English).is_err());
        assert!(build_prompt(&question(), &pages(&[1, 2, 3, 4]), PromptLanguage::English).is_err());
        assert!(build_prompt(
            &question(),
            &[ContextPage::new(1, "")],
            PromptLanguage::English
        )
        .is_err());
    }

    #[test]
    fn parse_examples() {
        let any = allowed(&[2, 14]);
        let ok = |raw| parse_answer(raw, &any).map(|p| (p.letter, p.page));
        assert_eq!(ok("A 2"), Ok((Letter::A, 2)));
        assert_eq!(ok("  c 14."), Ok((Letter::C, 14)));
        assert_eq!(ok("**B**: 2"), Ok((Letter::B, 2)));
        assert_eq!(ok("D,2"), Ok((Letter::D, 2)));
        assert_eq!(ok("В 14"), Ok((Letter::B, 14)));
        assert_eq!(
            ok("The answer is G 3"),
            Err(AnswerParseError::LetterOutOfRange)
        );
        assert_eq!(ok("G 3"), Err(AnswerParseError::LetterOutOfRange));
        assert_eq!(ok("Сторінка 3"), Err(AnswerParseError::NoLetter));
        assert_eq!(ok(""), Err(AnswerParseError::NoLetter));
        assert_eq!(ok("B"), Err(AnswerParseError::NoPage));
        assert_eq!(ok("B 0"), Err(AnswerParseError::NoPage));
        assert_eq!(ok("answer: B, page 3"), Err(AnswerParseError::Unrecognized));
        assert!(
            parse_answer("F 7", &allowed(&[2, 5, 9]))
                .unwrap()
                .out_of_context
        );
    }

    #[test]
    fn answer_happy_and_out_of_context() {
        let g = EchoGenerator::new("B 7");
        let a = answer_question(
            &question(),
            "doc",
            &pages(&[7]),
            &g,
            &GenerationConfig::default(),
        )
        .unwrap();
        assert_eq!(
            (
                a.prediction.answer,
                a.prediction.page,
                a.prediction.doc_id.as_str()
            ),
            (Letter::B, 7, "doc")
        );
        assert!(!a.out_of_context && !a.degraded);

        let a = answer_question(
            &question(),
            "doc",
            &pages(&[2, 5, 9]),
            &g,
            &GenerationConfig::default(),
        )
        .unwrap();
        assert_eq!(a.prediction.page, 7);
        assert!(a.out_of_context && !a.degraded);
        assert_eq!(a.raw_output, "B 7");
    }

    #[test]
    fn fallback_on_garbage_and_provider_error() {
        let g = EchoGenerator::new("не знаю");
        let a = answer_question(
            &question(),
            "doc",
            &pages(&[5, 2]),
            &g,
            &GenerationConfig::default(),
        )
        .unwrap();
        assert_eq!((a.prediction.answer, a.prediction.page), (Letter::A, 5));
        assert!(a.degraded);
        assert_eq!(a.raw_output, "не знаю");

        let g = FnGenerator::new(|_: &GenRequest| {
            Err(ProviderError::Http {
                status: 503,
                body: "down".into(),
            })
        });
        let a = answer_question(
            &question(),
            "doc",
            &pages(&[3]),
            &g,
            &GenerationConfig::default(),
        )
        .unwrap();
        assert_eq!((a.prediction.answer, a.prediction.page), (Letter::A, 3));
        assert!(matches!(a.failure, Some(AnswerFailure::Provider(_))));
    }

    #[test]
    fn budget_drops_lowest_ranked_page_first() {
        let big = |n| ContextPage::new(n, "слово ".repeat(300));
        let cfg = GenerationConfig {
            token_budget: 1000,
            ..Default::default()
        };
        let (prompt, used, truncated) =
            fit_prompt(&question(), &[big(4), big(8), big(1)], &cfg).unwrap();
        assert!(truncated);
        assert_eq!(
            used.iter().map(|p| p.page_number).collect::<Vec<_>>(),
            vec![4]
        );
        assert!(prompt.chars().count() <= 3000);

        let cfg = GenerationConfig {
            token_budget: 300,
            ..Default::default()
        };
        let (prompt, used, _) = fit_prompt(&question(), &[big(4)], &cfg).unwrap();
        assert!(prompt.chars().count() <= 900);
        assert!(used[0].text.chars().count() < 1800);
    }

    #[test]
    fn generator_request_defaults() {
        let g = FnGenerator::new(|req: &GenRequest| {
            assert_eq!((req.max_tokens, req.temperature), (16, 0.0));
            Ok("E 1".to_string())
        });
        let a = answer_question(
            &question(),
            "doc",
            &pages(&[1]),
            &g,
            &GenerationConfig::default(),
        )
        .unwrap();
        assert_eq!(a.prediction.answer, Letter::E);
    }

    #[test]
    fn extractive_generator_picks_overlapping_option() {
        let q = Question::new(
            "q",
            "Що дозволено?",
            ["бокс", "плавання", "шахи", "біг", "стрибки", "теніс"].map(String::from),
        );
        let ctx = [
            ContextPage::new(12, "у цьому розділі описано шахи та правила"),
            ContextPage::new(3, "теніс"),
        ];
        for lang in [PromptLanguage::Ukrainian, PromptLanguage::English] {
            let cfg = GenerationConfig {
                language: lang,
                ..Default::default()
            };
            let a = answer_question(&q, "d", &ctx, &ExtractiveGenerator::default(), &cfg).unwrap();
            assert_eq!((a.prediction.answer, a.prediction.page), (Letter::C, 12));
        }
    }

    #[test]
    fn grounded_answer_serializes_flat() {
        let a = answer_question(
            &question(),
            "doc",
            &pages(&[7]),
            &EchoGenerator::new("B 7"),
            &GenerationConfig::default(),
        )
        .unwrap();
        let v = serde_json::to_value(&a).unwrap();
        assert_eq!(v["answer"], "B");
        assert_eq!(v["page"], 7);
        assert!(v.get("failure").is_none());
    }
}
