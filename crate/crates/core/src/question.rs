//! Six-option questions, grounded predictions, and their JSONL/CSV files.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Letter {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Letter {
    pub const ALL: [Letter; 6] = [
        Letter::A,
        Letter::B,
        Letter::C,
        Letter::D,
        Letter::E,
        Letter::F,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_char(self) -> char {
        (b'A' + self as u8) as char
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'A' => Some(Letter::A),
            'B' => Some(Letter::B),
            'C' => Some(Letter::C),
            'D' => Some(Letter::D),
            'E' => Some(Letter::E),
            'F' => Some(Letter::F),
            _ => None,
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for Letter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Letter::from_char(c),
            _ => None,
        }
        .ok_or_else(|| Error::Invalid(format!("answer letter must be one of A-F, got {s:?}")))
    }
}

/// Labeled answer: letter, document and 1-based page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gold {
    pub answer: Letter,
    pub doc_id: String,
    pub page: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub question_id: String,
    pub text: String,
    pub options: [String; 6],
    pub gold: Option<Gold>,
}

impl Question {
    pub fn new(
        question_id: impl Into<String>,
        text: impl Into<String>,
        options: [String; 6],
    ) -> Self {
        Self {
            question_id: question_id.into(),
            text: text.into(),
            options,
            gold: None,
        }
    }

    pub fn with_gold(mut self, gold: Gold) -> Self {
        self.gold = Some(gold);
        self
    }

    pub fn option(&self, letter: Letter) -> &str {
        &self.options[letter.index()]
    }

    /// Question followed by the six options, space-joined.
    pub fn query_text(&self) -> String {
        let mut out = self.text.clone();
        for o in &self.options {
            out.push(' ');
            out.push_str(o);
        }
        out
    }
}

/// On-disk question record. Gold fields are optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub question_id: String,
    pub question: String,
    pub options: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page: Option<u32>,
}

impl TryFrom<QuestionRecord> for Question {
    type Error = Error;

    fn try_from(r: QuestionRecord) -> Result<Self, Error> {
        if r.options.len() != 6 {
            return Err(Error::Invalid(format!(
                "question {}: expected options A-F, got {} option(s)",
                r.question_id,
                r.options.len()
            )));
        }
        let mut options: [String; 6] = Default::default();
        for l in Letter::ALL {
            options[l.index()] = r.options.get(&l.to_string()).cloned().ok_or_else(|| {
                Error::Invalid(format!("question {}: missing option {l}", r.question_id))
            })?;
        }
        let gold = match (r.answer, r.doc_id, r.page) {
            (Some(a), Some(doc_id), Some(page)) if page >= 1 => Some(Gold {
                answer: a.parse()?,
                doc_id,
                page,
            }),
            (None, None, None) => None,
            _ => {
                return Err(Error::Invalid(format!(
                    "question {}: gold needs answer, doc_id and a positive page together",
                    r.question_id
                )))
            }
        };
        Ok(Question {
            question_id: r.question_id,
            text: r.question,
            options,
            gold,
        })
    }
}

impl From<&Question> for QuestionRecord {
    fn from(q: &Question) -> Self {
        QuestionRecord {
            question_id: q.question_id.clone(),
            question: q.text.clone(),
            options: Letter::ALL
                .iter()
                .map(|l| (l.to_string(), q.options[l.index()].clone()))
                .collect(),
            answer: q.gold.as_ref().map(|g| g.answer.to_string()),
            doc_id: q.gold.as_ref().map(|g| g.doc_id.clone()),
            page: q.gold.as_ref().map(|g| g.page),
        }
    }
}

/// A grounded answer for one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub answer: Letter,
    pub doc_id: String,
    pub page: u32,
}

pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, Error> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::json(format!("{}:{}", path.display(), i + 1), e))?,
        );
    }
    Ok(out)
}

pub(crate) fn write_jsonl<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), Error> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        let line =
            serde_json::to_string(&row).map_err(|e| Error::json(path.display().to_string(), e))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_questions(path: impl AsRef<Path>) -> Result<Vec<Question>, Error> {
    let records: Vec<QuestionRecord> = read_jsonl(path.as_ref())?;
    let mut seen = HashSet::new();
    records
        .into_iter()
        .map(|r| {
            if !seen.insert(r.question_id.clone()) {
                return Err(Error::Invalid(format!(
                    "duplicate question_id {:?}",
                    r.question_id
                )));
            }
            Question::try_from(r)
        })
        .collect()
}

pub fn write_questions(path: impl AsRef<Path>, questions: &[Question]) -> Result<(), Error> {
    write_jsonl(path.as_ref(), questions.iter().map(QuestionRecord::from))
}

/// Gold labels: `{"question_id","answer","doc_id","page"}` per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub question_id: String,
    pub answer: Letter,
    pub doc_id: String,
    pub page: u32,
}

pub fn load_gold(path: impl AsRef<Path>) -> Result<Vec<GoldRecord>, Error> {
    read_jsonl(path.as_ref())
}

pub fn write_gold(path: impl AsRef<Path>, questions: &[Question]) -> Result<(), Error> {
    write_jsonl(
        path.as_ref(),
        questions.iter().filter_map(|q| {
            q.gold.as_ref().map(|g| GoldRecord {
                question_id: q.question_id.clone(),
                answer: g.answer,
                doc_id: g.doc_id.clone(),
                page: g.page,
            })
        }),
    )
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>, Error> {
    read_jsonl(path.as_ref())
}

pub fn write_predictions(path: impl AsRef<Path>, predictions: &[Prediction]) -> Result<(), Error> {
    write_jsonl(path.as_ref(), predictions)
}

/// `question_id,answer,doc_id,page` with a header row.
pub fn write_predictions_csv(
    path: impl AsRef<Path>,
    predictions: &[Prediction],
) -> Result<(), Error> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "question_id,answer,doc_id,page").map_err(io)?;
    for p in predictions {
        writeln!(
            w,
            "{},{},{},{}",
            csv_field(&p.question_id),
            p.answer,
            csv_field(&p.doc_id),
            p.page
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
