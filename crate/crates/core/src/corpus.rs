//! Page-structured document corpus.
//!
//! Corpora arrive as JSON Lines, one document per line, with markdown already
//! extracted per page. Pages whose extraction failed upstream are kept with
//! empty markdown so page numbering stays intact.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CorpusError, Error};

/// One extracted page. `page_number` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    page_number: u32,
    markdown: String,
    char_count: usize,
}

impl Page {
    pub fn new(page_number: u32, markdown: impl Into<String>) -> Result<Self, CorpusError> {
        let markdown = markdown.into();
        if page_number == 0 {
            return Err(CorpusError::NonPositivePage {
                doc_id: String::new(),
                line: 0,
                page_number: 0,
            });
        }
        let char_count = markdown.chars().count();
        Ok(Self {
            page_number,
            markdown,
            char_count,
        })
    }

    pub fn page_number(&self) -> u32 {
        self.page_number
    }

    pub fn markdown(&self) -> &str {
        &self.markdown
    }

    /// Length in Unicode scalar values.
    pub fn char_count(&self) -> usize {
        self.char_count
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    doc_id: String,
    title: String,
    pages: Vec<Page>,
}

impl Document {
    /// Builds a document, sorting pages by number. Duplicate page numbers are
    /// rejected.
    pub fn new(
        doc_id: impl Into<String>,
        title: impl Into<String>,
        mut pages: Vec<Page>,
    ) -> Result<Self, CorpusError> {
        let doc_id = doc_id.into();
        if pages.is_empty() {
            return Err(CorpusError::EmptyDocument(doc_id));
        }
        pages.sort_by_key(Page::page_number);
        if let Some(w) = pages
            .windows(2)
            .find(|w| w[0].page_number == w[1].page_number)
        {
            return Err(CorpusError::DuplicatePage {
                doc_id,
                line: 0,
                page_number: w[0].page_number,
            });
        }
        Ok(Self {
            doc_id,
            title: title.into(),
            pages,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn pages(&self) -> &[Page] {
        &self.pages
    }

    pub fn page_count(&self) -> usize {
        self.pages.len()
    }

    pub fn page(&self, page_number: u32) -> Option<&Page> {
        self.pages
            .binary_search_by_key(&page_number, Page::page_number)
            .ok()
            .map(|i| &self.pages[i])
    }

    /// All page markdown joined with a single newline, in page order.
    pub fn full_text(&self) -> String {
        let mut out = String::new();
        for (i, page) in self.pages.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&page.markdown);
        }
        out
    }
}

/// The first `n_chars` characters of the document's concatenated text.
pub fn document_head(doc: &Document, n_chars: usize) -> Result<String, CorpusError> {
    if doc.pages.is_empty() {
        return Err(CorpusError::EmptyDocument(doc.doc_id.clone()));
    }
    let mut out = String::new();
    let mut remaining = n_chars;
    for (i, page) in doc.pages.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i > 0 {
            out.push('\n');
            remaining -= 1;
        }
        out.extend(page.markdown.chars().take(remaining));
        remaining = remaining.saturating_sub(page.char_count);
    }
    Ok(out)
}

/// Documents keyed by `doc_id`, iterated in id order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    documents: BTreeMap<String, Document>,
}

impl Corpus {
    pub fn from_documents(docs: impl IntoIterator<Item = Document>) -> Result<Self, CorpusError> {
        let mut documents = BTreeMap::new();
        for (i, doc) in docs.into_iter().enumerate() {
            if documents.contains_key(&doc.doc_id) {
                return Err(CorpusError::DuplicateDocId {
                    doc_id: doc.doc_id,
                    line: i + 1,
                });
            }
            documents.insert(doc.doc_id.clone(), doc);
        }
        Ok(Self { documents })
    }

    pub fn total_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.documents.get(doc_id)
    }

    pub fn documents(&self) -> impl ExactSizeIterator<Item = &Document> {
        self.documents.values()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct PageRecord {
    page_number: i64,
    markdown: String,
}

#[derive(Serialize, Deserialize)]
struct DocumentRecord {
    doc_id: String,
    #[serde(default)]
    title: String,
    pages: Vec<PageRecord>,
}

/// Loads and validates a JSON Lines corpus. Blank lines are skipped.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut documents = BTreeMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = parse_record(&line, line_no)?;
        if documents.contains_key(&doc.doc_id) {
            return Err(CorpusError::DuplicateDocId {
                doc_id: doc.doc_id,
                line: line_no,
            });
        }
        documents.insert(doc.doc_id.clone(), doc);
    }
    Ok(Corpus { documents })
}

fn parse_record(line: &str, line_no: usize) -> Result<Document, CorpusError> {
    let record: DocumentRecord =
        serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
    let mut pages = Vec::with_capacity(record.pages.len());
    for p in record.pages {
        let number = u32::try_from(p.page_number)
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CorpusError::NonPositivePage {
                doc_id: record.doc_id.clone(),
                line: line_no,
                page_number: p.page_number,
            })?;
        pages.push(Page::new(number, p.markdown)?);
    }
    Document::new(record.doc_id, record.title, pages).map_err(|e| match e {
        CorpusError::DuplicatePage {
            doc_id,
            page_number,
            ..
        } => CorpusError::DuplicatePage {
            doc_id,
            line: line_no,
            page_number,
        },
        other => other,
    })
}

/// Writes the corpus in the same JSON Lines format `load_corpus` reads.
pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for doc in corpus.documents() {
        let record = DocumentRecord {
            doc_id: doc.doc_id.clone(),
            title: doc.title.clone(),
            pages: doc
                .pages
                .iter()
                .map(|p| PageRecord {
                    page_number: i64::from(p.page_number),
                    markdown: p.markdown.clone(),
                })
                .collect(),
        };
        let line = serde_json::to_string(&record).map_err(|e| Error::json("corpus record", e))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
