//! Markdown-aware, page-bounded chunking with overlap.
//!
//! Each chunk is a contiguous character span of one page. When a page is
//! longer than the limit, the split point is the last boundary of the
//! strongest kind available in the window: heading start, blank line, line
//! break, sentence end, then word start. A hard cut happens only inside a
//! word longer than the window allows. The next chunk starts `overlap`
//! characters before the previous end, snapped forward to a word start.

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::Error;
use crate::providers::EmbeddingVector;

pub const DEFAULT_MAX_CHUNK_CHARS: usize = 500;
pub const DEFAULT_OVERLAP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkingConfig {
    pub max_chunk_chars: usize,
    pub overlap_fraction: f64,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            max_chunk_chars: DEFAULT_MAX_CHUNK_CHARS,
            overlap_fraction: DEFAULT_OVERLAP_FRACTION,
        }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.max_chunk_chars < 50 {
            return Err(Error::Config(format!(
                "max_chunk_chars must be at least 50, got {}",
                self.max_chunk_chars
            )));
        }
        if !(0.0..0.5).contains(&self.overlap_fraction) {
            return Err(Error::Config(format!(
                "overlap_fraction must be in [0, 0.5), got {}",
                self.overlap_fraction
            )));
        }
        Ok(())
    }

    pub fn overlap_chars(&self) -> usize {
        (self.max_chunk_chars as f64 * self.overlap_fraction).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub page_number: u32,
    pub ordinal: usize,
    /// Character offsets `[start, end)` into the page markdown.
    pub span: (usize, usize),
    pub text: String,
    #[serde(skip)]
    pub embedding: Option<EmbeddingVector>,
}

pub fn chunk_id(doc_id: &str, page_number: u32, ordinal: usize) -> String {
    format!("{doc_id}#p{page_number:05}#c{ordinal:04}")
}

pub fn chunk_document(doc: &Document, config: &ChunkingConfig) -> Result<Vec<Chunk>, Error> {
    config.validate()?;
    let mut out = Vec::new();
    for page in doc.pages() {
        for (ordinal, (start, end)) in split_spans(page.markdown(), config).into_iter().enumerate()
        {
            let text: String = page
                .markdown()
                .chars()
                .skip(start)
                .take(end - start)
                .collect();
            out.push(Chunk {
                chunk_id: chunk_id(doc.doc_id(), page.page_number(), ordinal),
                doc_id: doc.doc_id().to_owned(),
                page_number: page.page_number(),
                ordinal,
                span: (start, end),
                text,
                embedding: None,
            });
        }
    }
    Ok(out)
}

/// Character spans of the chunks of one page. Empty text yields none.
pub fn split_spans(text: &str, config: &ChunkingConfig) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let len = chars.len();
    let max = config.max_chunk_chars;
    let overlap = config.overlap_chars();
    let mut spans = Vec::new();
    if len == 0 {
        return spans;
    }
    let mut start = 0;
    loop {
        if len - start <= max {
            spans.push((start, len));
            return spans;
        }
        let end = split_point(&chars, start, max, overlap);
        spans.push((start, end));
        start = next_start(&chars, end, overlap);
    }
}

/// Whether a split may fall before position `p`.
type BoundaryTest = fn(&[char], usize) -> bool;

fn split_point(chars: &[char], start: usize, max: usize, overlap: usize) -> usize {
    let hi = start + max;
    // Every split leaves room for the overlap so the next start advances.
    let structural_lo = start + (max / 4).max(overlap + 1);
    let levels: [(BoundaryTest, usize); 5] = [
        (is_heading_start, structural_lo),
        (is_after_blank_line, structural_lo),
        (is_line_start, structural_lo),
        (is_sentence_start, structural_lo),
        (is_word_start, start + overlap + 1),
    ];
    for (is_boundary, lo) in levels {
        if let Some(p) = (lo..=hi).rev().find(|&p| is_boundary(chars, p)) {
            return p;
        }
    }
    hi
}

fn next_start(chars: &[char], end: usize, overlap: usize) -> usize {
    (end.saturating_sub(overlap)..end)
        .find(|&p| p == 0 || is_word_start(chars, p))
        .unwrap_or(end)
}

fn is_heading_start(chars: &[char], p: usize) -> bool {
    p > 0 && chars[p - 1] == '\n' && chars.get(p) == Some(&'#')
}

fn is_after_blank_line(chars: &[char], p: usize) -> bool {
    p > 1
        && chars[p - 1] == '\n'
        && chars[p - 2] == '\n'
        && chars.get(p).is_some_and(|c| *c != '\n')
}

fn is_line_start(chars: &[char], p: usize) -> bool {
    p > 0 && chars[p - 1] == '\n' && chars.get(p).is_some_and(|c| *c != '\n')
}

fn is_sentence_start(chars: &[char], p: usize) -> bool {
    p > 1
        && chars[p - 1].is_whitespace()
        && matches!(chars[p - 2], '.' | '!' | '?' | '…')
        && chars.get(p).is_some_and(|c| !c.is_whitespace())
}

fn is_word_start(chars: &[char], p: usize) -> bool {
    p > 0 && chars[p - 1].is_whitespace() && chars.get(p).is_some_and(|c| !c.is_whitespace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Page;
    use proptest::prelude::*;

    fn cfg() -> ChunkingConfig {
        ChunkingConfig::default()
    }

    fn reconstruct(text: &str, spans: &[(usize, usize)]) -> String {
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::new();
        let mut covered = 0;
        for &(s, e) in spans {
            assert!(s <= covered, "gap before {s}");
            out.extend(&chars[covered.max(s)..e]);
            covered = e;
        }
        out
    }

    fn words(n_chars: usize) -> String {
        let vocab = [
            "спорт",
            "правило",
            "доза",
            "таблетка",
            "суддя",
            "матч",
            "гравець",
        ];
        let mut s = String::new();
        let mut i = 0;
        while s.chars().count() < n_chars {
            s.push_str(vocab[i % vocab.len()]);
            s.push(' ');
            i += 1;
        }
        s.chars().take(n_chars).collect()
    }

    #[test]
    fn short_page_is_single_chunk() {
        let text = words(200);
        assert_eq!(split_spans(&text, &cfg()), vec![(0, 200)]);
        let text = words(500);
        assert_eq!(split_spans(&text, &cfg()), vec![(0, 500)]);
        assert!(split_spans("", &cfg()).is_empty());
    }

    #[test]
    fn thousand_chars_reconstruct() {
        let text = words(1000);
        let spans = split_spans(&text, &cfg());
        assert!(spans.len() >= 3);
        for w in spans.windows(2) {
            let overlap = w[0].1 - w[1].0;
            assert!(overlap <= 100);
            assert!(w[1].1 > w[0].1);
        }
        assert!(spans.iter().all(|(s, e)| e - s <= 500));
        assert_eq!(reconstruct(&text, &spans), text);
    }

    #[test]
    fn prefers_heading_boundary() {
        let text = format!("{}\n# Розділ 2\n{}", words(300), words(400));
        let spans = split_spans(&text, &cfg());
        let chars: Vec<char> = text.chars().collect();
        assert_eq!(chars[spans[0].1], '#');
    }

    #[test]
    fn hard_cut_only_for_giant_words() {
        let text = "ж".repeat(1200);
        let spans = split_spans(&text, &cfg());
        assert_eq!(spans[0], (0, 500));
        assert_eq!(reconstruct(&text, &spans), text);
    }

    #[test]
    fn chunks_stay_on_their_page() {
        let pages = vec![
            Page::new(1, words(700)).unwrap(),
            Page::new(2, "").unwrap(),
            Page::new(3, "коротко").unwrap(),
        ];
        let doc = Document::new("d1", "", pages).unwrap();
        let chunks = chunk_document(&doc, &cfg()).unwrap();
        assert!(chunks.iter().all(|c| c.page_number != 2));
        let last = chunks.last().unwrap();
        assert_eq!((last.page_number, last.text.as_str()), (3, "коротко"));
        assert_eq!(last.chunk_id, "d1#p00003#c0000");
        let p1: Vec<_> = chunks.iter().filter(|c| c.page_number == 1).collect();
        assert!(p1.windows(2).all(|w| w[0].ordinal + 1 == w[1].ordinal));
    }

    #[test]
    fn config_validation() {
        let bad = ChunkingConfig {
            max_chunk_chars: 40,
            overlap_fraction: 0.1,
        };
        assert!(bad.validate().is_err());
        let bad = ChunkingConfig {
            max_chunk_chars: 500,
            overlap_fraction: 0.5,
        };
        assert!(bad.validate().is_err());
        assert_eq!(cfg().overlap_chars(), 50);
    }

    proptest! {
        #[test]
        fn spans_cover_page_exactly(
            text in "(#{0,2} ?[a-zа-я]{1,12}[ .,!?\n|]{1,3}){0,400}",
            max in 50usize..700,
            frac in 0.0f64..0.45,
        ) {
            let cfg = ChunkingConfig { max_chunk_chars: max, overlap_fraction: frac };
            let spans = split_spans(&text, &cfg);
            prop_assert_eq!(reconstruct(&text, &spans), text.clone());
            for w in spans.windows(2) {
                prop_assert!(w[0].1 - w[1].0 <= 2 * cfg.overlap_chars());
            }
            for (s, e) in &spans {
                prop_assert!(e - s <= max && e > s);
            }
        }
    }
}
