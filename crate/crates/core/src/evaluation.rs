//! The weighted answer/document/page metric and retrieval diagnostics.
//!
//! Per question: `combined = 0.5·a + 0.25·d + 0.25·d·p`, where `a` is the
//! answer match, `d` the document match and `p` the page proximity
//! `max(0, 1 − |pred − true| / total_pages)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::Error;
use crate::par::{self, Execution};
use crate::question::{read_jsonl, GoldRecord, Prediction};

pub const ANSWER_WEIGHT: f64 = 0.5;
pub const DOC_WEIGHT: f64 = 0.25;
pub const PAGE_WEIGHT: f64 = 0.25;

pub fn page_proximity(pred_page: i64, true_page: u32, total_pages: u32) -> Result<f64, Error> {
    if total_pages < 1 {
        return Err(Error::Invalid("total_pages must be at least 1".into()));
    }
    if true_page < 1 || true_page > total_pages {
        return Err(Error::Invalid(format!(
            "true page {true_page} outside 1..={total_pages}"
        )));
    }
    let delta = (pred_page - i64::from(true_page)).unsigned_abs() as f64;
    Ok((1.0 - delta / f64::from(total_pages)).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQuestionScore {
    pub question_id: String,
    pub a: u8,
    pub d: u8,
    pub p: f64,
    pub combined: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub missing: bool,
}

impl PerQuestionScore {
    fn missing(question_id: &str) -> Self {
        Self {
            question_id: question_id.to_owned(),
            a: 0,
            d: 0,
            p: 0.0,
            combined: 0.0,
            missing: true,
        }
    }
}

pub fn score_question(
    pred: &Prediction,
    gold: &GoldRecord,
    corpus: &Corpus,
) -> Result<PerQuestionScore, Error> {
    let doc = corpus.get(&gold.doc_id).ok_or_else(|| {
        Error::Invalid(format!(
            "question {}: gold document {:?} not in corpus",
            gold.question_id, gold.doc_id
        ))
    })?;
    let a = u8::from(pred.answer == gold.answer);
    let d = u8::from(pred.doc_id == gold.doc_id);
    let p = if d == 1 {
        page_proximity(i64::from(pred.page), gold.page, doc.page_count() as u32)?
    } else {
        0.0
    };
    let combined =
        ANSWER_WEIGHT * f64::from(a) + DOC_WEIGHT * f64::from(d) + PAGE_WEIGHT * f64::from(d) * p;
    Ok(PerQuestionScore {
        question_id: gold.question_id.clone(),
        a,
        d,
        p,
        combined,
        missing: false,
    })
}

/// Retrieval outcome for one question: the routed document and its pages
/// in relevance order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalAudit {
    pub question_id: String,
    pub doc_id: String,
    pub pages: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub missing: usize,
    pub mean_combined: f64,
    pub mean_a: f64,
    pub mean_d: f64,
    /// Mean page proximity over questions with the right document; `None`
    /// when no document was right.
    pub mean_p_given_d: Option<f64>,
    /// Page recall@k from the retrieval audit, keyed by k.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub recall_at_k: BTreeMap<usize, f64>,
    /// Routed-document accuracy from the retrieval audit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_doc_accuracy: Option<f64>,
    pub per_question: Vec<PerQuestionScore>,
}

pub fn evaluate(
    predictions: &[Prediction],
    gold: &[GoldRecord],
    corpus: &Corpus,
    retrieval: Option<&[RetrievalAudit]>,
    ks: &[usize],
    exec: Execution,
) -> Result<EvalReport, Error> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(p.question_id.as_str(), p).is_some() {
            return Err(Error::Invalid(format!(
                "duplicate prediction for question {:?}",
                p.question_id
            )));
        }
    }
    let per_question = par::try_map(exec, gold, |g| match by_id.get(g.question_id.as_str()) {
        Some(p) => score_question(p, g, corpus),
        None => {
            corpus.get(&g.doc_id).ok_or_else(|| {
                Error::Invalid(format!(
                    "question {}: gold document {:?} not in corpus",
                    g.question_id, g.doc_id
                ))
            })?;
            Ok(PerQuestionScore::missing(&g.question_id))
        }
    })?;

    let n = per_question.len();
    let mean = |f: &dyn Fn(&PerQuestionScore) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_question.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let with_doc: Vec<f64> = per_question
        .iter()
        .filter(|s| s.d == 1)
        .map(|s| s.p)
        .collect();

    let mut recall_at_k = BTreeMap::new();
    let mut retrieval_doc_accuracy = None;
    if let Some(audit) = retrieval {
        let by_q: HashMap<&str, &RetrievalAudit> =
            audit.iter().map(|r| (r.question_id.as_str(), r)).collect();
        let denom = gold.len().max(1) as f64;
        for &k in ks {
            let hits = gold
                .iter()
                .filter(|g| {
                    by_q.get(g.question_id.as_str()).is_some_and(|r| {
                        r.doc_id == g.doc_id && r.pages.iter().take(k).any(|p| *p == g.page)
                    })
                })
                .count();
            recall_at_k.insert(k, hits as f64 / denom);
        }
        let doc_hits = gold
            .iter()
            .filter(|g| {
                by_q.get(g.question_id.as_str())
                    .is_some_and(|r| r.doc_id == g.doc_id)
            })
            .count();
        retrieval_doc_accuracy = Some(doc_hits as f64 / denom);
    }

    Ok(EvalReport {
        n,
        missing: per_question.iter().filter(|s| s.missing).count(),
        mean_combined: mean(&|s| s.combined),
        mean_a: mean(&|s| f64::from(s.a)),
        mean_d: mean(&|s| f64::from(s.d)),
        mean_p_given_d: (!with_doc.is_empty())
            .then(|| with_doc.iter().sum::<f64>() / with_doc.len() as f64),
        recall_at_k,
        retrieval_doc_accuracy,
        per_question,
    })
}

pub fn load_retrieval_audit(path: impl AsRef<Path>) -> Result<Vec<RetrievalAudit>, Error> {
    read_jsonl(path.as_ref())
}

/// Human-readable summary for the terminal.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let row = |out: &mut String, k: &str, v: String| {
        let _ = writeln!(out, "{k:<24} {v:>10}");
    };
    row(&mut out, "questions", report.n.to_string());
    row(&mut out, "missing predictions", report.missing.to_string());
    row(
        &mut out,
        "combined score",
        format!("{:.4}", report.mean_combined),
    );
    row(&mut out, "answer accuracy", format!("{:.4}", report.mean_a));
    row(
        &mut out,
        "document accuracy",
        format!("{:.4}", report.mean_d),
    );
    row(
        &mut out,
        "page proximity | doc",
        report
            .mean_p_given_d
            .map_or_else(|| "-".into(), |v| format!("{v:.4}")),
    );
    if let Some(acc) = report.retrieval_doc_accuracy {
        row(&mut out, "routing doc accuracy", format!("{acc:.4}"));
    }
    for (k, v) in &report.recall_at_k {
        row(&mut out, &format!("page recall@{k}"), format!("{v:.4}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Page};
    use crate::question::Letter;
    use proptest::prelude::*;

    fn corpus() -> Corpus {
        let doc = |id: &str, n: u32| {
            Document::new(
                id,
                "",
                (1..=n).map(|p| Page::new(p, "x").unwrap()).collect(),
            )
            .unwrap()
        };
        Corpus::from_documents([doc("d10", 10), doc("d100", 100), doc("d4", 4)]).unwrap()
    }

    fn pred(q: &str, l: Letter, d: &str, p: u32) -> Prediction {
        Prediction {
            question_id: q.into(),
            answer: l,
            doc_id: d.into(),
            page: p,
        }
    }

    fn gold(q: &str, l: Letter, d: &str, p: u32) -> GoldRecord {
        GoldRecord {
            question_id: q.into(),
            answer: l,
            doc_id: d.into(),
            page: p,
        }
    }

    #[test]
    fn proximity_examples() {
        assert_eq!(page_proximity(5, 5, 10).unwrap(), 1.0);
        assert!((page_proximity(3, 5, 10).unwrap() - 0.8).abs() < 1e-15);
        assert!((page_proximity(1, 100, 100).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(page_proximity(500, 1, 10).unwrap(), 0.0);
        assert!(page_proximity(1, 1, 0).is_err());
        assert!(page_proximity(1, 11, 10).is_err());
    }

    #[test]
    fn score_examples() {
        let c = corpus();
        let g = gold("q", Letter::B, "d10", 5);
        let s = |p| score_question(&p, &g, &c).unwrap().combined;
        assert_eq!(s(pred("q", Letter::B, "d10", 5)), 1.0);
        assert_eq!(s(pred("q", Letter::B, "d4", 5)), 0.5);
        assert!((s(pred("q", Letter::B, "d10", 3)) - 0.95).abs() < 1e-12);
        assert!(score_question(
            &pred("q", Letter::B, "d10", 5),
            &gold("q", Letter::B, "nope", 1),
            &c
        )
        .is_err());
    }

    #[test]
    fn aggregate_and_missing() {
        let c = corpus();
        let g = [
            gold("q1", Letter::A, "d10", 1),
            gold("q2", Letter::A, "d10", 1),
        ];
        let p = [
            pred("q1", Letter::A, "d10", 1),
            pred("q2", Letter::A, "d4", 1),
        ];
        let r = evaluate(&p, &g, &c, None, &[], Execution::Sequential).unwrap();
        assert_eq!(r.mean_combined, 0.75);
        assert_eq!(r.mean_p_given_d, Some(1.0));

        let g3 = [
            gold("a", Letter::A, "d4", 1),
            gold("b", Letter::B, "d4", 2),
            gold("c", Letter::C, "d4", 3),
        ];
        let r = evaluate(&[], &g3, &c, None, &[], Execution::Sequential).unwrap();
        assert_eq!((r.mean_combined, r.missing, r.n), (0.0, 3, 3));
        assert_eq!(r.mean_p_given_d, None);

        let dup = [
            pred("q1", Letter::A, "d10", 1),
            pred("q1", Letter::B, "d10", 1),
        ];
        assert!(evaluate(&dup, &g, &c, None, &[], Execution::Sequential).is_err());
    }

    #[test]
    fn recall_from_audit() {
        let c = corpus();
        let g = [
            gold("q1", Letter::A, "d10", 4),
            gold("q2", Letter::A, "d10", 2),
        ];
        let audit = [
            RetrievalAudit {
                question_id: "q1".into(),
                doc_id: "d10".into(),
                pages: vec![7, 1, 4],
            },
            RetrievalAudit {
                question_id: "q2".into(),
                doc_id: "d4".into(),
                pages: vec![2],
            },
        ];
        let r = evaluate(&[], &g, &c, Some(&audit), &[1, 3], Execution::Sequential).unwrap();
        assert_eq!(r.recall_at_k[&1], 0.0);
        assert_eq!(r.recall_at_k[&3], 0.5);
        assert_eq!(r.retrieval_doc_accuracy, Some(0.5));
        let table = render_table(&r);
        assert!(table.contains("page recall@3"));
    }

    proptest! {
        #[test]
        fn score_bounds_gating_and_monotonicity(
            true_page in 1u32..=100,
            a in 1u32..=150,
            b in 1u32..=150,
            right_letter: bool,
        ) {
            let c = corpus();
            let g = gold("q", Letter::C, "d100", true_page);
            let letter = if right_letter { Letter::C } else { Letter::D };
            let right = |p| score_question(&pred("q", letter, "d100", p), &g, &c).unwrap().combined;
            let wrong = |p| score_question(&pred("q", letter, "d10", p), &g, &c).unwrap().combined;
            prop_assert!((0.0..=1.0).contains(&right(a)));
            prop_assert_eq!(wrong(a), wrong(b));
            let da = (i64::from(a) - i64::from(true_page)).abs();
            let db = (i64::from(b) - i64::from(true_page)).abs();
            if da <= db {
                prop_assert!(right(a) >= right(b));
            }
        }
    }
}
