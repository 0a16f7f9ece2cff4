//! Ordered `(item_id, score)` lists shared by sparse, dense, fused and
//! reranked results.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Document,
    Chunk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub id: String,
    pub score: f64,
}

/// Scores are non-increasing; equal scores are ordered by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    entries: Vec<RankedEntry>,
    granularity: Granularity,
}

/// Score descending, then id ascending. NaN sorts last.
pub fn rank_order(a_id: &str, a_score: f64, b_id: &str, b_score: f64) -> Ordering {
    match (a_score.is_nan(), b_score.is_nan()) {
        (true, false) => return Ordering::Greater,
        (false, true) => return Ordering::Less,
        _ => {}
    }
    b_score
        .partial_cmp(&a_score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a_id.cmp(b_id))
}

impl RankedList {
    pub fn empty(granularity: Granularity) -> Self {
        Self {
            entries: Vec::new(),
            granularity,
        }
    }

    /// Sorts the given scores into rank order. Later duplicates of an id are
    /// dropped.
    pub fn from_scores<I, S>(scores: I, granularity: Granularity) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut seen = HashSet::new();
        let mut entries: Vec<RankedEntry> = scores
            .into_iter()
            .map(|(id, score)| RankedEntry {
                id: id.into(),
                score,
            })
            .filter(|e| seen.insert(e.id.clone()))
            .collect();
        entries.sort_by(|a, b| rank_order(&a.id, a.score, &b.id, b.score));
        Self {
            entries,
            granularity,
        }
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first_id(&self) -> Option<&str> {
        self.entries.first().map(|e| e.id.as_str())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    /// 1-based rank of `id`, if present.
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.id == id).map(|p| p + 1)
    }

    pub fn score_of(&self, id: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.score)
    }

    pub fn truncated(&self, n: usize) -> Self {
        Self {
            entries: self.entries.iter().take(n).cloned().collect(),
            granularity: self.granularity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_by_ascending_id() {
        let l = RankedList::from_scores(
            [("c1", 0.9), ("c2", 0.1), ("c3", 0.9), ("c4", 0.5)],
            Granularity::Chunk,
        );
        assert_eq!(l.ids().collect::<Vec<_>>(), vec!["c1", "c3", "c4", "c2"]);
        assert_eq!(l.rank_of("c4"), Some(3));
        assert_eq!(l.truncated(2).len(), 2);
    }

    #[test]
    fn nan_sorts_last_and_duplicates_drop() {
        let l = RankedList::from_scores(
            [("a", f64::NAN), ("b", -1.0), ("b", 5.0)],
            Granularity::Document,
        );
        assert_eq!(l.ids().collect::<Vec<_>>(), vec!["b", "a"]);
        assert_eq!(l.score_of("b"), Some(-1.0));
    }
}
