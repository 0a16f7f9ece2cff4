//! Reciprocal rank fusion.
//!
//! `score(c) = Σ 1 / (k + rank(c))` over the lists that contain `c`, with
//! 1-based ranks. Only ranks enter the formula, so any strictly monotone
//! rescaling of an input leaves the fused order unchanged.

use std::collections::BTreeMap;

use crate::ranking::{Granularity, RankedList};

pub const DEFAULT_RRF_K: u32 = 60;

pub fn rrf_fuse(dense: &RankedList, sparse: &RankedList, rrf_k: u32) -> RankedList {
    rrf_fuse_many(&[dense, sparse], rrf_k, dense.granularity())
}

pub fn rrf_fuse_many(lists: &[&RankedList], rrf_k: u32, granularity: Granularity) -> RankedList {
    let k = f64::from(rrf_k);
    let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
    for list in lists {
        for (pos, id) in list.ids().enumerate() {
            *scores.entry(id).or_default() += 1.0 / (k + (pos + 1) as f64);
        }
    }
    RankedList::from_scores(scores, granularity)
}
