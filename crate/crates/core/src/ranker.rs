//! Inverted-file index over a day's encoded images and cosine ranking.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt::Write as _;

use crate::encoder::BowVector;
use crate::error::{Error, Result};

/// An encoded image ready for indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub image_id: String,
    pub timestamp: i64,
    pub vector: BowVector,
}

#[derive(Debug, Clone)]
pub struct InvertedIndex {
    k: usize,
    ids: Vec<String>,
    timestamps: Vec<i64>,
    /// Per word: `(image ordinal, weight)`, ordinals ascending.
    postings: Vec<Vec<(u32, f64)>>,
}

impl InvertedIndex {
    pub fn words(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn postings(&self, word: u32) -> &[(u32, f64)] {
        &self.postings[word as usize]
    }

    pub fn total_postings(&self) -> usize {
        self.postings.iter().map(Vec::len).sum()
    }

    pub fn image_id(&self, ordinal: usize) -> &str {
        &self.ids[ordinal]
    }
}

pub fn build_index(k: usize, entries: Vec<IndexEntry>) -> Result<InvertedIndex> {
    let mut seen = HashSet::with_capacity(entries.len());
    let mut postings = vec![Vec::new(); k];
    let mut ids = Vec::with_capacity(entries.len());
    let mut timestamps = Vec::with_capacity(entries.len());
    for (ord, e) in entries.into_iter().enumerate() {
        if e.vector.dim() != k {
            return Err(Error::DimensionMismatch(format!(
                "vector of `{}` has K={}, index has K={k}",
                e.image_id,
                e.vector.dim()
            )));
        }
        if !seen.insert(e.image_id.clone()) {
            return Err(Error::DuplicateId(e.image_id));
        }
        for &(w, v) in e.vector.entries() {
            postings[w as usize].push((ord as u32, v));
        }
        ids.push(e.image_id);
        timestamps.push(e.timestamp);
    }
    Ok(InvertedIndex {
        k,
        ids,
        timestamps,
        postings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub image_id: String,
    pub timestamp: i64,
    pub score: f64,
}

/// Images ordered by descending score. Ties go to the newer image, then to
/// the smaller image id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredRanking {
    pub entries: Vec<Scored>,
}

pub(crate) fn score_order(a: &Scored, b: &Scored) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.timestamp.cmp(&a.timestamp))
        .then_with(|| a.image_id.cmp(&b.image_id))
}

impl ScoredRanking {
    pub fn from_unsorted(mut entries: Vec<Scored>) -> Self {
        entries.sort_by(score_order);
        ScoredRanking { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|s| s.image_id.as_str())
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|s| s.score).collect()
    }

    /// TSV dump: `rank, image_id, score, label`. `label` yields the partition
    /// tag per image; pass `None` before filtering to write `-`.
    pub fn to_tsv(&self, label: Option<&dyn Fn(&str) -> char>) -> String {
        let mut out = String::from("rank\timage_id\tscore\tlabel\n");
        for (i, s) in self.entries.iter().enumerate() {
            let tag = label.map_or('-', |f| f(&s.image_id));
            writeln!(out, "{}\t{}\t{:.9}\t{}", i + 1, s.image_id, s.score, tag).unwrap();
        }
        out
    }
}

/// Cosine similarity of `q` against every indexed image.
///
/// Only the postings of the query's words are traversed; images sharing no
/// word with the query keep a score of 0 and still appear in the ranking.
pub fn score_all(idx: &InvertedIndex, q: &BowVector) -> Result<ScoredRanking> {
    if q.dim() != idx.k {
        return Err(Error::DimensionMismatch(format!(
            "query has K={}, index has K={}",
            q.dim(),
            idx.k
        )));
    }
    let mut acc = vec![0f64; idx.len()];
    for &(w, qv) in q.entries() {
        for &(ord, v) in &idx.postings[w as usize] {
            acc[ord as usize] += qv * v;
        }
    }
    let entries = acc
        .into_iter()
        .enumerate()
        .map(|(ord, score)| Scored {
            image_id: idx.ids[ord].clone(),
            timestamp: idx.timestamps[ord],
            score: score.clamp(0.0, 1.0),
        })
        .collect();
    Ok(ScoredRanking::from_unsorted(entries))
}
