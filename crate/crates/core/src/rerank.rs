//! Temporal reranking of a candidate partition into the final list
//! `[R_C, R_D]`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::filter::CandidatePartition;
use crate::ranker::Scored;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Candidate,
    Discarded,
}

impl Label {
    pub fn as_char(self) -> char {
        match self {
            Label::Candidate => 'C',
            Label::Discarded => 'D',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rerank {
    TimeSort,
    Interleave,
}

impl Rerank {
    pub const ALL: [Rerank; 2] = [Rerank::TimeSort, Rerank::Interleave];

    pub fn code(self) -> &'static str {
        match self {
            Rerank::TimeSort => "time",
            Rerank::Interleave => "interleave",
        }
    }

    pub fn apply(self, p: &CandidatePartition) -> FinalRanking {
        match self {
            Rerank::TimeSort => time_sort(p),
            Rerank::Interleave => interleave(p),
        }
    }
}

impl fmt::Display for Rerank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Rerank {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "time" | "time-sort" => Ok(Rerank::TimeSort),
            "interleave" | "i" => Ok(Rerank::Interleave),
            _ => Err(Error::invalid(format!("unknown rerank `{s}` (time, interleave)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedImage {
    pub image_id: String,
    pub timestamp: i64,
    pub label: Label,
}

/// Every image of the day once, candidates first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FinalRanking {
    pub entries: Vec<RankedImage>,
}

impl FinalRanking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.image_id.as_str())
    }

    /// TSV rows `rank, image_id, label, timestamp`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("rank\timage_id\tlabel\ttimestamp\n");
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                i + 1,
                e.image_id,
                e.label.as_char(),
                e.timestamp
            ));
        }
        out
    }
}

/// Newest first; equal timestamps by ascending image id.
pub fn newest_first<T>(items: &mut [T], key: impl Fn(&T) -> (i64, &str)) {
    items.sort_by(|a, b| {
        let (ta, ia) = key(a);
        let (tb, ib) = key(b);
        tb.cmp(&ta).then_with(|| ia.cmp(ib))
    });
}

fn ranked(items: &[Scored], label: Label) -> Vec<RankedImage> {
    let mut out: Vec<RankedImage> = items
        .iter()
        .map(|s| RankedImage {
            image_id: s.image_id.clone(),
            timestamp: s.timestamp,
            label,
        })
        .collect();
    newest_first(&mut out, |e| (e.timestamp, e.image_id.as_str()));
    out
}

/// `R_C` and `R_D` each sorted newest first, then concatenated.
pub fn time_sort(p: &CandidatePartition) -> FinalRanking {
    let mut entries = ranked(&p.candidates, Label::Candidate);
    entries.extend(ranked(&p.discarded, Label::Discarded));
    FinalRanking { entries }
}

/// Temporal interleaving.
///
/// All images are listed newest first and cut into maximal runs of equal
/// label. `R_C` takes the first image of every candidate run (in list order),
/// then every second image, and so on, skipping exhausted runs. `R_D` is built
/// the same way from the discarded runs.
pub fn interleave(p: &CandidatePartition) -> FinalRanking {
    let mut all = ranked(&p.candidates, Label::Candidate);
    all.extend(ranked(&p.discarded, Label::Discarded));
    newest_first(&mut all, |e| (e.timestamp, e.image_id.as_str()));
    FinalRanking {
        entries: interleave_runs(all, |e| e.label),
    }
}

/// Interleaves an already time-ordered labeled sequence.
pub fn interleave_runs<T>(ordered: Vec<T>, label: impl Fn(&T) -> Label) -> Vec<T> {
    let mut c_runs: Vec<Vec<T>> = Vec::new();
    let mut d_runs: Vec<Vec<T>> = Vec::new();
    let mut prev: Option<Label> = None;
    for item in ordered {
        let l = label(&item);
        let runs = match l {
            Label::Candidate => &mut c_runs,
            Label::Discarded => &mut d_runs,
        };
        if prev != Some(l) {
            runs.push(Vec::new());
        }
        runs.last_mut().expect("run opened").push(item);
        prev = Some(l);
    }
    let mut out = stripe(c_runs);
    out.extend(stripe(d_runs));
    out
}

fn stripe<T>(runs: Vec<Vec<T>>) -> Vec<T> {
    let total = runs.iter().map(Vec::len).sum();
    let mut iters: Vec<_> = runs.into_iter().map(Vec::into_iter).collect();
    let mut out = Vec::with_capacity(total);
    while out.len() < total {
        for it in iters.iter_mut() {
            if let Some(x) = it.next() {
                out.push(x);
            }
        }
    }
    out
}
