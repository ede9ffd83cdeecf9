//! Candidate selection: split a visual ranking into candidates `C` and
//! discarded images `D` with an absolute (TVSS) or ratio (NNDR) threshold.

use std::fmt;
use std::str::FromStr;

use crate::encoder::QueryMode;
use crate::error::{Error, Result};
use crate::ranker::{Scored, ScoredRanking};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterMethod {
    Nndr,
    Tvss,
}

impl FilterMethod {
    pub const ALL: [FilterMethod; 2] = [FilterMethod::Nndr, FilterMethod::Tvss];

    pub fn code(self) -> &'static str {
        match self {
            FilterMethod::Nndr => "NNDR",
            FilterMethod::Tvss => "TVSS",
        }
    }
}

impl fmt::Display for FilterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for FilterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NNDR" => Ok(FilterMethod::Nndr),
            "TVSS" => Ok(FilterMethod::Tvss),
            _ => Err(Error::invalid(format!("unknown filter `{s}` (TVSS, NNDR)"))),
        }
    }
}

/// Thresholds learned on the reference lifelog corpus, per query mode.
pub fn default_rho(mode: QueryMode) -> f64 {
    match mode {
        QueryMode::FullImage => 0.27,
        QueryMode::HardBbox => 0.11,
        QueryMode::SoftBbox => 0.13,
    }
}

pub fn default_nu(mode: QueryMode) -> f64 {
    match mode {
        QueryMode::FullImage => 0.05,
        QueryMode::HardBbox => 0.02,
        QueryMode::SoftBbox => 0.04,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub method: FilterMethod,
    pub nu_th: f64,
    pub rho_th: f64,
}

impl FilterConfig {
    pub fn new(method: FilterMethod, nu_th: f64, rho_th: f64) -> Result<Self> {
        for (name, v) in [("nu_th", nu_th), ("rho_th", rho_th)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name}={v} outside [0, 1]")));
            }
        }
        Ok(FilterConfig { method, nu_th, rho_th })
    }

    pub fn defaults_for(method: FilterMethod, mode: QueryMode) -> Self {
        FilterConfig {
            method,
            nu_th: default_nu(mode),
            rho_th: default_rho(mode),
        }
    }

    /// The threshold the configured method reads.
    pub fn threshold(&self) -> f64 {
        match self.method {
            FilterMethod::Tvss => self.nu_th,
            FilterMethod::Nndr => self.rho_th,
        }
    }

    pub fn apply(&self, r: &ScoredRanking) -> CandidatePartition {
        partition(r, self.method, self.threshold())
    }
}

/// `C` and `D` in visual-ranking order. Together they hold every image of the
/// day exactly once.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidatePartition {
    pub candidates: Vec<Scored>,
    pub discarded: Vec<Scored>,
    /// Set when NNDR had fewer than two images and fell back to TVSS at 0.
    pub fallback: bool,
}

impl CandidatePartition {
    pub fn split(r: &ScoredRanking, keep: impl Fn(f64) -> bool) -> Self {
        let (candidates, discarded) = r.entries.iter().cloned().partition(|s| keep(s.score));
        CandidatePartition {
            candidates,
            discarded,
            fallback: false,
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len() + self.discarded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_candidate(&self, image_id: &str) -> bool {
        self.candidates.iter().any(|s| s.image_id == image_id)
    }
}

pub fn partition(r: &ScoredRanking, method: FilterMethod, threshold: f64) -> CandidatePartition {
    match method {
        FilterMethod::Tvss => tvss(r, threshold),
        FilterMethod::Nndr => nndr(r, threshold),
    }
}

/// `C = { p : score(p) > nu_th }`.
pub fn tvss(r: &ScoredRanking, nu_th: f64) -> CandidatePartition {
    CandidatePartition::split(r, |s| s > nu_th)
}

/// `C = { i : score(i) > rho_th * score_2 }`, the ratio test against the two
/// best scores multiplied through by the best score.
///
/// Days with fewer than two images fall back to TVSS at 0. A best score of
/// zero leaves `C` empty.
pub fn nndr(r: &ScoredRanking, rho_th: f64) -> CandidatePartition {
    if r.len() < 2 {
        let mut p = tvss(r, 0.0);
        p.fallback = true;
        return p;
    }
    let (best, second) = top_two(r);
    if best <= 0.0 {
        return CandidatePartition::split(r, |_| false);
    }
    let cut = rho_th * second;
    CandidatePartition::split(r, |s| s > cut)
}

fn top_two(r: &ScoredRanking) -> (f64, f64) {
    r.entries
        .iter()
        .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(a, b), s| {
            if s.score > a {
                (s.score, a)
            } else if s.score > b {
                (a, s.score)
            } else {
                (a, b)
            }
        })
}
