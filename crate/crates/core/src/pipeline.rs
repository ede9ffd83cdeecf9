//! End-to-end retrieval over a loaded dataset: encode target days, build
//! query vectors, score, filter, rerank and evaluate.
//!
//! Visual scores are computed once per `(day, query)` into a [`ScoreCache`];
//! filtering and reranking are cheap and run on top of the cache for any
//! number of thresholds.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;

use crate::codebook::{assign, AssignmentMap, Codebook};
use crate::corpus::{self, Corpus, DayPartition, QuerySet, RelevanceJudgments};
use crate::encoder::{encode, encode_query, target_mask, BowVector, QueryMode, SaliencyMap, TargetMode};
use crate::error::{Error, Result};
use crate::eval::{baseline_ranking, first_relevant_rank, rr_of, EvalReport, QueryOutcome};
use crate::filter::{partition, CandidatePartition, FilterMethod};
use crate::format::{self, MapKind};
use crate::ranker::{build_index, score_all, IndexEntry, InvertedIndex, ScoredRanking};
use crate::rerank::{FinalRanking, Rerank};

/// Corpus, queries and judgments with every image quantized.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub corpus: Corpus,
    pub queries: Vec<QuerySet>,
    pub judgments: Vec<RelevanceJudgments>,
    k: usize,
    maps: HashMap<String, AssignmentMap>,
    saliency: HashMap<String, SaliencyMap>,
    /// Drop query exemplars from the target days they belong to.
    pub exclude_query_images: bool,
}

impl Dataset {
    pub fn new(
        corpus: Corpus,
        queries: Vec<QuerySet>,
        judgments: Vec<RelevanceJudgments>,
        k: usize,
        maps: HashMap<String, AssignmentMap>,
        saliency: HashMap<String, SaliencyMap>,
    ) -> Result<Self> {
        for rec in corpus.images() {
            let am = maps
                .get(&rec.image_id)
                .ok_or_else(|| Error::UnknownImage(rec.image_id.clone()))?;
            if am.max_word() as usize >= k {
                return Err(Error::DimensionMismatch(format!(
                    "`{}` uses word {} but the codebook has {k}",
                    rec.image_id,
                    am.max_word()
                )));
            }
        }
        Ok(Dataset {
            corpus,
            queries,
            judgments,
            k,
            maps,
            saliency,
            exclude_query_images: false,
        })
    }

    /// Loads manifest, queries and judgments from disk and quantizes every
    /// feature map with `codebook`. Assignment-map references are read as is.
    pub fn load(manifest: &Path, queries: &Path, judgments: &Path, codebook: &Codebook) -> Result<Self> {
        Dataset::load_parts(manifest, Some(queries), Some(judgments), codebook)
    }

    /// Like [`Dataset::load`], with queries and judgments optional.
    pub fn load_parts(
        manifest: &Path,
        queries: Option<&Path>,
        judgments: Option<&Path>,
        codebook: &Codebook,
    ) -> Result<Self> {
        let corpus = Corpus::load(manifest)?;
        let queries = match queries {
            Some(p) => corpus::load_queries(p, &corpus)?,
            None => Vec::new(),
        };
        let judgments = match judgments {
            Some(p) => corpus::load_judgments(p, &corpus)?,
            None => Vec::new(),
        };
        let (maps, saliency) = load_maps(&corpus, codebook)?;
        Dataset::new(corpus, queries, judgments, codebook.len(), maps, saliency)
    }

    pub fn words(&self) -> usize {
        self.k
    }

    pub fn map(&self, image_id: &str) -> Option<&AssignmentMap> {
        self.maps.get(image_id)
    }

    pub fn query_set(&self, category: &str) -> Option<&QuerySet> {
        self.queries.iter().find(|q| q.category == category)
    }

    /// Days that carry at least one judgment, sorted.
    pub fn judged_days(&self) -> Vec<String> {
        self.judgments
            .iter()
            .map(|j| j.day_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    fn query_image_ids(&self) -> HashSet<&str> {
        self.queries
            .iter()
            .flat_map(|q| q.items.iter().map(|i| i.image_id.as_str()))
            .collect()
    }

    /// Target images of a day after the optional query-exemplar exclusion.
    pub fn target_day(&self, day_id: &str) -> Result<DayPartition> {
        let day = self
            .corpus
            .day(day_id)
            .ok_or_else(|| Error::invalid(format!("unknown day `{day_id}`")))?;
        if !self.exclude_query_images {
            return Ok(day.clone());
        }
        let excluded = self.query_image_ids();
        Ok(DayPartition::new(
            day_id,
            day.images
                .iter()
                .filter(|r| !excluded.contains(r.image_id.as_str()))
                .cloned()
                .collect(),
        ))
    }

    pub fn encode_image(&self, image_id: &str, mode: TargetMode) -> Result<BowVector> {
        let am = self
            .maps
            .get(image_id)
            .ok_or_else(|| Error::UnknownImage(image_id.to_string()))?;
        let mask = target_mask(mode, am.rows(), am.cols(), self.saliency.get(image_id), image_id)?;
        encode(am, &mask, self.k)
    }

    pub fn encode_day(&self, day_id: &str, mode: TargetMode) -> Result<Vec<IndexEntry>> {
        self.target_day(day_id)?
            .images
            .par_iter()
            .map(|rec| {
                Ok(IndexEntry {
                    image_id: rec.image_id.clone(),
                    timestamp: rec.timestamp,
                    vector: self.encode_image(&rec.image_id, mode)?,
                })
            })
            .collect()
    }

    pub fn index_day(&self, day_id: &str, mode: TargetMode) -> Result<InvertedIndex> {
        build_index(self.k, self.encode_day(day_id, mode)?)
    }

    pub fn query_vector(&self, qs: &QuerySet, mode: QueryMode) -> Result<BowVector> {
        let maps = qs
            .items
            .iter()
            .map(|item| {
                self.maps
                    .get(&item.image_id)
                    .cloned()
                    .ok_or_else(|| Error::UnknownImage(item.image_id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        encode_query(qs, &maps, mode, self.k)
    }

    pub fn query_vectors(&self, mode: QueryMode) -> Result<BTreeMap<String, BowVector>> {
        self.queries
            .iter()
            .map(|qs| Ok((qs.category.clone(), self.query_vector(qs, mode)?)))
            .collect()
    }

    /// Scores every judged `(day, category)` pair among `days`.
    pub fn score_cache(&self, query: QueryMode, target: TargetMode, days: &[String]) -> Result<ScoreCache> {
        let vectors = self.query_vectors(query)?;
        self.score_with(&vectors, target, days)
    }

    pub fn score_with(
        &self,
        vectors: &BTreeMap<String, BowVector>,
        target: TargetMode,
        days: &[String],
    ) -> Result<ScoreCache> {
        let days = days
            .par_iter()
            .map(|day_id| {
                let index = self.index_day(day_id, target)?;
                let day = self.target_day(day_id)?;
                let queries = self
                    .judgments
                    .iter()
                    .filter(|j| &j.day_id == day_id)
                    .map(|j| {
                        let q = vectors
                            .get(&j.category)
                            .ok_or_else(|| Error::invalid(format!("no query set for category `{}`", j.category)))?;
                        Ok(CachedQuery {
                            category: j.category.clone(),
                            visual: score_all(&index, q)?,
                            relevant: j.relevant_ids.iter().cloned().collect(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(DayScores { day, queries })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoreCache { days })
    }
}

fn load_maps(
    corpus: &Corpus,
    codebook: &Codebook,
) -> Result<(HashMap<String, AssignmentMap>, HashMap<String, SaliencyMap>)> {
    let records: Vec<_> = corpus.images().collect();
    let loaded = records
        .par_iter()
        .map(|rec| {
            let path = corpus.resolve(&rec.feature_ref);
            let am = match format::sniff_map_kind(&path)? {
                MapKind::Features => assign(&format::read_feature_map(&path)?, codebook)?,
                MapKind::Assignments => format::read_assignment_map(&path)?,
            };
            let sal = rec
                .saliency_ref
                .as_ref()
                .map(|s| format::read_saliency_map(corpus.resolve(s)))
                .transpose()?;
            Ok((rec.image_id.clone(), am, sal))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut maps = HashMap::with_capacity(loaded.len());
    let mut saliency = HashMap::new();
    for (id, am, sal) in loaded {
        if let Some(s) = sal {
            saliency.insert(id.clone(), s);
        }
        maps.insert(id, am);
    }
    Ok((maps, saliency))
}

#[derive(Debug, Clone)]
pub struct CachedQuery {
    pub category: String,
    pub visual: ScoredRanking,
    pub relevant: HashSet<String>,
}

#[derive(Debug, Clone)]
pub struct DayScores {
    pub day: DayPartition,
    pub queries: Vec<CachedQuery>,
}

/// Visual rankings of every judged query, grouped by day.
#[derive(Debug, Clone, Default)]
pub struct ScoreCache {
    pub days: Vec<DayScores>,
}

/// How a day's final list is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Newest first, ignoring the query.
    TimeSorting,
    /// The visual ranking as is.
    Visual,
    Filtered {
        method: FilterMethod,
        threshold: f64,
        rerank: Rerank,
    },
}

impl Strategy {
    pub fn filtered(method: FilterMethod, threshold: f64, rerank: Rerank) -> Self {
        Strategy::Filtered {
            method,
            threshold,
            rerank,
        }
    }
}

/// Candidate partition and final list for one visual ranking.
pub fn rerank_visual(
    visual: &ScoredRanking,
    method: FilterMethod,
    threshold: f64,
    rerank: Rerank,
) -> (CandidatePartition, FinalRanking) {
    let p = partition(visual, method, threshold);
    let r = rerank.apply(&p);
    (p, r)
}

impl ScoreCache {
    pub fn is_empty(&self) -> bool {
        self.days.iter().all(|d| d.queries.is_empty())
    }

    pub fn restrict(&self, day_ids: &[String]) -> ScoreCache {
        ScoreCache {
            days: self
                .days
                .iter()
                .filter(|d| day_ids.contains(&d.day.day_id))
                .cloned()
                .collect(),
        }
    }

    fn first_rank(day: &DayPartition, q: &CachedQuery, strategy: Strategy) -> Option<usize> {
        let relevant: HashSet<&str> = q.relevant.iter().map(String::as_str).collect();
        match strategy {
            Strategy::TimeSorting => first_relevant_rank(baseline_ranking(day).ids(), &relevant),
            Strategy::Visual => first_relevant_rank(q.visual.ids(), &relevant),
            Strategy::Filtered {
                method,
                threshold,
                rerank,
            } => {
                let (_, r) = rerank_visual(&q.visual, method, threshold, rerank);
                first_relevant_rank(r.ids(), &relevant)
            }
        }
    }

    pub fn evaluate(&self, strategy: Strategy) -> Result<EvalReport> {
        let outcomes = self
            .days
            .iter()
            .map(|d| {
                let queries = d
                    .queries
                    .iter()
                    .map(|q| {
                        let rank = Self::first_rank(&d.day, q, strategy);
                        QueryOutcome {
                            category: q.category.clone(),
                            first_relevant_rank: rank,
                            reciprocal_rank: rr_of(rank),
                        }
                    })
                    .collect();
                (d.day.day_id.clone(), queries)
            })
            .collect();
        EvalReport::from_outcomes(outcomes)
    }

    pub fn amrr(&self, strategy: Strategy) -> Result<f64> {
        self.evaluate(strategy).map(|r| r.amrr)
    }
}
