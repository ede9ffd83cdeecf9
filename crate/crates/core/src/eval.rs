//! Reciprocal rank, per-day MRR and the average over days (AMRR).

use std::collections::HashSet;

use serde::Serialize;

use crate::corpus::DayPartition;
use crate::error::{Error, Result};
use crate::rerank::{newest_first, FinalRanking, Label, RankedImage};

/// 1-based position of the first relevant image, if any.
pub fn first_relevant_rank<'a>(ids: impl IntoIterator<Item = &'a str>, relevant: &HashSet<&str>) -> Option<usize> {
    ids.into_iter().position(|id| relevant.contains(id)).map(|p| p + 1)
}

/// `1/q*` for the first relevant image, or 0 when none appears.
pub fn reciprocal_rank(ranking: &FinalRanking, relevant: &HashSet<&str>) -> f64 {
    rr_of(first_relevant_rank(ranking.ids(), relevant))
}

pub fn rr_of(rank: Option<usize>) -> f64 {
    rank.map_or(0.0, |q| 1.0 / q as f64)
}

fn mean(values: &[f64], what: &str) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid(format!("cannot average an empty list of {what}")));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn mrr_day(rrs: &[f64]) -> Result<f64> {
    mean(rrs, "reciprocal ranks")
}

pub fn amrr(mrrs: &[f64]) -> Result<f64> {
    mean(mrrs, "day MRRs")
}

/// The whole day newest first, every image labeled `D`.
pub fn baseline_ranking(day: &DayPartition) -> FinalRanking {
    let mut entries: Vec<RankedImage> = day
        .images
        .iter()
        .map(|r| RankedImage {
            image_id: r.image_id.clone(),
            timestamp: r.timestamp,
            label: Label::Discarded,
        })
        .collect();
    newest_first(&mut entries, |e| (e.timestamp, e.image_id.as_str()));
    FinalRanking { entries }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryOutcome {
    pub category: String,
    pub first_relevant_rank: Option<usize>,
    pub reciprocal_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayOutcome {
    pub day_id: String,
    pub queries: Vec<QueryOutcome>,
    pub mrr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub days: Vec<DayOutcome>,
    pub amrr: f64,
}

impl EvalReport {
    /// Builds the report from per-day query outcomes. Days without queries
    /// are dropped.
    pub fn from_outcomes(days: Vec<(String, Vec<QueryOutcome>)>) -> Result<Self> {
        let mut out = Vec::new();
        for (day_id, queries) in days {
            if queries.is_empty() {
                continue;
            }
            let rrs: Vec<f64> = queries.iter().map(|q| q.reciprocal_rank).collect();
            out.push(DayOutcome {
                mrr: mrr_day(&rrs)?,
                day_id,
                queries,
            });
        }
        let mrrs: Vec<f64> = out.iter().map(|d| d.mrr).collect();
        Ok(EvalReport {
            amrr: amrr(&mrrs)?,
            days: out,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:<12} {:<20} {:>6} {:>8}\n", "day", "category", "rank", "rr");
        for d in &self.days {
            for q in &d.queries {
                let rank = q.first_relevant_rank.map_or("-".to_string(), |r| r.to_string());
                out.push_str(&format!(
                    "{:<12} {:<20} {:>6} {:>8.4}\n",
                    d.day_id, q.category, rank, q.reciprocal_rank
                ));
            }
            out.push_str(&format!("{:<12} {:<20} {:>6} {:>8.4}\n", d.day_id, "MRR", "", d.mrr));
        }
        out.push_str(&format!("{:<12} {:<20} {:>6} {:>8.4}\n", "all", "AMRR", "", self.amrr));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ImageRecord;
    use crate::filter::CandidatePartition;
    use crate::ranker::Scored;
    use crate::rerank::time_sort;
    use approx::assert_abs_diff_eq;

    fn ranking(ids: &[&str]) -> FinalRanking {
        FinalRanking {
            entries: ids
                .iter()
                .map(|id| RankedImage {
                    image_id: id.to_string(),
                    timestamp: 1,
                    label: Label::Discarded,
                })
                .collect(),
        }
    }

    #[test]
    fn reciprocal_rank_examples() {
        let r = ranking(&["a", "b", "c", "d"]);
        assert_eq!(reciprocal_rank(&r, &HashSet::from(["a"])), 1.0);
        assert_eq!(reciprocal_rank(&r, &HashSet::from(["d", "zz"])), 0.25);
        assert_eq!(reciprocal_rank(&r, &HashSet::new()), 0.0);
    }

    #[test]
    fn means() {
        let rrs: Vec<f64> = [1usize, 2, 4].iter().map(|&q| rr_of(Some(q))).collect();
        assert_abs_diff_eq!(mrr_day(&rrs).unwrap(), 0.583_333_333_333, epsilon = 1e-9);
        assert_eq!(amrr(&[0.42]).unwrap(), 0.42);
        assert_abs_diff_eq!(amrr(&[0.5, 0.25]).unwrap(), 0.375, epsilon = 1e-9);
        assert!(mrr_day(&[]).is_err());
        assert!(amrr(&[]).is_err());
    }

    fn day(stamps: &[(&str, i64)]) -> DayPartition {
        DayPartition::new(
            "d",
            stamps
                .iter()
                .map(|&(id, ts)| ImageRecord {
                    image_id: id.into(),
                    day_id: "d".into(),
                    timestamp: ts,
                    feature_ref: String::new(),
                    saliency_ref: None,
                })
                .collect(),
        )
    }

    #[test]
    fn baseline_orders_newest_first() {
        let d = day(&[("a", 10), ("b", 20), ("c", 30)]);
        assert_eq!(baseline_ranking(&d).ids().collect::<Vec<_>>(), ["c", "b", "a"]);
        let ties = day(&[("z", 5), ("a", 5), ("m", 5)]);
        assert_eq!(baseline_ranking(&ties).ids().collect::<Vec<_>>(), ["a", "m", "z"]);
    }

    #[test]
    fn baseline_equals_time_sort_without_candidates() {
        let d = day(&[("a", 10), ("b", 20), ("c", 20), ("e", 3)]);
        let p = CandidatePartition {
            candidates: vec![],
            discarded: d
                .images
                .iter()
                .map(|r| Scored {
                    image_id: r.image_id.clone(),
                    timestamp: r.timestamp,
                    score: 0.1,
                })
                .collect(),
            fallback: false,
        };
        assert_eq!(time_sort(&p), baseline_ranking(&d));
    }

    #[test]
    fn report_aggregates_days() {
        let q = |rank: Option<usize>| QueryOutcome {
            category: "x".into(),
            first_relevant_rank: rank,
            reciprocal_rank: rr_of(rank),
        };
        let report = EvalReport::from_outcomes(vec![
            ("d1".into(), vec![q(Some(2))]),
            ("d2".into(), vec![q(Some(4)), q(None)]),
            ("d3".into(), vec![]),
        ])
        .unwrap();
        assert_eq!(report.days.len(), 2);
        assert_abs_diff_eq!(report.days[1].mrr, 0.125);
        assert_abs_diff_eq!(report.amrr, (0.5 + 0.125) / 2.0);
        assert!(report.to_text().contains("AMRR"));
    }
}
