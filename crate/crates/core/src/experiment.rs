//! The full configuration grid: every query mode, target mode, filter and
//! rerank combination, reported as one table per target mode.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::encoder::{QueryMode, TargetMode};
use crate::error::Result;
use crate::filter::{default_nu, default_rho, FilterMethod};
use crate::pipeline::{Dataset, ScoreCache, Strategy};
use crate::rerank::Rerank;
use crate::trainer::sweep;

/// Where per-cell thresholds come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdPolicy {
    /// Fixed values; `None` falls back to the per-query-mode defaults.
    Fixed { nu_th: Option<f64>, rho_th: Option<f64> },
    /// Learned per cell by sweeping the given days.
    Trained { train_days: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOptions {
    pub policy: ThresholdPolicy,
    /// Days to report on; empty means every judged day not used for training.
    pub eval_days: Vec<String>,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        MatrixOptions {
            policy: ThresholdPolicy::Fixed {
                nu_th: None,
                rho_th: None,
            },
            eval_days: Vec::new(),
        }
    }
}

/// Column order of the filtered cells.
pub const CELL_COLUMNS: [(FilterMethod, Rerank); 4] = [
    (FilterMethod::Nndr, Rerank::TimeSort),
    (FilterMethod::Tvss, Rerank::TimeSort),
    (FilterMethod::Nndr, Rerank::Interleave),
    (FilterMethod::Tvss, Rerank::Interleave),
];

fn column_name(method: FilterMethod, rerank: Rerank) -> String {
    match rerank {
        Rerank::TimeSort => method.code().to_string(),
        Rerank::Interleave => format!("{}+I", method.code()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixCell {
    pub column: String,
    pub threshold: f64,
    pub amrr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixRow {
    pub query_mode: String,
    pub visual_ranking: f64,
    pub cells: Vec<MatrixCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixTable {
    pub target_mode: String,
    pub time_sorting: f64,
    pub rows: Vec<MatrixRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixReport {
    pub eval_days: Vec<String>,
    pub train_days: Vec<String>,
    pub tables: Vec<MatrixTable>,
}

impl MatrixReport {
    pub fn cells(&self) -> impl Iterator<Item = &MatrixCell> {
        self.tables
            .iter()
            .flat_map(|t| t.rows.iter().flat_map(|r| r.cells.iter()))
    }

    pub fn baseline(&self) -> f64 {
        self.tables.first().map_or(0.0, |t| t.time_sorting)
    }

    pub fn best_cell(&self) -> Option<&MatrixCell> {
        self.cells().fold(None, |best: Option<&MatrixCell>, c| match best {
            Some(b) if b.amrr >= c.amrr => Some(b),
            _ => Some(c),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned text tables, one per target mode, with a threshold line under
    /// each row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "evaluation days: {}", self.eval_days.join(" ")).unwrap();
        if !self.train_days.is_empty() {
            writeln!(out, "training days:   {}", self.train_days.join(" ")).unwrap();
        }
        let mut header = vec!["f(Q)".to_string(), "Time Sorting".into(), "Visual Ranking".into()];
        header.extend(CELL_COLUMNS.iter().map(|&(m, r)| column_name(m, r)));
        for t in &self.tables {
            let title = t
                .target_mode
                .parse::<TargetMode>()
                .map_or(t.target_mode.as_str(), |m| m.title());
            writeln!(out, "\nA-MRR using {title} for g").unwrap();
            writeln!(
                out,
                "{:<6}{:>14}{:>16}{:>9}{:>9}{:>9}{:>9}",
                header[0], header[1], header[2], header[3], header[4], header[5], header[6]
            )
            .unwrap();
            for row in &t.rows {
                write!(
                    out,
                    "{:<6}{:>14.4}{:>16.4}",
                    row.query_mode, t.time_sorting, row.visual_ranking
                )
                .unwrap();
                for c in &row.cells {
                    write!(out, "{:>9.4}", c.amrr).unwrap();
                }
                out.push('\n');
                write!(out, "{:<6}{:>30}", "", "threshold").unwrap();
                for c in &row.cells {
                    write!(out, "{:>9.2}", c.threshold).unwrap();
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Runs every configuration cell over the dataset.
pub fn run_matrix(ds: &Dataset, opts: &MatrixOptions) -> Result<MatrixReport> {
    let train_days = match &opts.policy {
        ThresholdPolicy::Trained { train_days } => train_days.clone(),
        ThresholdPolicy::Fixed { .. } => Vec::new(),
    };
    let eval_days = if opts.eval_days.is_empty() {
        ds.judged_days()
            .into_iter()
            .filter(|d| !train_days.contains(d))
            .collect()
    } else {
        opts.eval_days.clone()
    };

    let query_vectors = QueryMode::ALL
        .iter()
        .map(|&f| Ok((f, ds.query_vectors(f)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;

    let mut tables = Vec::new();
    for g in TargetMode::ALL {
        let mut rows = Vec::new();
        let mut time_sorting = 0.0;
        for f in QueryMode::ALL {
            let vectors = &query_vectors[&f];
            let eval = ds.score_with(vectors, g, &eval_days)?;
            time_sorting = eval.amrr(Strategy::TimeSorting)?;
            let train = if train_days.is_empty() {
                ScoreCache::default()
            } else {
                ds.score_with(vectors, g, &train_days)?
            };
            let mut cells = Vec::new();
            for (method, rerank) in CELL_COLUMNS {
                let threshold = match &opts.policy {
                    ThresholdPolicy::Fixed { nu_th, rho_th } => match method {
                        FilterMethod::Tvss => nu_th.unwrap_or(default_nu(f)),
                        FilterMethod::Nndr => rho_th.unwrap_or(default_rho(f)),
                    },
                    ThresholdPolicy::Trained { .. } => sweep(&train, method, rerank)?.best_threshold,
                };
                cells.push(MatrixCell {
                    column: column_name(method, rerank),
                    threshold,
                    amrr: eval.amrr(Strategy::filtered(method, threshold, rerank))?,
                });
            }
            rows.push(MatrixRow {
                query_mode: f.code().to_string(),
                visual_ranking: eval.amrr(Strategy::Visual)?,
                cells,
            });
        }
        tables.push(MatrixTable {
            target_mode: g.code().to_string(),
            time_sorting,
            rows,
        });
    }
    Ok(MatrixReport {
        eval_days,
        train_days,
        tables,
    })
}
