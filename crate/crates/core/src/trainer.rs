//! Threshold learning by grid sweep over training days.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::FilterMethod;
use crate::pipeline::{ScoreCache, Strategy};
use crate::rerank::Rerank;

pub const GRID_POINTS: usize = 101;

/// Thresholds `0.00, 0.01, ..., 1.00`.
pub fn threshold_grid() -> Vec<f64> {
    (0..GRID_POINTS).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub method: FilterMethod,
    pub rerank: Rerank,
    pub grid: Vec<f64>,
    pub amrr_at: Vec<f64>,
    pub best_threshold: f64,
    pub best_amrr: f64,
}

impl SweepResult {
    /// `threshold,amrr` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,amrr\n");
        for (t, a) in self.grid.iter().zip(&self.amrr_at) {
            out.push_str(&format!("{t:.2},{a:.9}\n"));
        }
        out
    }
}

/// Index of the first maximum.
pub fn first_argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Evaluates every grid threshold over the cached visual rankings and keeps
/// the smallest threshold reaching the highest AMRR.
pub fn sweep(cache: &ScoreCache, method: FilterMethod, rerank: Rerank) -> Result<SweepResult> {
    if cache.is_empty() {
        return Err(Error::NoTrainingData);
    }
    let grid = threshold_grid();
    let amrr_at = grid
        .par_iter()
        .map(|&t| cache.amrr(Strategy::filtered(method, t, rerank)))
        .collect::<Result<Vec<_>>>()?;
    let best = first_argmax(&amrr_at).expect("grid is non-empty");
    Ok(SweepResult {
        method,
        rerank,
        best_threshold: grid[best],
        best_amrr: amrr_at[best],
        grid,
        amrr_at,
    })
}
