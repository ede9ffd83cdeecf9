//! Spatial weight masks and weighted bag-of-visual-words encoding.
//!
//! Query images are weighted by the whole frame (`FI`), a hard bounding box
//! (`HBB`) or a soft falloff around the box (`SBB`). Target images are weighted
//! by the whole frame (`FI`), a center bias (`CB`) or a pooled saliency map
//! (`SM`). Every mask is L2-normalized before it scales word frequencies.

use std::fmt;
use std::str::FromStr;

use crate::codebook::AssignmentMap;
use crate::corpus::{BBox, QuerySet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryMode {
    FullImage,
    HardBbox,
    SoftBbox,
}

impl QueryMode {
    pub const ALL: [QueryMode; 3] = [QueryMode::FullImage, QueryMode::HardBbox, QueryMode::SoftBbox];

    pub fn needs_bbox(self) -> bool {
        self != QueryMode::FullImage
    }

    pub fn code(self) -> &'static str {
        match self {
            QueryMode::FullImage => "FI",
            QueryMode::HardBbox => "HBB",
            QueryMode::SoftBbox => "SBB",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TargetMode {
    FullImage,
    CenterBias,
    Saliency,
}

impl TargetMode {
    pub const ALL: [TargetMode; 3] = [TargetMode::FullImage, TargetMode::CenterBias, TargetMode::Saliency];

    pub fn code(self) -> &'static str {
        match self {
            TargetMode::FullImage => "FI",
            TargetMode::CenterBias => "CB",
            TargetMode::Saliency => "SM",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            TargetMode::FullImage => "Full Image",
            TargetMode::CenterBias => "Center Bias",
            TargetMode::Saliency => "Saliency Maps",
        }
    }
}

impl fmt::Display for QueryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl fmt::Display for TargetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for QueryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FI" => Ok(QueryMode::FullImage),
            "HBB" => Ok(QueryMode::HardBbox),
            "SBB" => Ok(QueryMode::SoftBbox),
            _ => Err(Error::invalid(format!("unknown query mode `{s}` (FI, HBB, SBB)"))),
        }
    }
}

impl FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FI" => Ok(TargetMode::FullImage),
            "CB" => Ok(TargetMode::CenterBias),
            "SM" => Ok(TargetMode::Saliency),
            _ => Err(Error::invalid(format!("unknown target mode `{s}` (FI, CB, SM)"))),
        }
    }
}

/// Scales `values` to unit L2 norm. Dividing by the maximum first keeps
/// constant inputs exact, so every uniform mask is bit-identical.
fn l2_normalize(values: &mut [f64]) -> bool {
    let max = values.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return false;
    }
    values.iter_mut().for_each(|v| *v /= max);
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    values.iter_mut().for_each(|v| *v /= norm);
    true
}

/// Non-negative per-cell weights with unit L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMask {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl WeightMask {
    /// Normalizes raw non-negative weights. An all-zero mask is rejected.
    pub fn from_raw(rows: usize, cols: usize, mut weights: Vec<f64>) -> Result<Self> {
        check_dims(rows, cols)?;
        if weights.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {rows}x{cols} grid",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("mask weights must be finite and non-negative"));
        }
        if !l2_normalize(&mut weights) {
            return Err(Error::invalid("mask is all zero"));
        }
        Ok(WeightMask { rows, cols, weights })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        Err(Error::invalid("grid dimensions must be positive"))
    } else {
        Ok(())
    }
}

fn grid_raw(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| f(r, c))
        .collect()
}

/// Uniform weights `1/sqrt(H*W)`.
pub fn mask_full(rows: usize, cols: usize) -> Result<WeightMask> {
    check_dims(rows, cols)?;
    WeightMask::from_raw(rows, cols, vec![1.0; rows * cols])
}

/// Weight 1 inside the box, 0 outside.
pub fn mask_hard_bbox(rows: usize, cols: usize, bbox: BBox) -> Result<WeightMask> {
    check_dims(rows, cols)?;
    bbox.validate(rows, cols)?;
    let raw = grid_raw(rows, cols, |r, c| if bbox.contains(r, c) { 1.0 } else { 0.0 });
    WeightMask::from_raw(rows, cols, raw)
}

/// Raw weights of the soft-box mask before normalization: 1 inside the box,
/// `1/(1+d)` outside, with `d` the Euclidean distance from the cell center
/// to the box rectangle in cell units.
pub fn soft_bbox_raw(rows: usize, cols: usize, bbox: BBox) -> Vec<f64> {
    let gap = |x: usize, lo: usize, hi: usize| {
        if x < lo {
            (lo - x) as f64
        } else if x > hi {
            (x - hi) as f64
        } else {
            0.0
        }
    };
    grid_raw(rows, cols, |r, c| {
        if bbox.contains(r, c) {
            1.0
        } else {
            let d = gap(r, bbox.r0, bbox.r1).hypot(gap(c, bbox.c0, bbox.c1));
            1.0 / (1.0 + d)
        }
    })
}

pub fn mask_soft_bbox(rows: usize, cols: usize, bbox: BBox) -> Result<WeightMask> {
    check_dims(rows, cols)?;
    bbox.validate(rows, cols)?;
    WeightMask::from_raw(rows, cols, soft_bbox_raw(rows, cols, bbox))
}

/// Raw center-bias weights `1/(1+d)`, `d` the distance from the cell center to
/// the grid center `((H-1)/2, (W-1)/2)`.
pub fn center_bias_raw(rows: usize, cols: usize) -> Vec<f64> {
    let cr = (rows as f64 - 1.0) / 2.0;
    let cc = (cols as f64 - 1.0) / 2.0;
    grid_raw(rows, cols, |r, c| 1.0 / (1.0 + (r as f64 - cr).hypot(c as f64 - cc)))
}

pub fn mask_center_bias(rows: usize, cols: usize) -> Result<WeightMask> {
    check_dims(rows, cols)?;
    WeightMask::from_raw(rows, cols, center_bias_raw(rows, cols))
}

/// Per-location attention probabilities on the saliency model's native grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl SaliencyMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        check_dims(rows, cols)?;
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} saliency values for {rows}x{cols} grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("saliency values must lie in [0, 1]"));
        }
        Ok(SaliencyMap { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Splits `n` source lines into `parts` contiguous bands whose sizes differ by
/// at most one; the leading bands take the remainder. Returns band start
/// offsets plus a final end sentinel.
fn band_edges(n: usize, parts: usize) -> Vec<usize> {
    let base = n / parts;
    let extra = n - parts * base;
    let mut edges = Vec::with_capacity(parts + 1);
    let mut at = 0;
    edges.push(at);
    for i in 0..parts {
        at += base + usize::from(i < extra);
        edges.push(at);
    }
    edges
}

/// Average-pools a saliency map down to the `rows x cols` assignment grid.
pub fn pool_saliency(s: &SaliencyMap, rows: usize, cols: usize) -> Result<Vec<f64>> {
    check_dims(rows, cols)?;
    if s.rows < rows || s.cols < cols {
        return Err(Error::DimensionMismatch(format!(
            "saliency {}x{} is smaller than target grid {rows}x{cols}",
            s.rows, s.cols
        )));
    }
    let re = band_edges(s.rows, rows);
    let ce = band_edges(s.cols, cols);
    Ok(grid_raw(rows, cols, |r, c| {
        let mut sum = 0.0;
        for sr in re[r]..re[r + 1] {
            for sc in ce[c]..ce[c + 1] {
                sum += s.values[sr * s.cols + sc] as f64;
            }
        }
        sum / ((re[r + 1] - re[r]) * (ce[c + 1] - ce[c])) as f64
    }))
}

pub fn downsample_saliency(s: &SaliencyMap, rows: usize, cols: usize) -> Result<WeightMask> {
    WeightMask::from_raw(rows, cols, pool_saliency(s, rows, cols)?)
}

/// Sparse histogram over `K` visual words. Entries are sorted by word id and
/// strictly positive; the vector has unit L2 norm unless it is empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BowVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl BowVector {
    pub fn empty(dim: usize) -> Self {
        BowVector {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds a normalized vector from raw `(word, weight)` pairs. Repeated
    /// words are summed and zero weights dropped.
    pub fn from_weights(dim: usize, mut raw: Vec<(u32, f64)>) -> Result<Self> {
        if let Some(&(w, _)) = raw.iter().find(|(w, _)| *w as usize >= dim) {
            return Err(Error::DimensionMismatch(format!("word {w} outside codebook of {dim}")));
        }
        if raw.iter().any(|(_, v)| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("histogram weights must be finite and non-negative"));
        }
        raw.sort_by_key(|&(w, _)| w);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(raw.len());
        for (w, v) in raw {
            match entries.last_mut() {
                Some((lw, lv)) if *lw == w => *lv += v,
                _ => entries.push((w, v)),
            }
        }
        entries.retain(|&(_, v)| v > 0.0);
        let mut values: Vec<f64> = entries.iter().map(|&(_, v)| v).collect();
        l2_normalize(&mut values);
        for (e, v) in entries.iter_mut().zip(values) {
            e.1 = v;
        }
        Ok(BowVector { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: u32) -> f64 {
        self.entries
            .binary_search_by_key(&word, |&(w, _)| w)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &BowVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, b) = (self.entries[i], other.entries[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a.1 * b.1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Unnormalized weighted word frequencies: the mask mass landing on each word.
pub fn weighted_histogram(am: &AssignmentMap, mask: &WeightMask, k: usize) -> Result<Vec<(u32, f64)>> {
    if am.rows() != mask.rows() || am.cols() != mask.cols() {
        return Err(Error::DimensionMismatch(format!(
            "assignment map {}x{} vs mask {}x{}",
            am.rows(),
            am.cols(),
            mask.rows(),
            mask.cols()
        )));
    }
    if let Some(&w) = am.words().iter().find(|&&w| w as usize >= k) {
        return Err(Error::DimensionMismatch(format!("word {w} outside codebook of {k}")));
    }
    let mut pairs: Vec<(u32, f64)> = am
        .words()
        .iter()
        .zip(mask.weights())
        .filter(|(_, &m)| m > 0.0)
        .map(|(&w, &m)| (w, m))
        .collect();
    pairs.sort_by_key(|&(w, _)| w);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
    for (w, m) in pairs {
        match merged.last_mut() {
            Some((lw, lm)) if *lw == w => *lm += m,
            _ => merged.push((w, m)),
        }
    }
    Ok(merged)
}

/// Encodes one assignment map under a mask into a unit-norm BoW vector.
pub fn encode(am: &AssignmentMap, mask: &WeightMask, k: usize) -> Result<BowVector> {
    BowVector::from_weights(k, weighted_histogram(am, mask, k)?)
}

pub fn query_mask(mode: QueryMode, rows: usize, cols: usize, bbox: Option<BBox>, image_id: &str) -> Result<WeightMask> {
    match (mode, bbox) {
        (QueryMode::FullImage, _) => mask_full(rows, cols),
        (QueryMode::HardBbox, Some(b)) => mask_hard_bbox(rows, cols, b),
        (QueryMode::SoftBbox, Some(b)) => mask_soft_bbox(rows, cols, b),
        (_, None) => Err(Error::MissingBbox(image_id.to_string())),
    }
}

pub fn target_mask(
    mode: TargetMode,
    rows: usize,
    cols: usize,
    saliency: Option<&SaliencyMap>,
    image_id: &str,
) -> Result<WeightMask> {
    match mode {
        TargetMode::FullImage => mask_full(rows, cols),
        TargetMode::CenterBias => mask_center_bias(rows, cols),
        TargetMode::Saliency => {
            let s = saliency.ok_or_else(|| Error::MissingSaliency(image_id.to_string()))?;
            downsample_saliency(s, rows, cols)
        }
    }
}

/// Aggregates all exemplars of a query set into one vector: per-item masked
/// histograms are summed and the sum is normalized once.
pub fn encode_query(qs: &QuerySet, maps: &[AssignmentMap], mode: QueryMode, k: usize) -> Result<BowVector> {
    if maps.len() != qs.items.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} assignment maps for {} query items",
            maps.len(),
            qs.items.len()
        )));
    }
    let mut raw = Vec::new();
    for (item, am) in qs.items.iter().zip(maps) {
        let mask = query_mask(mode, am.rows(), am.cols(), item.bbox, &item.image_id)?;
        raw.extend(weighted_histogram(am, &mask, k)?);
    }
    BowVector::from_weights(k, raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::QueryItem;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn am(rows: usize, cols: usize, words: &[u32]) -> AssignmentMap {
        AssignmentMap::new(rows, cols, words.to_vec()).unwrap()
    }

    #[test]
    fn full_masks() {
        assert_eq!(mask_full(1, 1).unwrap().weights(), &[1.0]);
        assert!(mask_full(2, 2).unwrap().weights().iter().all(|&w| w == 0.5));
        let big = mask_full(32, 42).unwrap();
        for &w in big.weights() {
            assert_relative_eq!(w, 1.0 / 1344f64.sqrt(), max_relative = 1e-15);
        }
        assert!(mask_full(0, 3).is_err());
    }

    #[test]
    fn hard_bbox_masks() {
        assert_eq!(
            mask_hard_bbox(4, 5, BBox::full(4, 5)).unwrap(),
            mask_full(4, 5).unwrap()
        );
        assert_eq!(
            mask_hard_bbox(2, 2, BBox::new(0, 0, 0, 0)).unwrap().weights(),
            &[1.0, 0.0, 0.0, 0.0]
        );
        let left = mask_hard_bbox(2, 3, BBox::new(0, 0, 1, 0)).unwrap();
        let s = 1.0 / 2f64.sqrt();
        for (got, want) in left.weights().iter().zip([s, 0.0, 0.0, s, 0.0, 0.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        assert!(mask_hard_bbox(2, 2, BBox::new(0, 0, 2, 0)).is_err());
    }

    #[test]
    fn soft_bbox_masks() {
        assert_eq!(
            mask_soft_bbox(3, 7, BBox::full(3, 7)).unwrap(),
            mask_full(3, 7).unwrap()
        );
        let m = mask_soft_bbox(1, 3, BBox::new(0, 0, 0, 0)).unwrap();
        let n = (1.0f64 + 0.25 + 1.0 / 9.0).sqrt();
        for (got, want) in m.weights().iter().zip([1.0 / n, 0.5 / n, 1.0 / 3.0 / n]) {
            assert_relative_eq!(*got, want, max_relative = 1e-14);
        }
        // diagonal neighbor sits sqrt(2) away from the box corner
        let raw = soft_bbox_raw(3, 3, BBox::new(1, 1, 1, 1));
        assert_relative_eq!(raw[0], 1.0 / (1.0 + 2f64.sqrt()));
        assert_eq!(raw[1], 0.5);
    }

    #[test]
    fn center_bias_raw_weights() {
        assert_eq!(mask_center_bias(1, 1).unwrap().weights(), &[1.0]);
        let raw = center_bias_raw(3, 3);
        let corner = 1.0 / (1.0 + 2f64.sqrt());
        let want = [corner, 0.5, corner, 0.5, 1.0, 0.5, corner, 0.5, corner];
        for (got, w) in raw.iter().zip(want) {
            assert_relative_eq!(*got, w, max_relative = 1e-15);
        }
    }

    #[test]
    fn band_edges_put_remainder_first() {
        assert_eq!(band_edges(7, 3), vec![0, 3, 5, 7]);
        assert_eq!(band_edges(4, 4), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn saliency_pooling() {
        let constant = SaliencyMap::new(5, 9, vec![0.5; 45]).unwrap();
        assert_eq!(downsample_saliency(&constant, 2, 4).unwrap(), mask_full(2, 4).unwrap());

        let diag = SaliencyMap::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(pool_saliency(&diag, 1, 1).unwrap(), vec![0.5]);
        assert_eq!(downsample_saliency(&diag, 1, 1).unwrap().weights(), &[1.0]);

        #[rustfmt::skip]
        let quads = SaliencyMap::new(4, 4, vec![
            0.2, 0.2, 0.4, 0.4,
            0.2, 0.2, 0.4, 0.4,
            0.6, 0.6, 0.8, 0.8,
            0.6, 0.6, 0.8, 0.8,
        ]).unwrap();
        let pooled = pool_saliency(&quads, 2, 2).unwrap();
        for (got, want) in pooled.iter().zip([0.2, 0.4, 0.6, 0.8]) {
            assert_relative_eq!(*got, want, max_relative = 1e-7);
        }
        let mask = downsample_saliency(&quads, 2, 2).unwrap();
        let n = pooled.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (got, p) in mask.weights().iter().zip(&pooled) {
            assert_relative_eq!(*got, p / n, max_relative = 1e-12);
        }

        assert!(downsample_saliency(&diag, 3, 1).is_err());
        let zero = SaliencyMap::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(downsample_saliency(&zero, 1, 1).is_err());
    }

    #[test]
    fn encode_uniform_mask() {
        let v = encode(&am(2, 2, &[0, 1, 1, 2]), &mask_full(2, 2).unwrap(), 3).unwrap();
        let n = 1.5f64.sqrt();
        assert_eq!(v.nnz(), 3);
        assert_relative_eq!(v.get(0), 0.5 / n, max_relative = 1e-15);
        assert_relative_eq!(v.get(1), 1.0 / n, max_relative = 1e-15);
        assert_relative_eq!(v.get(2), 0.5 / n, max_relative = 1e-15);
        assert_relative_eq!(v.get(0), 0.4082, epsilon = 1e-4);
        assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn encode_one_hot_inside_box() {
        let words = [3, 7, 7, 3, 7, 7];
        let mask = mask_hard_bbox(2, 3, BBox::new(0, 1, 1, 2)).unwrap();
        let v = encode(&am(2, 3, &words), &mask, 8).unwrap();
        assert_eq!(v.entries(), &[(7, 1.0)]);
    }

    #[test]
    fn encode_rejects_bad_inputs() {
        let mask = mask_full(2, 2).unwrap();
        assert!(encode(&am(1, 4, &[0; 4]), &mask, 3).is_err());
        assert!(encode(&am(2, 2, &[0, 1, 2, 3]), &mask, 3).is_err());
    }

    fn item(id: &str, bbox: Option<BBox>) -> QueryItem {
        QueryItem {
            image_id: id.into(),
            bbox,
        }
    }

    #[test]
    fn query_aggregation() {
        let a = am(2, 2, &[0, 1, 1, 2]);
        let single = QuerySet {
            category: "x".into(),
            items: vec![item("a", Some(BBox::new(0, 0, 0, 1)))],
        };
        for mode in QueryMode::ALL {
            let q = encode_query(&single, std::slice::from_ref(&a), mode, 4).unwrap();
            let mask = query_mask(mode, 2, 2, single.items[0].bbox, "a").unwrap();
            assert_eq!(q, encode(&a, &mask, 4).unwrap());
        }

        let twice = QuerySet {
            category: "x".into(),
            items: vec![single.items[0].clone(), single.items[0].clone()],
        };
        let one = encode_query(&single, std::slice::from_ref(&a), QueryMode::SoftBbox, 4).unwrap();
        let two = encode_query(&twice, &[a.clone(), a.clone()], QueryMode::SoftBbox, 4).unwrap();
        for ((w1, v1), (w2, v2)) in one.entries().iter().zip(two.entries()) {
            assert_eq!(w1, w2);
            assert_relative_eq!(v1, v2, max_relative = 1e-15);
        }

        let disjoint = QuerySet {
            category: "x".into(),
            items: vec![item("p", None), item("q", None)],
        };
        let q = encode_query(
            &disjoint,
            &[am(1, 2, &[1, 1]), am(1, 2, &[2, 2])],
            QueryMode::FullImage,
            3,
        )
        .unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert_eq!(q.nnz(), 2);
        assert_relative_eq!(q.get(1), s, max_relative = 1e-15);
        assert_relative_eq!(q.get(2), s, max_relative = 1e-15);

        assert!(matches!(
            encode_query(&disjoint, &[a.clone(), a], QueryMode::HardBbox, 4),
            Err(Error::MissingBbox(_))
        ));
    }

    fn arb_bbox(rows: usize, cols: usize) -> impl Strategy<Value = BBox> {
        (0..rows, 0..rows, 0..cols, 0..cols).prop_map(|(a, b, c, d)| BBox::new(a.min(b), c.min(d), a.max(b), c.max(d)))
    }

    proptest! {
        #[test]
        fn every_mask_is_unit_norm((rows, cols, bbox) in (1usize..12, 1usize..12)
            .prop_flat_map(|(r, c)| (Just(r), Just(c), arb_bbox(r, c))))
        {
            let masks = [
                mask_full(rows, cols).unwrap(),
                mask_hard_bbox(rows, cols, bbox).unwrap(),
                mask_soft_bbox(rows, cols, bbox).unwrap(),
                mask_center_bias(rows, cols).unwrap(),
            ];
            for m in &masks {
                prop_assert!((m.norm() - 1.0).abs() < 1e-9);
                prop_assert!(m.weights().iter().all(|&w| w >= 0.0));
            }
            let soft = soft_bbox_raw(rows, cols, bbox);
            let inner = (0..rows * cols).filter(|i| bbox.contains(i / cols, i % cols));
            let outer_max = (0..rows * cols)
                .filter(|i| !bbox.contains(i / cols, i % cols))
                .map(|i| soft[i])
                .fold(0.0, f64::max);
            for i in inner {
                prop_assert!(soft[i] > outer_max);
            }
        }

        #[test]
        fn center_bias_is_radially_non_increasing(rows in 1usize..10, cols in 1usize..10) {
            let raw = center_bias_raw(rows, cols);
            let cr = (rows as f64 - 1.0) / 2.0;
            let cc = (cols as f64 - 1.0) / 2.0;
            let dist = |i: usize| ((i / cols) as f64 - cr).hypot((i % cols) as f64 - cc);
            for i in 0..raw.len() {
                for j in 0..raw.len() {
                    if dist(i) < dist(j) {
                        prop_assert!(raw[i] >= raw[j]);
                    }
                }
            }
        }

        #[test]
        fn encode_is_scale_invariant_in_mask(
            words in proptest::collection::vec(0u32..6, 12),
            raw in proptest::collection::vec(0.01f64..1.0, 12),
            scale in 0.001f64..1000.0,
        ) {
            let a = am(3, 4, &words);
            let m1 = WeightMask::from_raw(3, 4, raw.clone()).unwrap();
            let m2 = WeightMask::from_raw(3, 4, raw.iter().map(|v| v * scale).collect()).unwrap();
            let v1 = encode(&a, &m1, 6).unwrap();
            let v2 = encode(&a, &m2, 6).unwrap();
            prop_assert!((v1.norm() - 1.0).abs() < 1e-12);
            for ((w1, x1), (w2, x2)) in v1.entries().iter().zip(v2.entries()) {
                prop_assert_eq!(w1, w2);
                prop_assert!((x1 - x2).abs() < 1e-12);
            }
        }

        #[test]
        fn pooled_saliency_is_unit_norm(
            (sr, sc, tr, tc) in (1usize..9, 1usize..9).prop_flat_map(|(r, c)| (Just(r), Just(c), 1..=r, 1..=c)),
            vals in proptest::collection::vec(0.05f32..1.0, 81),
        ) {
            let s = SaliencyMap::new(sr, sc, vals[..sr * sc].to_vec()).unwrap();
            let m = downsample_saliency(&s, tr, tc).unwrap();
            prop_assert!((m.norm() - 1.0).abs() < 1e-9);
        }
    }
}
