//! Visual-word codebooks: k-means training and nearest-centroid quantization
//! of local feature maps.

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Word count used for real corpora.
pub const DEFAULT_WORDS: usize = 25_000;

/// `K` centroids of dimension `D`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    k: usize,
    dim: usize,
    centroids: Vec<f32>,
}

impl Codebook {
    pub fn from_centroids(k: usize, dim: usize, centroids: Vec<f32>) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(Error::invalid("codebook needs K >= 1 and D >= 1"));
        }
        if centroids.len() != k * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} centroid values for K={k}, D={dim}",
                centroids.len()
            )));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("codebook centroid is not finite"));
        }
        Ok(Codebook { k, dim, centroids })
    }

    /// Number of visual words.
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    pub fn centroid(&self, word: usize) -> &[f32] {
        &self.centroids[word * self.dim..(word + 1) * self.dim]
    }

    /// Index of the nearest centroid; the lowest index wins ties.
    pub fn nearest(&self, x: &[f32]) -> u32 {
        debug_assert_eq!(x.len(), self.dim);
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (w, c) in self.centroids.chunks_exact(self.dim).enumerate() {
            let d = sq_dist(x, c);
            if d < best_dist {
                best_dist = d;
                best = w;
            }
        }
        best as u32
    }
}

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

fn sq_dist64(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y;
            d * d
        })
        .sum()
}

/// An `H x W` grid of `D`-dimensional local descriptors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFeatureMap {
    rows: usize,
    cols: usize,
    dim: usize,
    values: Vec<f32>,
}

impl LocalFeatureMap {
    pub fn new(rows: usize, cols: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 || dim == 0 {
            return Err(Error::invalid("feature map dimensions must be positive"));
        }
        if values.len() != rows * cols * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} feature values for {rows}x{cols}x{dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature value is not finite"));
        }
        Ok(LocalFeatureMap {
            rows,
            cols,
            dim,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn descriptor(&self, r: usize, c: usize) -> &[f32] {
        let at = (r * self.cols + c) * self.dim;
        &self.values[at..at + self.dim]
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks_exact(self.dim)
    }
}

/// An `H x W` grid of visual-word ids, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMap {
    rows: usize,
    cols: usize,
    words: Vec<u32>,
}

impl AssignmentMap {
    pub fn new(rows: usize, cols: usize, words: Vec<u32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("assignment map dimensions must be positive"));
        }
        if words.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} words for {rows}x{cols} grid",
                words.len()
            )));
        }
        Ok(AssignmentMap { rows, cols, words })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn word(&self, r: usize, c: usize) -> u32 {
        self.words[r * self.cols + c]
    }

    pub fn max_word(&self) -> u32 {
        self.words.iter().copied().max().unwrap_or(0)
    }
}

/// Quantizes every cell to its nearest centroid.
pub fn assign(fmap: &LocalFeatureMap, cb: &Codebook) -> Result<AssignmentMap> {
    if fmap.dim() != cb.dim() {
        return Err(Error::DimensionMismatch(format!(
            "feature dim {} vs codebook dim {}",
            fmap.dim(),
            cb.dim()
        )));
    }
    let words = fmap.descriptors().map(|x| cb.nearest(x)).collect();
    AssignmentMap::new(fmap.rows(), fmap.cols(), words)
}

/// Outcome of a k-means run, with the objective after every Lloyd update.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Total within-cluster squared distance after each update step.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Deterministic for a fixed sample order, `k` and `seed`. Stops after
/// `max_iters` update steps or once no assignment changes.
pub fn train_codebook(samples: &[Vec<f32>], k: usize, max_iters: usize, seed: u64) -> Result<Codebook> {
    fit_kmeans(samples, k, max_iters, seed).map(|fit| fit.codebook)
}

pub fn fit_kmeans(samples: &[Vec<f32>], k: usize, max_iters: usize, seed: u64) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if samples.is_empty() {
        return Err(Error::invalid("no samples to cluster"));
    }
    if k > samples.len() {
        return Err(Error::invalid(format!(
            "K={k} exceeds the {} available samples",
            samples.len()
        )));
    }
    let dim = samples[0].len();
    if dim == 0 {
        return Err(Error::invalid("samples have zero dimension"));
    }
    if let Some(bad) = samples.iter().position(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "sample {bad} has dimension {}, expected {dim}",
            samples[bad].len()
        )));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sample value is not finite"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(samples, k, &mut rng);
    let mut labels = vec![usize::MAX; samples.len()];
    let mut objective = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iters {
        let mut changed = false;
        for (label, x) in labels.iter_mut().zip(samples) {
            let nearest = nearest64(x, &centroids, dim);
            if nearest != *label {
                *label = nearest;
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
        iterations += 1;

        let mut sums = vec![0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (&label, x) in labels.iter().zip(samples) {
            counts[label] += 1;
            for (s, &v) in sums[label * dim..(label + 1) * dim].iter_mut().zip(x) {
                *s += v as f64;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let n = counts[j] as f64;
                for (c, s) in centroids[j * dim..(j + 1) * dim]
                    .iter_mut()
                    .zip(&sums[j * dim..(j + 1) * dim])
                {
                    *c = s / n;
                }
            }
        }
        repair_empty(samples, &mut labels, &mut counts, &mut centroids, dim);
        objective.push(total_cost(samples, &labels, &centroids, dim));
    }

    let codebook = Codebook::from_centroids(k, dim, centroids.iter().map(|&c| c as f32).collect())?;
    Ok(KMeansFit {
        codebook,
        objective,
        iterations,
        converged,
    })
}

fn nearest64(x: &[f32], centroids: &[f64], dim: usize) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist64(x, c);
        if d < best_dist {
            best_dist = d;
            best = j;
        }
    }
    best
}

fn total_cost(samples: &[Vec<f32>], labels: &[usize], centroids: &[f64], dim: usize) -> f64 {
    labels
        .iter()
        .zip(samples)
        .map(|(&l, x)| sq_dist64(x, &centroids[l * dim..(l + 1) * dim]))
        .sum()
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(samples: &[Vec<f32>], labels: &mut [usize], counts: &mut [usize], centroids: &mut [f64], dim: usize) {
    for j in 0..counts.len() {
        if counts[j] > 0 {
            continue;
        }
        let far = labels
            .iter()
            .zip(samples)
            .enumerate()
            .filter(|(_, (&l, _))| counts[l] > 1)
            .map(|(i, (&l, x))| (i, sq_dist64(x, &centroids[l * dim..(l + 1) * dim])))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        let Some((i, _)) = far else { continue };
        let old = labels[i];
        let x = &samples[i];
        // drop the point from its old cluster mean
        let n = counts[old] as f64;
        for (c, &v) in centroids[old * dim..(old + 1) * dim].iter_mut().zip(x) {
            *c = (*c * n - v as f64) / (n - 1.0);
        }
        counts[old] -= 1;
        labels[i] = j;
        counts[j] = 1;
        for (c, &v) in centroids[j * dim..(j + 1) * dim].iter_mut().zip(x) {
            *c = v as f64;
        }
    }
}

fn plus_plus_seeds(samples: &[Vec<f32>], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dim = samples[0].len();
    let mut chosen = vec![false; samples.len()];
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..samples.len());
    chosen[first] = true;
    centroids.extend(samples[first].iter().map(|&v| v as f64));

    let mut min_dist: Vec<f64> = samples.iter().map(|x| sq_dist64(x, &centroids[..dim])).collect();
    for _ in 1..k {
        let next = match WeightedIndex::new(&min_dist) {
            Ok(dist) => dist.sample(rng),
            // every remaining point coincides with a centroid
            Err(_) => chosen.iter().position(|&c| !c).expect("k <= samples"),
        };
        chosen[next] = true;
        let start = centroids.len();
        centroids.extend(samples[next].iter().map(|&v| v as f64));
        for (m, x) in min_dist.iter_mut().zip(samples) {
            *m = m.min(sq_dist64(x, &centroids[start..]));
        }
    }
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_nearest(x: &[f32], cb: &Codebook) -> u32 {
        let dists: Vec<f64> = (0..cb.len())
            .map(|w| {
                cb.centroid(w)
                    .iter()
                    .zip(x)
                    .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                    .sum()
            })
            .collect();
        let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
        dists.iter().position(|&d| d == min).unwrap() as u32
    }

    #[test]
    fn two_clusters_converge_to_pair_means() {
        let samples = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 10.0], vec![10.0, 11.0]];
        for seed in 0..20 {
            let cb = train_codebook(&samples, 2, 50, seed).unwrap();
            let mut cs: Vec<Vec<f32>> = (0..2).map(|w| cb.centroid(w).to_vec()).collect();
            cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
            assert_eq!(cs, vec![vec![0.0, 0.5], vec![10.0, 10.5]], "seed {seed}");
        }
    }

    #[test]
    fn k_equal_to_sample_count_is_identity() {
        let samples = vec![vec![1.0], vec![4.0], vec![9.0], vec![-3.0]];
        let cb = train_codebook(&samples, 4, 10, 7).unwrap();
        let mut cs: Vec<f32> = cb.centroids().to_vec();
        cs.sort_by(f32::total_cmp);
        assert_eq!(cs, vec![-3.0, 1.0, 4.0, 9.0]);
    }

    #[test]
    fn duplicate_samples_still_seed_k_centroids() {
        let samples = vec![vec![2.0]; 5];
        let cb = train_codebook(&samples, 3, 10, 1).unwrap();
        assert_eq!(cb.len(), 3);
    }

    #[test]
    fn training_is_deterministic() {
        let samples: Vec<Vec<f32>> = (0..200)
            .map(|i| vec![(i * 37 % 101) as f32, (i * 53 % 97) as f32])
            .collect();
        let a = train_codebook(&samples, 8, 30, 42).unwrap();
        let b = train_codebook(&samples, 8, 30, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_k() {
        let samples = vec![vec![0.0]; 3];
        assert!(train_codebook(&samples, 0, 5, 0).is_err());
        assert!(train_codebook(&samples, 4, 5, 0).is_err());
    }

    #[test]
    fn single_word_assigns_everything_to_zero() {
        let cb = Codebook::from_centroids(1, 2, vec![5.0, 5.0]).unwrap();
        let fm = LocalFeatureMap::new(2, 3, 2, (0..12).map(|v| v as f32).collect()).unwrap();
        assert!(assign(&fm, &cb).unwrap().words().iter().all(|&w| w == 0));
    }

    #[test]
    fn exact_centroid_match_and_tie_break() {
        let cb = Codebook::from_centroids(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(cb.nearest(&[3.0]), 3);
        // equidistant from words 1 and 2
        assert_eq!(cb.nearest(&[1.5]), 1);
    }

    #[test]
    fn checkerboard_assignment_matches_exhaustive_search() {
        let cb = Codebook::from_centroids(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let fm = LocalFeatureMap::new(2, 2, 2, vec![0.1, 0.0, 0.9, 1.0, 0.8, 0.9, 0.2, 0.1]).unwrap();
        let am = assign(&fm, &cb).unwrap();
        assert_eq!(am.words(), &[0, 1, 1, 0]);
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(am.word(r, c), brute_nearest(fm.descriptor(r, c), &cb));
            }
        }
    }

    #[test]
    fn assign_rejects_dimension_mismatch() {
        let cb = Codebook::from_centroids(1, 3, vec![0.0; 3]).unwrap();
        let fm = LocalFeatureMap::new(1, 1, 2, vec![0.0; 2]).unwrap();
        assert!(matches!(assign(&fm, &cb), Err(Error::DimensionMismatch(_))));
    }

    proptest! {
        #[test]
        fn lloyd_objective_never_increases(
            points in proptest::collection::vec(proptest::collection::vec(-5f32..5.0, 3), 12..60),
            k in 1usize..6,
            seed in any::<u64>(),
        ) {
            let fit = fit_kmeans(&points, k, 25, seed).unwrap();
            for pair in fit.objective.windows(2) {
                prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-12, "{:?}", fit.objective);
            }
        }

        #[test]
        fn assign_matches_brute_force_and_is_pure(
            cents in proptest::collection::vec(-3f32..3.0, 2 * 5),
            cells in proptest::collection::vec(-3f32..3.0, 2 * 12),
        ) {
            let cb = Codebook::from_centroids(5, 2, cents).unwrap();
            let fm = LocalFeatureMap::new(3, 4, 2, cells).unwrap();
            let am = assign(&fm, &cb).unwrap();
            prop_assert_eq!(&am, &assign(&fm, &cb).unwrap());
            for r in 0..3 {
                for c in 0..4 {
                    prop_assert_eq!(am.word(r, c), brute_nearest(fm.descriptor(r, c), &cb));
                }
            }
        }
    }
}
