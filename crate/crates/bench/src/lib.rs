//! Fixtures shared by the criterion benchmarks.

use egosearch::{
    build_index, BowVector, CandidatePartition, Codebook, IndexEntry, InvertedIndex, LocalFeatureMap, Scored,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// A unit-norm vector with `nnz` random words out of `k`.
pub fn random_vector(rng: &mut ChaCha8Rng, k: usize, nnz: usize) -> BowVector {
    let raw = (0..nnz)
        .map(|_| (rng.random_range(0..k as u32), rng.random_range(0.01..1.0)))
        .collect();
    BowVector::from_weights(k, raw).expect("valid weights")
}

/// A day of `n` images indexed over `k` words.
pub fn random_index(seed: u64, n: usize, k: usize, nnz: usize) -> (InvertedIndex, BowVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..n)
        .map(|i| IndexEntry {
            image_id: format!("img{i:05}"),
            timestamp: 1 + i as i64 * 30,
            vector: random_vector(&mut rng, k, nnz),
        })
        .collect();
    let q = random_vector(&mut rng, k, nnz * 4);
    (build_index(k, entries).expect("unique ids"), q)
}

/// `n` images split into alternating candidate and discarded bursts.
pub fn random_partition(seed: u64, n: usize) -> CandidatePartition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = CandidatePartition::default();
    for i in 0..n {
        let s = Scored {
            image_id: format!("img{i:05}"),
            timestamp: 1 + i as i64,
            score: rng.random(),
        };
        if (i / 7) % 3 == 0 {
            p.candidates.push(s);
        } else {
            p.discarded.push(s);
        }
    }
    p
}

pub fn random_codebook(seed: u64, k: usize, dim: usize) -> Codebook {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Codebook::from_centroids(k, dim, (0..k * dim).map(|_| rng.random()).collect()).expect("finite")
}

pub fn random_feature_map(seed: u64, rows: usize, cols: usize, dim: usize) -> LocalFeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LocalFeatureMap::new(rows, cols, dim, (0..rows * cols * dim).map(|_| rng.random()).collect()).expect("finite")
}
