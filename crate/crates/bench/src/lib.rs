//! Shared helpers for the benchmark suite: deterministic inputs so runs are
//! comparable across machines and commits.

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use lpq::field::{PQ, VectorField};
use lpq::metrics::DistanceMatrix;
use lpq::space::MeasureSpace;

/// `n` seeded random frames of the given rank on a `width × height` lattice.
pub fn seeded_frames(
    n: usize,
    width: usize,
    height: usize,
    rank: usize,
    seed: u64,
) -> Vec<VectorField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = Arc::new(MeasureSpace::lattice(width, height).unwrap());
    (0..n)
        .map(|_| {
            let values: Vec<f64> = (0..space.n_points() * rank)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            VectorField::new(space.clone(), rank, values).unwrap()
        })
        .collect()
}

/// Squared-distance matrix of `n` seeded points in `R^dim` (Euclidean, so
/// the embedding step sees a clean positive-semidefinite spectrum).
pub fn planted_distances(n: usize, dim: usize, seed: u64) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d2[i * n + j] = pts[i]
                .iter()
                .zip(&pts[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
        }
    }
    DistanceMatrix::from_squared(n, PQ::l22(), d2).unwrap()
}
