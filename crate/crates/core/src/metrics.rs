//! The L^{p,q} distance and pairwise distance matrices.
//!
//! `d_{p,q}(X, Y) = ‖X − Y‖_{p,q}` inherits the metric axioms from the norm
//! family for any `p, q ∈ [1, ∞]`. Distances between bitwise-equal fields are
//! exactly zero (the difference is computed pointwise, so no rounding enters).
//!
//! [`DistanceMatrix`] stores *squared* distances — the quantity classical
//! MDS consumes — and derives plain distances on demand. Matrix assembly is
//! parallel over independent entries, which keeps results deterministic: each
//! entry is produced by the same sequential kernel regardless of thread
//! count.

use crate::error::{Error, Result};
use crate::field::{Exponent, PQ, VectorField};
use crate::numeric::PairwiseSum;
use rayon::prelude::*;

/// q-norm of the pointwise difference `x_s − y_s` without materializing it.
#[inline]
fn qnorm_diff(x: &[f64], y: &[f64], q: Exponent) -> f64 {
    match q {
        Exponent::Infinity => x
            .iter()
            .zip(y)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())),
        Exponent::Finite(q) if q == 1.0 => {
            x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
        }
        Exponent::Finite(q) if q == 2.0 => x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum::<f64>()
            .sqrt(),
        Exponent::Finite(q) => x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).abs().powf(q))
            .sum::<f64>()
            .powf(1.0 / q),
    }
}

/// Shared p-reduction over per-point q-norms.
#[inline]
fn reduce_p(weights: &[f64], pq: PQ, point_norm: impl Fn(usize) -> f64) -> f64 {
    match pq.p {
        Exponent::Infinity => {
            let mut m = 0.0_f64;
            for (s, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    let v = point_norm(s);
                    if v > m {
                        m = v;
                    }
                }
            }
            m
        }
        Exponent::Finite(p) => {
            let mut acc = PairwiseSum::new();
            if p == 1.0 {
                for (s, &w) in weights.iter().enumerate() {
                    acc.add(point_norm(s) * w);
                }
                acc.finish()
            } else if p == 2.0 {
                for (s, &w) in weights.iter().enumerate() {
                    let v = point_norm(s);
                    acc.add(v * v * w);
                }
                acc.finish().sqrt()
            } else {
                for (s, &w) in weights.iter().enumerate() {
                    acc.add(point_norm(s).powf(p) * w);
                }
                acc.finish().powf(1.0 / p)
            }
        }
    }
}

/// L^{p,q} distance between two compatible fields.
pub fn distance(x: &VectorField, y: &VectorField, pq: PQ) -> Result<f64> {
    if !x.compatible(y) {
        return Err(Error::IncompatibleFields(format!(
            "distance: ranks {} vs {} on {} vs {} points",
            x.rank(),
            y.rank(),
            x.n_points(),
            y.n_points()
        )));
    }
    let r = x.rank();
    let (xv, yv) = (x.values(), y.values());
    let w = x.space().weights();
    let d = reduce_p(w, pq, |s| {
        qnorm_diff(&xv[s * r..(s + 1) * r], &yv[s * r..(s + 1) * r], pq.q)
    });
    if !d.is_finite() {
        return Err(Error::NonFinite(format!("distance at {pq}")));
    }
    Ok(d)
}

/// Symmetric matrix of squared pairwise L^{p,q} distances.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    pq: PQ,
    /// Row-major `n × n` squared distances.
    d2: Vec<f64>,
}

impl DistanceMatrix {
    /// Wrap a raw squared-distance buffer (used by file loading). Checks the
    /// metric sanity conditions: square shape, zero diagonal, symmetry,
    /// finite non-negative entries.
    pub fn from_squared(n: usize, pq: PQ, d2: Vec<f64>) -> Result<Self> {
        if d2.len() != n * n {
            return Err(Error::ShapeMismatch {
                expected: n * n,
                got: d2.len(),
            });
        }
        for i in 0..n {
            if d2[i * n + i] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "distance matrix diagonal entry {i} is {}, expected 0",
                    d2[i * n + i]
                )));
            }
            for j in 0..i {
                let (a, b) = (d2[i * n + j], d2[j * n + i]);
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::NonFinite(format!("distance matrix entry ({i},{j})")));
                }
                if a != b {
                    return Err(Error::InvalidArgument(format!(
                        "distance matrix asymmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { n, pq, d2 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pq(&self) -> PQ {
        self.pq
    }

    /// Squared distance between frames `i` and `j`.
    #[inline]
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.d2[i * self.n + j]
    }

    /// Distance between frames `i` and `j`.
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.d2(i, j).sqrt()
    }

    pub fn squared(&self) -> &[f64] {
        &self.d2
    }

    /// Distances between consecutive frames, `d(i, i+1)` for `i = 0..n−1`.
    pub fn consecutive(&self) -> Vec<f64> {
        (0..self.n.saturating_sub(1))
            .map(|i| self.d(i, i + 1))
            .collect()
    }
}

/// Pairwise distance matrix of a series, parallel over entries.
pub fn distance_matrix(frames: &[VectorField], pq: PQ) -> Result<DistanceMatrix> {
    let n = frames.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "distance_matrix: empty series".into(),
        ));
    }
    for (i, f) in frames.iter().enumerate().skip(1) {
        if !frames[0].compatible(f) {
            return Err(Error::IncompatibleFields(format!(
                "distance_matrix: frame {i} incompatible with frame 0"
            )));
        }
    }

    // Upper triangle in parallel, one row per task.
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n.saturating_sub(i + 1)];
            for (k, j) in (i + 1..n).enumerate() {
                let d = distance(&frames[i], &frames[j], pq)?;
                row[k] = d * d;
            }
            Ok(row)
        })
        .collect();

    let mut d2 = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        for (k, v) in row.into_iter().enumerate() {
            let j = i + 1 + k;
            d2[i * n + j] = v;
            d2[j * n + i] = v;
        }
    }
    DistanceMatrix::from_squared(n, pq, d2)
}

/// Tiled pairwise distances for series too large to hold in memory.
///
/// `load(i)` produces frame `i`; frames are loaded in row/column blocks of
/// `tile` frames, so peak residency is `2 · tile` frames. Entries are
/// computed by the same kernel as [`distance_matrix`], so for a given series
/// the result is bitwise identical to the in-memory path.
pub fn distance_matrix_tiled<F>(
    n: usize,
    tile: usize,
    pq: PQ,
    load: F,
) -> Result<DistanceMatrix>
where
    F: Fn(usize) -> Result<VectorField> + Sync,
{
    if n == 0 {
        return Err(Error::InvalidArgument(
            "distance_matrix_tiled: empty series".into(),
        ));
    }
    let tile = tile.max(1);
    let mut d2 = vec![0.0; n * n];
    let mut i0 = 0;
    while i0 < n {
        let i1 = (i0 + tile).min(n);
        let row_block: Vec<VectorField> = (i0..i1).map(&load).collect::<Result<_>>()?;
        // Diagonal block.
        let diag: Vec<Result<(usize, usize, f64)>> = (0..row_block.len())
            .into_par_iter()
            .flat_map_iter(|a| (a + 1..row_block.len()).map(move |b| (a, b)))
            .map(|(a, b)| {
                let d = distance(&row_block[a], &row_block[b], pq)?;
                Ok((i0 + a, i0 + b, d * d))
            })
            .collect();
        for e in diag {
            let (i, j, v) = e?;
            d2[i * n + j] = v;
            d2[j * n + i] = v;
        }
        // Off-diagonal blocks.
        let mut j0 = i1;
        while j0 < n {
            let j1 = (j0 + tile).min(n);
            let col_block: Vec<VectorField> = (j0..j1).map(&load).collect::<Result<_>>()?;
            let off: Vec<Result<(usize, usize, f64)>> = (0..row_block.len())
                .into_par_iter()
                .flat_map_iter(|a| (0..col_block.len()).map(move |b| (a, b)))
                .map(|(a, b)| {
                    let d = distance(&row_block[a], &col_block[b], pq)?;
                    Ok((i0 + a, j0 + b, d * d))
                })
                .collect();
            for e in off {
                let (i, j, v) = e?;
                d2[i * n + j] = v;
                d2[j * n + i] = v;
            }
            j0 = j1;
        }
        i0 = i1;
    }
    DistanceMatrix::from_squared(n, pq, d2)
}
