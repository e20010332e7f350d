//! Classical multidimensional scaling (principal coordinates analysis).
//!
//! Given squared pairwise distances `D⁽²⁾`, the Gram matrix of the centered
//! configuration is recovered by double centering,
//!
//! ```text
//! B = −½ (I − J/n) D⁽²⁾ (I − J/n)
//! ```
//!
//! and an eigendecomposition `B = Y Λ² Yᵀ` yields principal coordinates
//! `A = Y Λ` (columns scaled by the square roots of the eigenvalues).
//! Eigenvalues are sorted descending; only those above `ε_keep · λ_1` are
//! retained as coordinates. Negative eigenvalues — the signature of a
//! non-Euclidean distance — are never embedded, but their relative weight is
//! reported as [`Embedding::negative_mass`].
//!
//! Sign convention: each retained eigenvector is flipped so that its entry of
//! largest magnitude (first such index on ties) is positive, making
//! embeddings reproducible across runs and platforms.

use crate::error::{Error, Result};
use crate::field::PQ;
use crate::metrics::DistanceMatrix;
use crate::numeric::pairwise_sum;
use nalgebra::DMatrix;

/// Default relative eigenvalue cutoff for retaining coordinates.
pub const DEFAULT_EPS_KEEP: f64 = 1e-9;

/// Double-center a squared distance matrix into the Gram matrix `B`.
///
/// The result is exactly symmetric (each entry is computed once and
/// mirrored), and its rows sum to zero up to rounding.
pub fn double_center(d2: &DistanceMatrix) -> DMatrix<f64> {
    let n = d2.n();
    let data = d2.squared();
    let mut row_mean = vec![0.0; n];
    for i in 0..n {
        row_mean[i] = pairwise_sum(data[i * n..(i + 1) * n].iter().copied()) / n as f64;
    }
    let grand_mean = pairwise_sum(row_mean.iter().copied()) / n as f64;
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = -0.5 * (data[i * n + j] - row_mean[i] - row_mean[j] + grand_mean);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    b
}

/// A classical MDS embedding.
#[derive(Debug, Clone)]
pub struct Embedding {
    n: usize,
    k_retained: usize,
    /// All `n` eigenvalues of `B`, descending.
    eigenvalues: Vec<f64>,
    /// `n × k_retained` principal coordinates, row-major.
    coords: Vec<f64>,
    negative_mass: f64,
    eps_keep: f64,
    pq: PQ,
}

impl Embedding {
    /// Assemble an embedding from raw parts (used by file loading). The
    /// eigenvalue list must be sorted descending and the coordinate buffer
    /// must be `n × k_retained`.
    pub fn from_parts(
        eigenvalues: Vec<f64>,
        coords: Vec<f64>,
        k_retained: usize,
        negative_mass: f64,
        eps_keep: f64,
        pq: PQ,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        if k_retained > n {
            return Err(Error::InvalidArgument(format!(
                "k_retained = {k_retained} exceeds n = {n}"
            )));
        }
        if coords.len() != n * k_retained {
            return Err(Error::ShapeMismatch {
                expected: n * k_retained,
                got: coords.len(),
            });
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(
                "eigenvalues must be sorted descending".into(),
            ));
        }
        Ok(Embedding {
            n,
            k_retained,
            eigenvalues,
            coords,
            negative_mass,
            eps_keep,
            pq,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of retained principal coordinates.
    pub fn k_retained(&self) -> usize {
        self.k_retained
    }

    /// All eigenvalues of the centered Gram matrix, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Row-major `n × k_retained` coordinate buffer.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Coordinate `j` of frame `i` (`j < k_retained`).
    #[inline]
    pub fn coord(&self, i: usize, j: usize) -> f64 {
        self.coords[i * self.k_retained + j]
    }

    /// The coordinates of frame `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.k_retained..(i + 1) * self.k_retained]
    }

    /// Principal coordinate `j` as a series over frames (e.g. the
    /// first principal coordinate is `coordinate_series(0)`).
    pub fn coordinate_series(&self, j: usize) -> Result<Vec<f64>> {
        if j >= self.k_retained {
            return Err(Error::InvalidArgument(format!(
                "coordinate {j} out of range, k_retained = {}",
                self.k_retained
            )));
        }
        Ok((0..self.n).map(|i| self.coord(i, j)).collect())
    }

    /// Fraction of the total spread lost to negative eigenvalues,
    /// `Σ|λ_i<0| / Σ|λ_i|`; zero for Euclidean-consistent input.
    pub fn negative_mass(&self) -> f64 {
        self.negative_mass
    }

    pub fn eps_keep(&self) -> f64 {
        self.eps_keep
    }

    /// Exponents of the metric the distances were computed with.
    pub fn pq(&self) -> PQ {
        self.pq
    }

    /// Fraction of positive spectral mass captured by the top `k`
    /// coordinates: `Σ_{j≤k} λ_j / Σ_{λ>0} λ`. Requires `1 ≤ k ≤ k_retained`.
    pub fn variance_captured(&self, k: usize) -> Result<f64> {
        if k < 1 || k > self.k_retained {
            return Err(Error::InvalidArgument(format!(
                "variance_captured: k = {k} outside 1..={}",
                self.k_retained
            )));
        }
        let top = pairwise_sum(self.eigenvalues[..k].iter().copied());
        let positive =
            pairwise_sum(self.eigenvalues.iter().copied().filter(|&l| l > 0.0));
        Ok(top / positive)
    }
}

/// Classical MDS of a squared distance matrix.
///
/// `eps_keep` is the relative eigenvalue cutoff ([`DEFAULT_EPS_KEEP`] is the
/// conventional choice): eigenvalues `> eps_keep · max(λ_1, 0)` become
/// coordinates. A matrix of all-equal frames (all distances zero) embeds to
/// zero retained coordinates.
pub fn embed(d2: &DistanceMatrix, eps_keep: f64) -> Result<Embedding> {
    if !(eps_keep >= 0.0) || !eps_keep.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "eps_keep must be finite and >= 0, got {eps_keep}"
        )));
    }
    let n = d2.n();
    let b = double_center(d2);
    let b_scale = b.amax();
    let eig = b.symmetric_eigen();
    // nalgebra's QR iteration runs unbounded; a non-finite eigenvalue is the
    // failure signal worth diagnosing.
    if eig.eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::Eigen(format!(
            "non-finite eigenvalue on an n = {n} matrix with max |B| = {b_scale:.3e}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let lambda_max = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let threshold = eps_keep * lambda_max;
    let k_retained = eigenvalues.iter().take_while(|&&l| l > threshold).count();

    let mut coords = vec![0.0; n * k_retained];
    for (j, &src) in order[..k_retained].iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        // Sign convention: entry of largest magnitude (first on ties) > 0.
        let mut arg = 0;
        let mut best = -1.0;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                arg = i;
            }
        }
        let sign = if col[arg] < 0.0 { -1.0 } else { 1.0 };
        let scale = eigenvalues[j].sqrt() * sign;
        for i in 0..n {
            coords[i * k_retained + j] = col[i] * scale;
        }
    }

    let abs_sum = pairwise_sum(eigenvalues.iter().map(|l| l.abs()));
    let neg_sum = pairwise_sum(eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l));
    let negative_mass = if abs_sum > 0.0 { neg_sum / abs_sum } else { 0.0 };

    Embedding::from_parts(eigenvalues, coords, k_retained, negative_mass, eps_keep, d2.pq())
}
