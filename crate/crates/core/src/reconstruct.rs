//! Linear reconstruction of frames from principal coordinates.
//!
//! For frames `F_1..F_n` with mean `F̄`, coordinates `A = Y Λ` from classical
//! MDS of their L^{2,2} distances satisfy an exact identity: the original
//! (centered) frames can be reassembled from the top `k` coordinates as
//!
//! ```text
//! F_i^{(k)} = F̄ + Σ_{j≤k} A_ij · M_j,
//! M_j = λ_j^{−1} Σ_s A_sj (F_s − F̄)
//! ```
//!
//! where `λ_j = Λ_jj²` is the j-th eigenvalue. At full rank
//! (`k = k_retained`) the reconstruction is exact up to rounding, and the
//! residuals obey the PCA tail identity
//! `Σ_i ‖F_i − F_i^{(k)}‖²_{2,2} = Σ_{j>k} λ_j`.
//!
//! The *mode fields* `M_j` are precomputed when the `k·m` storage fits the
//! memory budget; otherwise reconstruction streams the frames per call and
//! evaluates the double sum directly. Both paths produce results within
//! rounding of each other; each path is individually deterministic.
//!
//! The identity is tied to the `L^{2,2}` metric the embedding was built
//! from. Models fitted from embeddings of other `(p, q)` distances are still
//! defined, but only as a heuristic — such models carry
//! [`ReconstructionModel::is_heuristic`] `= true` so downstream consumers can
//! flag it.

use crate::error::{Error, Result};
use crate::field::{PQ, VectorField};
use crate::mds::Embedding;
use crate::metrics::distance;
use crate::series::FieldSeries;

/// Divisor floor for the relative reconstruction error.
pub const ERROR_FLOOR: f64 = 1e-30;

/// Default memory budget for precomputed mode fields (256 MiB of f64s).
pub const DEFAULT_MODE_BUDGET_BYTES: usize = 256 << 20;

/// A fitted reconstruction operator.
#[derive(Debug, Clone)]
pub struct ReconstructionModel {
    mean: VectorField,
    /// `n × k_retained` coordinates, row-major (copied from the embedding).
    coords: Vec<f64>,
    /// Retained eigenvalues `λ_1.. λ_k`, descending.
    eigenvalues: Vec<f64>,
    n: usize,
    k: usize,
    /// Precomputed mode fields `M_j`, if the budget allowed.
    modes: Option<Vec<VectorField>>,
    /// Centered frames kept for the streaming path (`modes = None`).
    centered: Option<Vec<VectorField>>,
    pq: PQ,
    is_heuristic: bool,
}

impl ReconstructionModel {
    pub fn n_frames(&self) -> usize {
        self.n
    }

    /// Number of usable coordinates (the embedding's `k_retained`).
    pub fn k_retained(&self) -> usize {
        self.k
    }

    pub fn mean_field(&self) -> &VectorField {
        &self.mean
    }

    /// Retained eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Mode field `j` (`j < k_retained`). Available on either path: the
    /// streaming path assembles it on demand.
    pub fn mode_field(&self, j: usize) -> Result<VectorField> {
        if j >= self.k {
            return Err(Error::InvalidArgument(format!(
                "mode {j} out of range, k_retained = {}",
                self.k
            )));
        }
        if let Some(modes) = &self.modes {
            return Ok(modes[j].clone());
        }
        let centered = self.centered.as_ref().expect("one storage path is set");
        let mut m = VectorField::zeros(self.mean.space().clone(), self.mean.rank())?;
        let inv = 1.0 / self.eigenvalues[j];
        for (s, c) in centered.iter().enumerate() {
            m.axpy(self.coords[s * self.k + j] * inv, c)?;
        }
        Ok(m)
    }

    /// True when the model was fitted from a non-L^{2,2} embedding, where
    /// the reconstruction identity does not hold and the operator is only a
    /// heuristic.
    pub fn is_heuristic(&self) -> bool {
        self.is_heuristic
    }

    /// Metric the source embedding was computed with.
    pub fn pq(&self) -> PQ {
        self.pq
    }

    /// Reconstruct frame `i` from its top `k` principal coordinates.
    ///
    /// `k` must satisfy `1 ≤ k ≤ k_retained`, with one degenerate exception:
    /// a series of identical frames has `k_retained = 0`, and every
    /// reconstruction request returns the mean field.
    pub fn reconstruct_frame(&self, i: usize, k: usize) -> Result<VectorField> {
        if i >= self.n {
            return Err(Error::InvalidArgument(format!(
                "frame {i} out of range, n = {}",
                self.n
            )));
        }
        if self.k == 0 {
            // Degenerate trajectory: nothing beyond the mean to reconstruct.
            return Ok(self.mean.clone());
        }
        if k < 1 || k > self.k {
            return Err(Error::InvalidArgument(format!(
                "k = {k} outside 1..={}",
                self.k
            )));
        }
        let mut out = self.mean.clone();
        if let Some(modes) = &self.modes {
            for (j, mode) in modes.iter().take(k).enumerate() {
                out.axpy(self.coords[i * self.k + j], mode)?;
            }
        } else {
            let centered = self.centered.as_ref().expect("one storage path is set");
            // c_s = Σ_{j≤k} A_ij A_sj / λ_j, then F̄ + Σ_s c_s (F_s − F̄).
            for (s, cf) in centered.iter().enumerate() {
                let mut c = 0.0;
                for j in 0..k {
                    c += self.coords[i * self.k + j] * self.coords[s * self.k + j]
                        / self.eigenvalues[j];
                }
                out.axpy(c, cf)?;
            }
        }
        Ok(out)
    }
}

/// Fit a reconstruction model from a series and its embedding.
///
/// `mode_budget_bytes` bounds the memory spent on precomputed mode fields;
/// pass [`DEFAULT_MODE_BUDGET_BYTES`] unless constrained. The embedding must
/// have been computed from this series (`n` must match).
pub fn fit(
    series: &FieldSeries,
    embedding: &Embedding,
    mode_budget_bytes: usize,
) -> Result<ReconstructionModel> {
    let n = series.n_frames();
    if embedding.n() != n {
        return Err(Error::InvalidArgument(format!(
            "embedding is over {} frames but the series has {n}",
            embedding.n()
        )));
    }
    let k = embedding.k_retained();
    let mean = series.mean_field();
    let centered: Vec<VectorField> = series
        .frames()
        .iter()
        .map(|f| f.sub(&mean))
        .collect::<Result<_>>()?;

    let eigenvalues = embedding.eigenvalues()[..k].to_vec();
    let coords = embedding.coords().to_vec();
    let m = mean.n_points() * mean.rank();
    let mode_bytes = k.saturating_mul(m).saturating_mul(std::mem::size_of::<f64>());

    let (modes, kept_centered) = if k > 0 && mode_bytes <= mode_budget_bytes {
        let mut modes = Vec::with_capacity(k);
        for j in 0..k {
            let mut mode = VectorField::zeros(mean.space().clone(), mean.rank())?;
            let inv = 1.0 / eigenvalues[j];
            for (s, c) in centered.iter().enumerate() {
                mode.axpy(coords[s * k + j] * inv, c)?;
            }
            modes.push(mode);
        }
        (Some(modes), None)
    } else {
        (None, Some(centered))
    };

    Ok(ReconstructionModel {
        mean,
        coords,
        eigenvalues,
        n,
        k,
        modes,
        centered: kept_centered,
        pq: embedding.pq(),
        is_heuristic: !embedding.pq().is_l22(),
    })
}

/// Relative reconstruction error of frame `i` at order `k`:
/// `d(F_i, F_i^{(k)}) / max(d(F_i, F̄), ε)` in the L^{2,2} metric.
pub fn reconstruction_error(
    model: &ReconstructionModel,
    series: &FieldSeries,
    i: usize,
    k: usize,
) -> Result<f64> {
    if series.n_frames() != model.n {
        return Err(Error::InvalidArgument(
            "series does not match the fitted model".into(),
        ));
    }
    let rec = model.reconstruct_frame(i, k)?;
    let pq = PQ::l22();
    let num = distance(series.frame(i), &rec, pq)?;
    let den = distance(series.frame(i), model.mean_field(), pq)?;
    Ok(num / den.max(ERROR_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PQ;
    use crate::mds::{DEFAULT_EPS_KEEP, embed};
    use crate::metrics::distance_matrix;
    use crate::space::MeasureSpace;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn random_series(n: usize, w: usize, h: usize, seed: u64) -> FieldSeries {
        let space = Arc::new(MeasureSpace::lattice(w, h).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = (0..n)
            .map(|_| {
                VectorField::from_fn(space.clone(), 1, |_, out| {
                    out[0] = rng.gen_range(-1.0..1.0);
                })
                .unwrap()
            })
            .collect();
        FieldSeries::with_uniform_times(frames, 0.0, 1.0).unwrap()
    }

    fn fit_l22(series: &FieldSeries) -> (ReconstructionModel, Embedding) {
        let m = distance_matrix(series.frames(), PQ::l22()).unwrap();
        let e = embed(&m, DEFAULT_EPS_KEEP).unwrap();
        let model = fit(series, &e, DEFAULT_MODE_BUDGET_BYTES).unwrap();
        (model, e)
    }

    #[test]
    fn two_frames_reconstruct_exactly_at_k1() {
        // With two frames the single mode is the (scaled) difference and
        // k = 1 must reproduce both frames.
        let series = random_series(2, 3, 3, 1);
        let (model, e) = fit_l22(&series);
        assert_eq!(e.k_retained(), 1);
        for i in 0..2 {
            let rec = model.reconstruct_frame(i, 1).unwrap();
            let err = distance(series.frame(i), &rec, PQ::l22()).unwrap();
            assert_abs_diff_eq!(err, 0.0, epsilon = 1e-10);
            assert!(reconstruction_error(&model, &series, i, 1).unwrap() < 1e-9);
        }
    }

    #[test]
    fn full_rank_reconstruction_is_exact() {
        let series = random_series(12, 4, 4, 2);
        let (model, e) = fit_l22(&series);
        let k = e.k_retained();
        assert_eq!(k, 11); // n − 1 independent directions
        for i in 0..series.n_frames() {
            assert!(reconstruction_error(&model, &series, i, k).unwrap() < 1e-8);
        }
    }

    #[test]
    fn tail_sum_identity() {
        // Σ_i ‖F_i − F_i^{(k)}‖² = Σ_{j>k} λ_j for every k.
        let series = random_series(10, 4, 3, 3);
        let (model, e) = fit_l22(&series);
        let pq = PQ::l22();
        for k in 1..=e.k_retained() {
            let resid: f64 = (0..series.n_frames())
                .map(|i| {
                    let rec = model.reconstruct_frame(i, k).unwrap();
                    let d = distance(series.frame(i), &rec, pq).unwrap();
                    d * d
                })
                .sum();
            let tail: f64 = e.eigenvalues()[k..].iter().filter(|&&l| l > 0.0).sum();
            assert_abs_diff_eq!(resid, tail, epsilon = 1e-9 * e.eigenvalues()[0]);
        }
    }

    #[test]
    fn streaming_path_matches_precomputed() {
        let series = random_series(9, 5, 4, 4);
        let m = distance_matrix(series.frames(), PQ::l22()).unwrap();
        let e = embed(&m, DEFAULT_EPS_KEEP).unwrap();
        let fat = fit(&series, &e, DEFAULT_MODE_BUDGET_BYTES).unwrap();
        let lean = fit(&series, &e, 0).unwrap(); // force streaming
        assert!(fat.modes.is_some());
        assert!(lean.modes.is_none());
        for i in 0..series.n_frames() {
            for k in [1, 3, e.k_retained()] {
                let a = fat.reconstruct_frame(i, k).unwrap();
                let b = lean.reconstruct_frame(i, k).unwrap();
                for (x, y) in a.values().iter().zip(b.values()) {
                    assert_abs_diff_eq!(x, y, epsilon = 1e-10);
                }
            }
        }
        // Mode fields agree across paths too.
        for j in 0..e.k_retained() {
            let a = fat.mode_field(j).unwrap();
            let b = lean.mode_field(j).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn identical_frames_reconstruct_to_mean() {
        let space = Arc::new(MeasureSpace::lattice(2, 2).unwrap());
        let f = VectorField::new(space, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let series =
            FieldSeries::with_uniform_times(vec![f.clone(), f.clone(), f.clone()], 0.0, 1.0)
                .unwrap();
        let (model, e) = fit_l22(&series);
        assert_eq!(e.k_retained(), 0);
        let rec = model.reconstruct_frame(1, 1).unwrap();
        assert_eq!(rec.values(), f.values());
        // Error is 0/floor → 0.
        assert_eq!(reconstruction_error(&model, &series, 1, 1).unwrap(), 0.0);
    }

    #[test]
    fn error_decreases_with_k() {
        let series = random_series(15, 6, 5, 9);
        let (model, e) = fit_l22(&series);
        for i in [0, 7] {
            let mut prev = f64::INFINITY;
            for k in 1..=e.k_retained() {
                let err = reconstruction_error(&model, &series, i, k).unwrap();
                assert!(err <= prev + 1e-12);
                prev = err;
            }
        }
    }

    #[test]
    fn non_l22_models_are_flagged() {
        let series = random_series(6, 3, 3, 11);
        let m = distance_matrix(series.frames(), PQ::l11()).unwrap();
        let e = embed(&m, DEFAULT_EPS_KEEP).unwrap();
        let model = fit(&series, &e, DEFAULT_MODE_BUDGET_BYTES).unwrap();
        assert!(model.is_heuristic());
        let (l22_model, _) = fit_l22(&series);
        assert!(!l22_model.is_heuristic());
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let series = random_series(5, 3, 3, 13);
        let (model, e) = fit_l22(&series);
        assert!(model.reconstruct_frame(5, 1).is_err());
        assert!(model.reconstruct_frame(0, 0).is_err());
        assert!(model.reconstruct_frame(0, e.k_retained() + 1).is_err());
        // Mismatched embedding size.
        let other = random_series(6, 3, 3, 14);
        let m2 = distance_matrix(other.frames(), PQ::l22()).unwrap();
        let e2 = embed(&m2, DEFAULT_EPS_KEEP).unwrap();
        assert!(fit(&series, &e2, DEFAULT_MODE_BUDGET_BYTES).is_err());
    }
}
