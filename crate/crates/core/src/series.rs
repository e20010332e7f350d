//! Time-ordered sequences of fields on a shared space.

use crate::error::{Error, Result};
use crate::field::{PQ, VectorField};
use crate::space::MeasureSpace;
use std::sync::Arc;

/// Round `t / dt` to an integer step count, failing loudly on misalignment.
/// Shared by the simulators to lay out exact emission grids.
pub(crate) fn steps_of(t: f64, dt: f64, what: &str) -> Result<usize> {
    let raw = t / dt;
    let steps = raw.round();
    if (raw - steps).abs() > 1e-6 * raw.abs().max(1.0) || steps < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "{what} = {t} is not a non-negative integer multiple of dt = {dt}"
        )));
    }
    Ok(steps as usize)
}

/// A non-empty sequence of mutually compatible frames with strictly
/// increasing timestamps.
#[derive(Debug, Clone)]
pub struct FieldSeries {
    frames: Vec<VectorField>,
    timestamps: Vec<f64>,
}

impl FieldSeries {
    /// Wrap frames with explicit timestamps.
    pub fn new(frames: Vec<VectorField>, timestamps: Vec<f64>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidArgument("empty field series".into()));
        }
        if frames.len() != timestamps.len() {
            return Err(Error::InvalidArgument(format!(
                "{} frames but {} timestamps",
                frames.len(),
                timestamps.len()
            )));
        }
        for (i, f) in frames.iter().enumerate().skip(1) {
            if !frames[0].compatible(f) {
                return Err(Error::IncompatibleFields(format!(
                    "frame {i} does not match frame 0 (space or rank)"
                )));
            }
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(format!(
                    "timestamps must increase strictly: t[{}] = {} >= t[{}] = {}",
                    i,
                    w[0],
                    i + 1,
                    w[1]
                )));
            }
        }
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("series timestamps".into()));
        }
        Ok(FieldSeries { frames, timestamps })
    }

    /// Wrap frames sampled uniformly: `t_i = t0 + i · stride`.
    pub fn with_uniform_times(frames: Vec<VectorField>, t0: f64, stride: f64) -> Result<Self> {
        if !(stride > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "stride must be positive, got {stride}"
            )));
        }
        let ts = (0..frames.len()).map(|i| t0 + i as f64 * stride).collect();
        Self::new(frames, ts)
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, i: usize) -> &VectorField {
        &self.frames[i]
    }

    pub fn frames(&self) -> &[VectorField] {
        &self.frames
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        self.frames[0].space()
    }

    pub fn rank(&self) -> usize {
        self.frames[0].rank()
    }

    /// The common frame spacing, if the sampling is uniform (1e-9 relative).
    pub fn uniform_stride(&self) -> Option<f64> {
        if self.timestamps.len() < 2 {
            return None;
        }
        let dt = self.timestamps[1] - self.timestamps[0];
        for w in self.timestamps.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0) {
                return None;
            }
        }
        Some(dt)
    }

    /// Arithmetic mean of all frames (the centroid used by reconstruction).
    pub fn mean_field(&self) -> VectorField {
        let mut mean = self.frames[0].clone();
        for f in &self.frames[1..] {
            // Compatibility was checked at construction.
            mean.axpy(1.0, f).expect("frames are compatible");
        }
        mean.scale(1.0 / self.frames.len() as f64)
            .expect("finite factor")
    }

    /// Per-frame L^{p,q} norms (e.g. the scalar series fed to the Lyapunov
    /// estimator).
    pub fn norm_series(&self, pq: PQ) -> Vec<f64> {
        self.frames.iter().map(|f| f.norm(pq)).collect()
    }

    /// Apply a scalarization to every frame, keeping the timestamps.
    pub fn map_to_scalar<F>(&self, mut f: F) -> FieldSeries
    where
        F: FnMut(&[f64]) -> f64,
    {
        let frames = self
            .frames
            .iter()
            .map(|fr| fr.map_to_scalar(&mut f))
            .collect();
        FieldSeries {
            frames,
            timestamps: self.timestamps.clone(),
        }
    }
}
