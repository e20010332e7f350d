//! Largest-Lyapunov-exponent estimation from a scalar time series.
//!
//! The approach is the classical nearest-neighbor divergence method: embed
//! the series with delays, pair every point with its nearest neighbor
//! outside a Theiler exclusion window, and track the mean log separation
//! `y(k) = ⟨ln ‖X_{i+k} − X_{j+k}‖⟩` as the pairs evolve. For a chaotic
//! signal the early part of the curve grows linearly with slope λ (per
//! sample) before saturating at the attractor diameter; for regular signals
//! the curve stays flat or decays. A least-squares fit over the
//! pre-saturation segment gives the exponent, reported both per sample and
//! per unit time.
//!
//! Everything is deterministic: neighbor ties resolve to the smallest
//! index, and all means use the fixed pairwise reduction.

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use rayon::prelude::*;

/// Tuning for [`estimate_lyapunov`]. `None` fields are derived from the
/// data: the delay from the first autocorrelation minimum (capped at a
/// tenth of the series), the Theiler window from the delay, the horizon
/// from the vector count, and the fit range from the shape of the
/// divergence curve.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovParams {
    pub embedding_dim: usize,
    pub delay: Option<usize>,
    pub theiler: Option<usize>,
    /// Number of forward iterations tracked in the divergence curve.
    pub horizon: Option<usize>,
    /// Inclusive index range of the curve used for the slope fit.
    pub fit_range: Option<(usize, usize)>,
    /// Time per sample; `lambda_per_time = lambda_per_sample / dt`.
    pub dt: f64,
}

impl Default for LyapunovParams {
    fn default() -> Self {
        LyapunovParams {
            embedding_dim: 3,
            delay: None,
            theiler: None,
            horizon: None,
            fit_range: None,
            dt: 1.0,
        }
    }
}

/// Result of a divergence-curve fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    pub lambda_per_sample: f64,
    pub lambda_per_time: f64,
    /// Goodness of the linear fit over `fit_range`.
    pub r_squared: f64,
    /// Mean log separation per forward iteration, starting at k = 0.
    pub curve: Vec<f64>,
    pub delay: usize,
    pub theiler: usize,
    pub embedding_dim: usize,
    pub fit_range: (usize, usize),
}

/// Delay from the autocorrelation: the first zero crossing or the first
/// local minimum, whichever comes first, capped at `cap`. Taking the zero
/// crossing matters for oscillatory signals — their first ACF *minimum* is
/// the half period, which folds the delay embedding onto a line (for a tone,
/// `x(t+π/ω) = −x(t)`), while the quarter-period crossing spreads it onto a
/// proper ellipse.
fn autocorrelation_delay(x: &[f64], cap: usize) -> usize {
    let n = x.len();
    let mean = pairwise_sum(x.iter().copied()) / n as f64;
    let var = pairwise_sum(x.iter().map(|&v| (v - mean) * (v - mean)));
    if var <= 0.0 {
        return 1;
    }
    let rho = |tau: usize| -> f64 {
        pairwise_sum(
            x[..n - tau]
                .iter()
                .zip(&x[tau..])
                .map(|(&a, &b)| (a - mean) * (b - mean)),
        ) / var
    };
    let cap = cap.max(1);
    let mut prev = f64::INFINITY;
    for tau in 1..=cap {
        let cur = rho(tau);
        if cur <= 0.0 {
            return tau;
        }
        if cur > prev {
            return tau - 1;
        }
        prev = cur;
    }
    cap
}

/// Least-squares line through `(k, y[k])` for `lo ≤ k ≤ hi`; returns
/// `(slope, r_squared)`.
fn fit_slope(y: &[f64], lo: usize, hi: usize) -> (f64, f64) {
    let n = (hi - lo + 1) as f64;
    let xs = || (lo..=hi).map(|k| k as f64);
    let x_mean = pairwise_sum(xs()) / n;
    let y_mean = pairwise_sum(y[lo..=hi].iter().copied()) / n;
    let sxy = pairwise_sum(
        xs().zip(&y[lo..=hi])
            .map(|(x, &v)| (x - x_mean) * (v - y_mean)),
    );
    let sxx = pairwise_sum(xs().map(|x| (x - x_mean) * (x - x_mean)));
    let slope = sxy / sxx;
    let ss_tot = pairwise_sum(y[lo..=hi].iter().map(|&v| (v - y_mean) * (v - y_mean)));
    let ss_res = pairwise_sum(xs().zip(&y[lo..=hi]).map(|(x, &v)| {
        let fit = y_mean + slope * (x - x_mean);
        (v - fit) * (v - fit)
    }));
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, r2)
}

/// A curve is treated as "diverging" only when it rises this much above its
/// start; flatter curves are fit across their whole length so slow drifts
/// and sampling noise average out.
const MIN_RISE: f64 = 0.5;

/// Fraction of the total rise that marks saturation.
const SATURATION_FRACTION: f64 = 0.9;

/// Automatic fit range: the first third of the pre-saturation rise, or the
/// full curve when there is no meaningful rise.
fn auto_fit_range(curve: &[f64]) -> (usize, usize) {
    let last = curve.len() - 1;
    if last < 3 {
        return (0, last);
    }
    let y0 = curve[0];
    let y_max = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rise = y_max - y0;
    if rise < MIN_RISE {
        return (0, last);
    }
    let target = y0 + SATURATION_FRACTION * rise;
    let k_sat = curve
        .iter()
        .position(|&y| y >= target)
        .unwrap_or(last)
        .max(1);
    (0, (k_sat / 3).max(3).min(last))
}

/// Estimate the largest Lyapunov exponent of a scalar series.
pub fn estimate_lyapunov(series: &[f64], params: &LyapunovParams) -> Result<LyapunovEstimate> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lyapunov input series".into()));
    }
    if params.embedding_dim == 0 {
        return Err(Error::InvalidArgument("embedding_dim must be >= 1".into()));
    }
    if !(params.dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let n = series.len();
    let dim = params.embedding_dim;

    let delay = match params.delay {
        Some(0) => return Err(Error::InvalidArgument("delay must be >= 1".into())),
        Some(d) => d,
        None => autocorrelation_delay(series, (n / 10).max(1)),
    };
    let theiler = params.theiler.unwrap_or(delay);

    let span = (dim - 1) * delay;
    if n <= span + 2 * theiler + 2 {
        return Err(Error::InvalidArgument(format!(
            "series of {n} samples is too short for embedding_dim {dim}, delay {delay}, theiler {theiler}"
        )));
    }
    let m = n - span;
    let point = |i: usize, d: usize| series[i + d * delay];
    let dist2 = |i: usize, j: usize| -> f64 {
        let mut acc = 0.0;
        for d in 0..dim {
            let diff = point(i, d) - point(j, d);
            acc += diff * diff;
        }
        acc
    };

    // Nearest neighbor of each vector outside the Theiler window, at a
    // strictly positive distance. Ties go to the smallest index.
    let neighbors: Vec<Option<usize>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut best: Option<(f64, usize)> = None;
            for j in 0..m {
                let gap = i.abs_diff(j);
                if gap <= theiler {
                    continue;
                }
                let d2 = dist2(i, j);
                if d2 > 0.0 && best.map_or(true, |(bd, _)| d2 < bd) {
                    best = Some((d2, j));
                }
            }
            best.map(|(_, j)| j)
        })
        .collect();

    let horizon = params
        .horizon
        .unwrap_or_else(|| (m / 10).max(20).min(500))
        .min(m - 1);

    // Mean log separation per forward iteration, over pairs still inside
    // the series and still separated.
    let curve: Vec<f64> = (0..=horizon)
        .into_par_iter()
        .map(|k| {
            let logs = (0..m).filter_map(|i| {
                let j = neighbors[i]?;
                if i + k >= m || j + k >= m {
                    return None;
                }
                let d2 = dist2(i + k, j + k);
                (d2 > 0.0).then(|| 0.5 * d2.ln())
            });
            let mut count = 0usize;
            let total = pairwise_sum(logs.inspect(|_| count += 1));
            if count == 0 {
                f64::NAN
            } else {
                total / count as f64
            }
        })
        .collect();

    let valid = curve.iter().take_while(|y| y.is_finite()).count();
    if valid < 2 {
        return Err(Error::InvalidArgument(
            "divergence curve is empty; series has no usable neighbor pairs".into(),
        ));
    }
    let curve = curve[..valid].to_vec();

    let fit_range = match params.fit_range {
        Some((lo, hi)) => {
            if lo >= hi || hi >= curve.len() {
                return Err(Error::InvalidArgument(format!(
                    "fit range {lo}..={hi} is not a valid segment of the {}-point curve",
                    curve.len()
                )));
            }
            (lo, hi)
        }
        None => auto_fit_range(&curve),
    };
    let (slope, r_squared) = fit_slope(&curve, fit_range.0, fit_range.1);

    Ok(LyapunovEstimate {
        lambda_per_sample: slope,
        lambda_per_time: slope / params.dt,
        r_squared,
        curve,
        delay,
        theiler,
        embedding_dim: dim,
        fit_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic(n: usize, x0: f64) -> Vec<f64> {
        let mut x = x0;
        // Discard a transient so the samples sit on the invariant measure.
        for _ in 0..100 {
            x = 4.0 * x * (1.0 - x);
        }
        (0..n)
            .map(|_| {
                let cur = x;
                x = 4.0 * x * (1.0 - x);
                cur
            })
            .collect()
    }

    #[test]
    fn logistic_map_exponent_is_ln_two() {
        // The fully chaotic logistic map has λ = ln 2 exactly.
        let series = logistic(5000, 0.63);
        let est = estimate_lyapunov(&series, &LyapunovParams::default()).unwrap();
        assert!(
            (est.lambda_per_sample - std::f64::consts::LN_2).abs() <= 0.1,
            "λ = {} (expected ln 2 ≈ 0.693)",
            est.lambda_per_sample
        );
        assert!(est.r_squared > 0.9, "poor fit: R² = {}", est.r_squared);
        // dt = 1 makes the two readings identical.
        assert_eq!(est.lambda_per_sample, est.lambda_per_time);
    }

    #[test]
    fn sinusoid_exponent_is_negligible() {
        let dt = 0.05;
        let series: Vec<f64> = (0..5000).map(|k| (k as f64 * dt).sin()).collect();
        let est = estimate_lyapunov(
            &series,
            &LyapunovParams {
                dt,
                ..LyapunovParams::default()
            },
        )
        .unwrap();
        assert!(
            est.lambda_per_time.abs() <= 0.01,
            "λ per time = {} (expected ~0)",
            est.lambda_per_time
        );
    }

    #[test]
    fn sinusoid_delay_lands_near_the_quarter_period() {
        // Autocorrelation of sin is cos(ωτ); its first zero crossing is a
        // quarter period: (π/2) / 0.05 ≈ 31 samples.
        let series: Vec<f64> = (0..5000).map(|k| (k as f64 * 0.05).sin()).collect();
        let est = estimate_lyapunov(&series, &LyapunovParams::default()).unwrap();
        assert!(
            (28..=36).contains(&est.delay),
            "delay = {} (expected ≈ 31)",
            est.delay
        );
        assert_eq!(est.theiler, est.delay);
    }

    #[test]
    fn per_time_reading_rescales_with_dt() {
        let series = logistic(2000, 0.41);
        let base = estimate_lyapunov(&series, &LyapunovParams::default()).unwrap();
        let halved = estimate_lyapunov(
            &series,
            &LyapunovParams {
                dt: 0.5,
                ..LyapunovParams::default()
            },
        )
        .unwrap();
        assert_eq!(base.lambda_per_sample, halved.lambda_per_sample);
        assert_eq!(halved.lambda_per_time, 2.0 * base.lambda_per_sample);
    }

    #[test]
    fn explicit_overrides_are_respected() {
        let series = logistic(2000, 0.2);
        let params = LyapunovParams {
            delay: Some(2),
            theiler: Some(5),
            horizon: Some(30),
            fit_range: Some((0, 4)),
            ..LyapunovParams::default()
        };
        let est = estimate_lyapunov(&series, &params).unwrap();
        assert_eq!(est.delay, 2);
        assert_eq!(est.theiler, 5);
        assert_eq!(est.curve.len(), 31);
        assert_eq!(est.fit_range, (0, 4));
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(estimate_lyapunov(&[1.0, f64::NAN, 2.0], &LyapunovParams::default()).is_err());
        // Too short for the embedding.
        assert!(estimate_lyapunov(&[1.0; 8], &LyapunovParams::default()).is_err());
        // Constant series has no positive-distance neighbors.
        assert!(estimate_lyapunov(&[1.0; 500], &LyapunovParams::default()).is_err());
        // Bad explicit ranges.
        let series = logistic(1000, 0.3);
        let bad = LyapunovParams {
            fit_range: Some((5, 5)),
            ..LyapunovParams::default()
        };
        assert!(estimate_lyapunov(&series, &bad).is_err());
        let zero_delay = LyapunovParams {
            delay: Some(0),
            ..LyapunovParams::default()
        };
        assert!(estimate_lyapunov(&series, &zero_delay).is_err());
    }

    #[test]
    fn contracting_pairs_give_a_negative_slope() {
        // A damped oscillation: neighbor separations shrink, so the fitted
        // exponent must come out negative.
        let series: Vec<f64> = (0..4000)
            .map(|k| {
                let t = k as f64 * 0.05;
                (-0.02 * t).exp() * t.sin()
            })
            .collect();
        let est = estimate_lyapunov(&series, &LyapunovParams::default()).unwrap();
        assert!(
            est.lambda_per_sample < 0.0,
            "expected contraction, got λ = {}",
            est.lambda_per_sample
        );
    }
}
