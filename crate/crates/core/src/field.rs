//! Vector fields over measure spaces and the L^{p,q} norm family.
//!
//! A [`VectorField`] assigns a rank-`d` real vector to every point of a
//! [`MeasureSpace`]. The two-parameter norm family combines a pointwise
//! `q`-norm with a measure-weighted `p`-norm over the space:
//!
//! ```text
//! ‖X‖_{p,q} = ( Σ_s ‖X(s)‖_q^p · μ(s) )^{1/p}        (p finite)
//! ‖X‖_{∞,q} = max over {s : μ(s) > 0} of ‖X(s)‖_q
//! ```
//!
//! with `‖v‖_q = (Σ_i |v_i|^q)^{1/q}` and `‖v‖_∞ = max_i |v_i|`. Exponents
//! live in `[1, ∞]`. All reductions use the deterministic pairwise scheme
//! from [`crate::numeric`], so norms are reproducible bit for bit.

use crate::error::{Error, Result};
use crate::numeric::PairwiseSum;
use crate::space::{MeasureSpace, SpaceKind};
use std::fmt;
use std::sync::Arc;

/// A norm exponent in `[1, ∞]`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    /// Validate and wrap a raw exponent. `f64::INFINITY` maps to
    /// [`Exponent::Infinity`]; finite values must be ≥ 1.
    pub fn new(x: f64) -> Result<Self> {
        if x.is_nan() || x < 1.0 {
            Err(Error::InvalidExponent(format!(
                "exponent must lie in [1, inf], got {x}"
            )))
        } else if x.is_infinite() {
            Ok(Exponent::Infinity)
        } else {
            Ok(Exponent::Finite(x))
        }
    }

    /// The raw value; `∞` maps back to `f64::INFINITY`.
    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(x) => x,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    /// Parse `"inf"` / `"infinity"` / a decimal literal.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Exponent::Infinity);
        }
        let x: f64 = t
            .parse()
            .map_err(|_| Error::InvalidExponent(format!("cannot parse exponent `{s}`")))?;
        Exponent::new(x)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(x) => write!(f, "{x}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

/// The `(p, q)` exponent pair of an L^{p,q} norm.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PQ {
    pub p: Exponent,
    pub q: Exponent,
}

impl PQ {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        Ok(PQ {
            p: Exponent::new(p)?,
            q: Exponent::new(q)?,
        })
    }

    /// The Euclidean member of the family, `L^{2,2}`.
    pub fn l22() -> Self {
        PQ {
            p: Exponent::Finite(2.0),
            q: Exponent::Finite(2.0),
        }
    }

    pub fn l11() -> Self {
        PQ {
            p: Exponent::Finite(1.0),
            q: Exponent::Finite(1.0),
        }
    }

    pub fn is_l22(&self) -> bool {
        self.p == Exponent::Finite(2.0) && self.q == Exponent::Finite(2.0)
    }
}

impl fmt::Display for PQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.p, self.q)
    }
}

/// Boundary handling for the lattice gradient.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Wrap around (periodic domain).
    Periodic,
    /// Treat the out-of-range neighbor as equal to the boundary value,
    /// i.e. the forward difference is zero on the last row/column.
    Clamp,
}

/// Pointwise `q`-norm of a small vector.
#[inline]
pub fn vnorm_q(v: &[f64], q: Exponent) -> f64 {
    match q {
        Exponent::Infinity => v.iter().fold(0.0, |m, &a| m.max(a.abs())),
        Exponent::Finite(q) if q == 1.0 => v.iter().map(|a| a.abs()).sum(),
        Exponent::Finite(q) if q == 2.0 => {
            v.iter().map(|a| a * a).sum::<f64>().sqrt()
        }
        Exponent::Finite(q) => v
            .iter()
            .map(|a| a.abs().powf(q))
            .sum::<f64>()
            .powf(1.0 / q),
    }
}

/// A rank-`d` real vector field over a shared measure space.
///
/// Values are stored point-major (`n_points × rank`, row-major). Two fields
/// are *compatible* iff they live on the same space (same `Arc`, or
/// structurally equal) and have equal rank; all binary operations require
/// compatibility.
#[derive(Debug, Clone)]
pub struct VectorField {
    space: Arc<MeasureSpace>,
    rank: usize,
    values: Vec<f64>,
}

impl VectorField {
    /// Wrap a value buffer as a field. The buffer must hold
    /// `n_points · rank` finite values, point-major.
    pub fn new(space: Arc<MeasureSpace>, rank: usize, values: Vec<f64>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidArgument("field rank must be >= 1".into()));
        }
        let expected = space.n_points() * rank;
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values".into()));
        }
        Ok(VectorField { space, rank, values })
    }

    /// The all-zero field of the given rank.
    pub fn zeros(space: Arc<MeasureSpace>, rank: usize) -> Result<Self> {
        let n = space.n_points() * rank;
        Self::new(space, rank, vec![0.0; n])
    }

    /// Build a field by evaluating `f(point_index) -> [components]`.
    pub fn from_fn<F>(space: Arc<MeasureSpace>, rank: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, &mut [f64]),
    {
        let n = space.n_points();
        let mut values = vec![0.0; n * rank];
        for s in 0..n {
            f(s, &mut values[s * rank..(s + 1) * rank]);
        }
        Self::new(space, rank, values)
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n_points(&self) -> usize {
        self.space.n_points()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// The value vector at point `s`.
    #[inline]
    pub fn value(&self, s: usize) -> &[f64] {
        &self.values[s * self.rank..(s + 1) * self.rank]
    }

    /// Component `c` of the value at point `s`.
    #[inline]
    pub fn at(&self, s: usize, c: usize) -> f64 {
        self.values[s * self.rank + c]
    }

    /// True iff `other` lives on the same space and has the same rank.
    pub fn compatible(&self, other: &Self) -> bool {
        self.rank == other.rank
            && (Arc::ptr_eq(&self.space, &other.space)
                || self.space.same_space(&other.space))
    }

    fn require_compatible(&self, other: &Self, op: &str) -> Result<()> {
        if !self.compatible(other) {
            return Err(Error::IncompatibleFields(format!(
                "{op}: ranks {} vs {} on {} vs {} points",
                self.rank,
                other.rank,
                self.n_points(),
                other.n_points()
            )));
        }
        Ok(())
    }

    /// Pointwise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.require_compatible(other, "add")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(VectorField {
            space: self.space.clone(),
            rank: self.rank,
            values,
        })
    }

    /// Pointwise difference `self − other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.require_compatible(other, "sub")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(VectorField {
            space: self.space.clone(),
            rank: self.rank,
            values,
        })
    }

    /// Pointwise scaling by a finite factor.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scale factor must be finite, got {c}"
            )));
        }
        let values = self.values.iter().map(|a| a * c).collect();
        Ok(VectorField {
            space: self.space.clone(),
            rank: self.rank,
            values,
        })
    }

    /// In-place fused `self += c · other` (used by the reconstruction hot
    /// path); requires compatibility.
    pub fn axpy(&mut self, c: f64, other: &Self) -> Result<()> {
        self.require_compatible(other, "axpy")?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    /// L^{p,q} norm of the field.
    pub fn norm(&self, pq: PQ) -> f64 {
        field_norm_raw(&self.values, self.rank, self.space.weights(), pq)
    }

    /// Measure-weighted inner product `Σ_s ⟨X(s), Y(s)⟩ μ(s)`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.require_compatible(other, "inner")?;
        let w = self.space.weights();
        let r = self.rank;
        let mut acc = PairwiseSum::new();
        for s in 0..self.n_points() {
            let xs = &self.values[s * r..(s + 1) * r];
            let ys = &other.values[s * r..(s + 1) * r];
            let dot: f64 = xs.iter().zip(ys).map(|(a, b)| a * b).sum();
            acc.add(dot * w[s]);
        }
        Ok(acc.finish())
    }

    /// Forward-difference gradient of a lattice field.
    ///
    /// For a rank-`r` field on a `w × h` lattice the result is rank `2r` on
    /// the same space: component `2c` holds the row-direction difference
    /// `X(i+1, j)_c − X(i, j)_c` and component `2c + 1` the column-direction
    /// difference `X(i, j+1)_c − X(i, j)_c` (the Jacobian rows, flattened
    /// row-major). Out-of-range neighbors follow the [`Boundary`] rule.
    pub fn lattice_gradient(&self, boundary: Boundary) -> Result<Self> {
        let (w, h) = match *self.space.kind() {
            SpaceKind::Lattice { width, height } => (width, height),
            _ => {
                return Err(Error::UnsupportedSpace(
                    "lattice_gradient requires a lattice space".into(),
                ))
            }
        };
        let r = self.rank;
        let mut out = vec![0.0; w * h * 2 * r];
        for i in 0..h {
            let inext = if i + 1 < h {
                Some(i + 1)
            } else {
                match boundary {
                    Boundary::Periodic => Some(0),
                    Boundary::Clamp => None,
                }
            };
            for j in 0..w {
                let jnext = if j + 1 < w {
                    Some(j + 1)
                } else {
                    match boundary {
                        Boundary::Periodic => Some(0),
                        Boundary::Clamp => None,
                    }
                };
                let s = i * w + j;
                let here = &self.values[s * r..(s + 1) * r];
                for c in 0..r {
                    let di = match inext {
                        Some(ii) => self.values[(ii * w + j) * r + c] - here[c],
                        None => 0.0,
                    };
                    let dj = match jnext {
                        Some(jj) => self.values[(i * w + jj) * r + c] - here[c],
                        None => 0.0,
                    };
                    out[s * 2 * r + 2 * c] = di;
                    out[s * 2 * r + 2 * c + 1] = dj;
                }
            }
        }
        Ok(VectorField {
            space: self.space.clone(),
            rank: 2 * r,
            values: out,
        })
    }

    /// Extract a single component as a rank-1 field.
    pub fn component(&self, c: usize) -> Result<Self> {
        if c >= self.rank {
            return Err(Error::InvalidArgument(format!(
                "component {c} out of range for rank {}",
                self.rank
            )));
        }
        let values = (0..self.n_points()).map(|s| self.at(s, c)).collect();
        Ok(VectorField {
            space: self.space.clone(),
            rank: 1,
            values,
        })
    }

    /// Map each point's value vector to a scalar, producing a rank-1 field.
    pub fn map_to_scalar<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&[f64]) -> f64,
    {
        let values = (0..self.n_points()).map(|s| f(self.value(s))).collect();
        VectorField {
            space: self.space.clone(),
            rank: 1,
            values,
        }
    }
}

/// L^{p,q} norm over raw storage; shared by [`VectorField::norm`] and the
/// allocation-free distance kernel in [`crate::metrics`].
pub(crate) fn field_norm_raw(values: &[f64], rank: usize, weights: &[f64], pq: PQ) -> f64 {
    debug_assert_eq!(values.len(), rank * weights.len());
    match pq.p {
        Exponent::Infinity => {
            let mut m = 0.0_f64;
            for (s, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    let v = vnorm_q(&values[s * rank..(s + 1) * rank], pq.q);
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
                    acc.add(vnorm_q(&values[s * rank..(s + 1) * rank], pq.q) * w);
                }
                acc.finish()
            } else if p == 2.0 {
                for (s, &w) in weights.iter().enumerate() {
                    let v = vnorm_q(&values[s * rank..(s + 1) * rank], pq.q);
                    acc.add(v * v * w);
                }
                acc.finish().sqrt()
            } else {
                for (s, &w) in weights.iter().enumerate() {
                    let v = vnorm_q(&values[s * rank..(s + 1) * rank], pq.q);
                    acc.add(v.powf(p) * w);
                }
                acc.finish().powf(1.0 / p)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_point_space() -> Arc<MeasureSpace> {
        Arc::new(MeasureSpace::generic(vec![1.0, 2.0]).unwrap())
    }

    #[test]
    fn exponent_validation_and_parse() {
        assert!(Exponent::new(0.5).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
        assert_eq!(Exponent::new(f64::INFINITY).unwrap(), Exponent::Infinity);
        assert_eq!(Exponent::parse("inf").unwrap(), Exponent::Infinity);
        assert_eq!(Exponent::parse("2").unwrap(), Exponent::Finite(2.0));
        assert!(PQ::new(2.0, 0.0).is_err());
    }

    #[test]
    fn vnorm_hand_values() {
        let v = [3.0, -4.0];
        assert_eq!(vnorm_q(&v, Exponent::Finite(1.0)), 7.0);
        assert_eq!(vnorm_q(&v, Exponent::Finite(2.0)), 5.0);
        assert_eq!(vnorm_q(&v, Exponent::Infinity), 4.0);
        // q = 3: (27 + 64)^(1/3) = 91^(1/3) = 4.497941445275415
        assert_relative_eq!(
            vnorm_q(&v, Exponent::Finite(3.0)),
            4.497941445275415,
            max_relative = 1e-14
        );
    }

    #[test]
    fn field_norm_hand_values() {
        // Two points with weights (1, 2); scalar field X = [1, 3].
        // L^{2,2}: sqrt(1²·1 + 3²·2) = sqrt(19) = 4.358898943540674
        // L^{1,1}: |1|·1 + |3|·2 = 7
        // L^{∞,∞}: max(1, 3) = 3
        let space = two_point_space();
        let x = VectorField::new(space.clone(), 1, vec![1.0, 3.0]).unwrap();
        assert_relative_eq!(
            x.norm(PQ::l22()),
            4.358898943540674,
            max_relative = 1e-15
        );
        assert_eq!(x.norm(PQ::l11()), 7.0);
        assert_eq!(x.norm(PQ::new(f64::INFINITY, f64::INFINITY).unwrap()), 3.0);
        // p = 3, q = 2 on the same field: (1·1 + 27·2)^(1/3) = 55^(1/3).
        assert_relative_eq!(
            x.norm(PQ::new(3.0, 2.0).unwrap()),
            55.0_f64.powf(1.0 / 3.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn inf_norm_skips_zero_measure_points() {
        let space = Arc::new(MeasureSpace::generic(vec![0.0, 2.0]).unwrap());
        let x = VectorField::new(space, 1, vec![100.0, 3.0]).unwrap();
        // The 100 at the zero-weight point must not dominate the max.
        assert_eq!(x.norm(PQ::new(f64::INFINITY, f64::INFINITY).unwrap()), 3.0);
        // ... but finite p simply weights it out too.
        assert_relative_eq!(
            x.norm(PQ::l22()),
            (9.0_f64 * 2.0).sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn inner_product_hand_value() {
        // X = [1, 3], Y = [2, 1], weights (1, 2):
        // ⟨X,Y⟩ = 1·2·1 + 3·1·2 = 8.
        let space = two_point_space();
        let x = VectorField::new(space.clone(), 1, vec![1.0, 3.0]).unwrap();
        let y = VectorField::new(space, 1, vec![2.0, 1.0]).unwrap();
        assert_eq!(x.inner(&y).unwrap(), 8.0);
        assert_eq!(y.inner(&x).unwrap(), 8.0);
        // ⟨X,X⟩ = ‖X‖²_{2,2}.
        let n = x.norm(PQ::l22());
        assert_relative_eq!(x.inner(&x).unwrap(), n * n, max_relative = 1e-14);
    }

    #[test]
    fn incompatible_fields_rejected() {
        let a = Arc::new(MeasureSpace::lattice(2, 2).unwrap());
        let b = Arc::new(MeasureSpace::lattice(2, 3).unwrap());
        let x = VectorField::zeros(a.clone(), 1).unwrap();
        let y = VectorField::zeros(b, 1).unwrap();
        let z = VectorField::zeros(a, 2).unwrap();
        assert!(x.add(&y).is_err());
        assert!(x.inner(&z).is_err());
    }

    #[test]
    fn structurally_equal_spaces_are_compatible() {
        let a = Arc::new(MeasureSpace::lattice(4, 4).unwrap());
        let b = Arc::new(MeasureSpace::lattice(4, 4).unwrap());
        let x = VectorField::zeros(a, 2).unwrap();
        let y = VectorField::zeros(b, 2).unwrap();
        assert!(x.compatible(&y));
        assert!(x.add(&y).is_ok());
    }

    #[test]
    fn rejects_non_finite_values() {
        let space = two_point_space();
        assert!(VectorField::new(space, 1, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn gradient_of_column_ramp() {
        // 4×4 lattice, X(i,j) = j. Forward differences:
        // row direction contributes 0 everywhere; column direction 1, except
        // at the last column where Clamp gives 0 and Periodic gives
        // X(i,0) − X(i,3) = −3.
        let space = Arc::new(MeasureSpace::lattice(4, 4).unwrap());
        let x = VectorField::from_fn(space, 1, |s, out| {
            out[0] = (s % 4) as f64;
        })
        .unwrap();

        let clamp = x.lattice_gradient(Boundary::Clamp).unwrap();
        assert_eq!(clamp.rank(), 2);
        for i in 0..4 {
            for j in 0..4 {
                let s = i * 4 + j;
                assert_eq!(clamp.at(s, 0), 0.0);
                assert_eq!(clamp.at(s, 1), if j == 3 { 0.0 } else { 1.0 });
            }
        }

        let per = x.lattice_gradient(Boundary::Periodic).unwrap();
        for i in 0..4 {
            assert_eq!(per.at(i * 4 + 3, 1), -3.0);
            assert_eq!(per.at(i * 4 + 1, 1), 1.0);
        }
    }

    #[test]
    fn gradient_rank_doubles_and_interleaves() {
        // Rank-2 field: component 0 ramps along rows, component 1 along
        // columns. Output layout: (d0/di, d0/dj, d1/di, d1/dj).
        let space = Arc::new(MeasureSpace::lattice(3, 3).unwrap());
        let x = VectorField::from_fn(space, 2, |s, out| {
            out[0] = (s / 3) as f64; // row index
            out[1] = (s % 3) as f64; // column index
        })
        .unwrap();
        let g = x.lattice_gradient(Boundary::Clamp).unwrap();
        assert_eq!(g.rank(), 4);
        // Interior point (1,1) = index 4.
        assert_eq!(g.value(4), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn gradient_requires_lattice() {
        let space = two_point_space();
        let x = VectorField::zeros(space, 1).unwrap();
        assert!(x.lattice_gradient(Boundary::Clamp).is_err());
    }

    #[test]
    fn component_extraction() {
        let space = two_point_space();
        let x = VectorField::new(space, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let c1 = x.component(1).unwrap();
        assert_eq!(c1.values(), &[2.0, 4.0]);
        assert!(x.component(2).is_err());
    }
}
