//! Deterministic floating-point reductions.
//!
//! All norm and inner-product reductions in this crate go through the pairwise
//! (binary-counter) accumulator below. The summation tree is a function of the
//! element count alone, so results are bit-for-bit reproducible across runs
//! and across thread counts (parallelism, where used, is over independent
//! outputs, never inside a single reduction). Pairwise summation also keeps
//! the rounding error at O(log n) ulps instead of O(n).

/// Streaming pairwise summation with a fixed reduction tree.
///
/// Elements are accumulated in blocks of [`BLOCK`]; completed blocks are merged
/// like a binary counter: partial `i` holds the sum of `BLOCK * 2^i` elements.
/// The final `finish` folds remaining partials lowest-first, which fixes the
/// tree for any trailing partial block.
#[derive(Debug)]
pub struct PairwiseSum {
    partials: [f64; 64],
    /// Bit i set ⇔ `partials[i]` holds a pending block sum.
    occupied: u64,
    block: f64,
    in_block: u32,
}

const BLOCK: u32 = 32;

impl PairwiseSum {
    pub fn new() -> Self {
        PairwiseSum {
            partials: [0.0; 64],
            occupied: 0,
            block: 0.0,
            in_block: 0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        self.block += x;
        self.in_block += 1;
        if self.in_block == BLOCK {
            self.push_block();
        }
    }

    #[inline]
    fn push_block(&mut self) {
        let mut carry = self.block;
        self.block = 0.0;
        self.in_block = 0;
        let mut level = 0;
        while self.occupied & (1 << level) != 0 {
            carry += self.partials[level];
            self.occupied &= !(1 << level);
            level += 1;
        }
        self.partials[level] = carry;
        self.occupied |= 1 << level;
    }

    pub fn finish(mut self) -> f64 {
        // Fold the trailing partial block and then all pending levels,
        // lowest (smallest block) first.
        let mut total = self.block;
        self.block = 0.0;
        for level in 0..64 {
            if self.occupied & (1 << level) != 0 {
                total += self.partials[level];
            }
        }
        total
    }
}

impl Default for PairwiseSum {
    fn default() -> Self {
        Self::new()
    }
}

/// Pairwise-sum an iterator of f64 terms.
#[inline]
pub fn pairwise_sum(it: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = PairwiseSum::new();
    for x in it {
        acc.add(x);
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_exact_small_sums() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(xs.iter().copied()), 5050.0);
    }

    #[test]
    fn deterministic_across_calls() {
        let xs: Vec<f64> = (0..10_000)
            .map(|i| (i as f64 * 0.7391).sin() * 1e3)
            .collect();
        let a = pairwise_sum(xs.iter().copied());
        let b = pairwise_sum(xs.iter().copied());
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn more_accurate_than_naive_on_ill_conditioned_sum() {
        // 1 followed by many tiny values that a naive left fold drops.
        let n = 1 << 20;
        let tiny = 1e-16;
        let mut xs = vec![tiny; n];
        xs[0] = 1.0;
        let exact = 1.0 + (n as f64 - 1.0) * tiny;
        let pairwise = pairwise_sum(xs.iter().copied());
        let naive: f64 = xs.iter().sum();
        assert!((pairwise - exact).abs() <= (naive - exact).abs());
        assert!((pairwise - exact).abs() / exact < 1e-12);
    }

    #[test]
    fn empty_and_partial_blocks() {
        assert_eq!(pairwise_sum(std::iter::empty()), 0.0);
        for n in 1..200 {
            let xs = vec![1.0; n];
            assert_eq!(pairwise_sum(xs.iter().copied()), n as f64);
        }
    }
}
