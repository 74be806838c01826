//! Compensated summation.
//!
//! Every series in the crate is accumulated with a Neumaier accumulator in
//! ascending index order, so results do not depend on thread count or
//! chunking.

use core::ops::{Add, AddAssign};

/// Kahan–Babuška–Neumaier running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    s: f64,
    c: f64,
}

impl NeumaierSum {
    pub const fn new() -> Self {
        Self { s: 0.0, c: 0.0 }
    }

    pub fn sum(&self) -> f64 {
        self.s + self.c
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, rhs: f64) {
        let t = self.s + rhs;
        if libm::fabs(self.s) >= libm::fabs(rhs) {
            self.c += (self.s - t) + rhs;
        } else {
            self.c += (rhs - t) + self.s;
        }
        self.s = t;
    }
}

impl Add<f64> for NeumaierSum {
    type Output = Self;

    fn add(mut self, rhs: f64) -> Self {
        self += rhs;
        self
    }
}

impl core::iter::Sum<f64> for NeumaierSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        iter.fold(NeumaierSum::new(), |acc, x| acc + x)
    }
}

/// Compensated sum of an iterator, in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().sum::<NeumaierSum>().sum()
}

/// Sum that keeps positive and negative contributions apart, so the amount
/// of cancellation can be inspected after the fact.
#[derive(Debug, Default, Clone, Copy)]
pub struct SplitSum {
    pos: NeumaierSum,
    neg: NeumaierSum,
}

impl SplitSum {
    pub fn push(&mut self, x: f64) {
        if x >= 0.0 {
            self.pos += x;
        } else {
            self.neg += x;
        }
    }

    pub fn sum(&self) -> f64 {
        self.pos.sum() + self.neg.sum()
    }

    /// Sum of absolute values of everything pushed.
    pub fn magnitude(&self) -> f64 {
        self.pos.sum() - self.neg.sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let naive: f64 = [1.0, 1e100, 1.0, -1e100].iter().sum();
        assert_eq!(naive, 0.0);
        assert_eq!(compensated_sum([1.0, 1e100, 1.0, -1e100]), 2.0);
    }

    #[test]
    fn split_sum_tracks_magnitude() {
        let mut s = SplitSum::default();
        for x in [3.0, -1.0, 0.5, -2.5] {
            s.push(x);
        }
        assert_eq!(s.sum(), 0.0);
        assert_eq!(s.magnitude(), 7.0);
    }
}
