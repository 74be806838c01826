use alloc::string::String;
use alloc::vec::Vec;

use crate::sum::{compensated_sum, NeumaierSum};

/// Truncated probability mass function on `{offset, offset+1, …}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePmf {
    pub label: String,
    /// Support point of `mass[0]`.
    pub offset: u64,
    pub mass: Vec<f64>,
    /// `1 − Σ mass`: probability not represented by the stored entries.
    pub tail_mass: f64,
}

impl DiscretePmf {
    pub fn new(label: impl Into<String>, offset: u64, mass: Vec<f64>) -> Self {
        let tail_mass = 1.0 - compensated_sum(mass.iter().copied());
        Self {
            label: label.into(),
            offset,
            mass,
            tail_mass,
        }
    }

    /// `P(X = k)`, zero outside the stored range.
    pub fn prob(&self, k: u64) -> f64 {
        if k < self.offset {
            return 0.0;
        }
        self.mass.get((k - self.offset) as usize).copied().unwrap_or(0.0)
    }

    /// Last stored support point.
    pub fn max_index(&self) -> u64 {
        self.offset + self.mass.len() as u64 - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.mass.iter().enumerate().map(move |(i, &p)| (self.offset + i as u64, p))
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.mass.iter().copied())
    }

    /// Mean over the stored entries (ignores the tail remainder).
    pub fn mean(&self) -> f64 {
        compensated_sum(self.iter().map(|(k, p)| k as f64 * p))
    }

    /// Support point with the largest mass; the smallest one on ties.
    pub fn mode(&self) -> u64 {
        let mut best = 0;
        for (i, &p) in self.mass.iter().enumerate() {
            if p > self.mass[best] {
                best = i;
            }
        }
        self.offset + best as u64
    }

    /// Smallest `k` with `P(X ≤ k) ≥ level`, or `None` if the stored mass
    /// never reaches `level`.
    pub fn quantile(&self, level: f64) -> Option<u64> {
        let mut acc = NeumaierSum::new();
        for (k, p) in self.iter() {
            acc += p;
            if acc.sum() >= level {
                return Some(k);
            }
        }
        None
    }

    /// Entries in `[0, 1]` (within `tol`) and `−tol ≤ tail_mass < bound`.
    pub fn is_valid(&self, bound: f64, tol: f64) -> bool {
        self.mass.iter().all(|&p| p >= -tol && p <= 1.0 + tol)
            && self.tail_mass >= -tol
            && self.tail_mass < bound
    }
}
