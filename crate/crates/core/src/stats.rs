//! Empirical summaries of simulated records: count histograms, means with
//! standard errors, ccdfs and tail-slope fits.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use libm::{log, sqrt};
use thiserror::Error;

use crate::sim::TaggedBatchRecord;
use crate::sum::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StatsError {
    #[error("no records to summarize")]
    Empty,
    #[error("tail fit window holds {points} points, at least {required} needed")]
    InsufficientTailData { points: usize, required: usize },
    #[error("tail fit abscissae have zero variance")]
    ZeroVariance,
}

/// Minimum number of order statistics in a tail-fit window.
pub const MIN_TAIL_POINTS: usize = 100;

/// Default fit window: between these two empirical quantile levels.
pub const DEFAULT_TAIL_WINDOW: (f64, f64) = (1.0 - 1e-2, 1.0 - 1e-4);

/// Counts on `0, 1, 2, …`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Histogram {
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, k: u64) {
        let k = k as usize;
        if k >= self.counts.len() {
            self.counts.resize(k + 1, 0);
        }
        self.counts[k] += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, k: u64) -> u64 {
        self.counts.get(k as usize).copied().unwrap_or(0)
    }

    /// Largest value observed (0 when empty).
    pub fn max_value(&self) -> u64 {
        self.counts.len().saturating_sub(1) as u64
    }

    /// Relative frequency of `k`.
    pub fn freq(&self, k: u64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.count(k) as f64 / self.total as f64
    }

    /// Binomial standard error of [`Self::freq`] at a hypothesised
    /// probability `p`.
    pub fn binomial_se(&self, p: f64) -> f64 {
        sqrt(p * (1.0 - p) / self.total as f64)
    }

    /// Most frequent value; the smallest one on ties.
    pub fn mode(&self) -> u64 {
        let mut best = 0;
        for (k, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = k;
            }
        }
        best as u64
    }

    /// Empirical `P(X > k)`.
    pub fn ccdf(&self, k: u64) -> f64 {
        let above: u64 = self.counts.iter().skip(k as usize + 1).sum();
        above as f64 / self.total as f64
    }

    pub fn mean(&self) -> f64 {
        let s: NeumaierSum = self.counts.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum();
        s.sum() / self.total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

impl MeanEstimate {
    /// Two-sided normal interval `mean ± z·se`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.std_error, self.mean + z * self.std_error)
    }
}

/// Running first and second moments.
#[derive(Debug, Clone, Default)]
pub struct Moments {
    n: u64,
    sum: NeumaierSum,
    sum_sq: NeumaierSum,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum.sum();
        self.sum_sq += other.sum_sq.sum();
    }

    pub fn estimate(&self) -> MeanEstimate {
        let n = self.n as f64;
        let mean = self.sum.sum() / n;
        let var = if self.n > 1 {
            ((self.sum_sq.sum() - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        MeanEstimate {
            mean,
            std_error: sqrt(var / n),
            n: self.n,
        }
    }
}

/// Least-squares line through `(x, ln P̂(X > x))` over a tail window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    /// Ordinary least-squares standard error (treats the points as
    /// independent, so it understates the true spread).
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

/// Empirical survival function `P̂(X > x)` of ascending `sorted` data.
pub fn ccdf_sorted(sorted: &[f64], x: f64) -> f64 {
    let at_most = sorted.partition_point(|&v| v <= x);
    (sorted.len() - at_most) as f64 / sorted.len() as f64
}

/// Fit the log-ccdf slope over order statistics between the empirical
/// quantiles `window.0` and `window.1` of ascending `sorted` data.
///
/// With `power` nonzero the ordinate is `ln(P̂ · x^power)` instead, which
/// removes a known algebraic prefactor from the slope.
pub fn fit_tail_slope(sorted: &[f64], window: (f64, f64), power: f64) -> Result<TailFit, StatsError> {
    let n = sorted.len();
    if n == 0 {
        return Err(StatsError::Empty);
    }
    let lo = ((window.0 * n as f64) as usize).min(n);
    let hi = ((window.1 * n as f64) as usize).min(n);
    let points = hi.saturating_sub(lo);
    if points < MIN_TAIL_POINTS {
        return Err(StatsError::InsufficientTailData {
            points,
            required: MIN_TAIL_POINTS,
        });
    }
    // order statistic i (0-based) has (n − i) values at or above it
    let y_of = |i: usize| {
        let x = sorted[i];
        let mut y = log((n - i) as f64 / n as f64);
        if power != 0.0 {
            y += power * log(x);
        }
        y
    };
    let k = points as f64;
    let mean_x = sorted[lo..hi].iter().sum::<f64>() / k;
    let mean_y = (lo..hi).map(y_of).sum::<f64>() / k;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in lo..hi {
        let dx = sorted[i] - mean_x;
        sxx += dx * dx;
        sxy += dx * (y_of(i) - mean_y);
    }
    if !(sxx > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let rss: f64 = (lo..hi)
        .map(|i| {
            let r = y_of(i) - intercept - slope * sorted[i];
            r * r
        })
        .sum();
    Ok(TailFit {
        slope,
        intercept,
        std_error: sqrt(rss / (k - 2.0) / sxx),
        lower: sorted[lo],
        upper: sorted[hi - 1],
        points,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic of two ascending samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic KS critical value `c(α)·√((n+m)/(nm))` with
/// `c(α) = √(−ln(α/2)/2)`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = sqrt(-log(alpha / 2.0) / 2.0);
    c * sqrt((n + m) as f64 / (n as f64 * m as f64))
}

/// Mergeable running summary of tagged-batch records.
#[derive(Debug, Clone)]
pub struct TaggedAccumulator {
    pub n0: Histogram,
    pub b: Histogram,
    pub m_tilde: Histogram,
    pub i_b: Histogram,
    pub j: Histogram,
    pub omega: Moments,
    pub omega_hat: Moments,
    pub t_tilde: Moments,
    pub w_min: Moments,
    pub w_median: Moments,
    pub w_max: Moments,
    /// Every tagged job sojourn, pooled.
    pub w_all: Moments,
    pub omega_samples: Vec<f64>,
    pub omega_hat_samples: Vec<f64>,
    /// `J` histograms per `(b, m̃)` cell with `m̃ ≤ cell_m_max`.
    pub cells: BTreeMap<(u64, u64), Histogram>,
    pub cell_m_max: u64,
    pub violations: u64,
    pub first_violation: Option<(u64, &'static str)>,
    pub records: u64,
}

impl TaggedAccumulator {
    pub fn new(cell_m_max: u64) -> Self {
        Self {
            n0: Histogram::new(),
            b: Histogram::new(),
            m_tilde: Histogram::new(),
            i_b: Histogram::new(),
            j: Histogram::new(),
            omega: Moments::new(),
            omega_hat: Moments::new(),
            t_tilde: Moments::new(),
            w_min: Moments::new(),
            w_median: Moments::new(),
            w_max: Moments::new(),
            w_all: Moments::new(),
            omega_samples: Vec::new(),
            omega_hat_samples: Vec::new(),
            cells: BTreeMap::new(),
            cell_m_max,
            violations: 0,
            first_violation: None,
            records: 0,
        }
    }

    pub fn push(&mut self, r: &TaggedBatchRecord) {
        self.records += 1;
        if let Err(what) = r.check() {
            self.violations += 1;
            self.first_violation.get_or_insert((r.index, what));
        }
        self.n0.add(r.n0);
        self.b.add(r.b);
        self.m_tilde.add(r.m_tilde);
        self.i_b.add(r.i_b);
        self.j.add(r.j_sampled);
        self.omega.push(r.omega);
        self.omega_hat.push(r.omega_hat);
        self.t_tilde.push(r.t_tilde);
        self.w_min.push(r.w_min());
        self.w_median.push(r.w_median());
        self.w_max.push(r.w_max());
        for &w in &r.job_sojourns {
            self.w_all.push(w);
        }
        self.omega_samples.push(r.omega);
        self.omega_hat_samples.push(r.omega_hat);
        if r.m_tilde <= self.cell_m_max {
            self.cells.entry((r.b, r.m_tilde)).or_default().add(r.j_sampled);
        }
    }

    /// Append `other`, which must cover the replications following this one.
    pub fn merge(&mut self, other: TaggedAccumulator) {
        self.records += other.records;
        self.violations += other.violations;
        if self.first_violation.is_none() {
            self.first_violation = other.first_violation;
        }
        self.n0.merge(&other.n0);
        self.b.merge(&other.b);
        self.m_tilde.merge(&other.m_tilde);
        self.i_b.merge(&other.i_b);
        self.j.merge(&other.j);
        self.omega.merge(&other.omega);
        self.omega_hat.merge(&other.omega_hat);
        self.t_tilde.merge(&other.t_tilde);
        self.w_min.merge(&other.w_min);
        self.w_median.merge(&other.w_median);
        self.w_max.merge(&other.w_max);
        self.w_all.merge(&other.w_all);
        self.omega_samples.extend(other.omega_samples);
        self.omega_hat_samples.extend(other.omega_hat_samples);
        for (key, h) in other.cells {
            self.cells.entry(key).or_default().merge(&h);
        }
    }

    pub fn finish(self, targets: &SummaryTargets) -> Result<EmpiricalSummary, StatsError> {
        if self.records == 0 {
            return Err(StatsError::Empty);
        }
        let mut omega_sorted = self.omega_samples;
        let mut omega_hat_sorted = self.omega_hat_samples;
        omega_sorted.sort_unstable_by(f64::total_cmp);
        omega_hat_sorted.sort_unstable_by(f64::total_cmp);
        let omega_fit = fit_tail_slope(&omega_sorted, targets.tail_window, 0.0);
        let omega_fit_corrected = fit_tail_slope(&omega_sorted, targets.tail_window, targets.tail_power);
        Ok(EmpiricalSummary {
            replications: self.records,
            n0: self.n0,
            b: self.b,
            m_tilde: self.m_tilde,
            i_b: self.i_b,
            j: self.j,
            omega: self.omega.estimate(),
            omega_hat: self.omega_hat.estimate(),
            t_tilde: self.t_tilde.estimate(),
            w_min: self.w_min.estimate(),
            w_median: self.w_median.estimate(),
            w_max: self.w_max.estimate(),
            w_all: self.w_all.estimate(),
            omega_sorted,
            omega_hat_sorted,
            omega_fit,
            omega_fit_corrected,
            tail_window: targets.tail_window,
            cells: self.cells,
            violations: self.violations,
            first_violation: self.first_violation,
        })
    }
}

/// What [`summarize`] fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryTargets {
    pub tail_window: (f64, f64),
    /// Algebraic power removed in the corrected fit (`3/2` for the
    /// `x^{−3/2}e^{σx}` tail laws).
    pub tail_power: f64,
    pub cell_m_max: u64,
}

impl Default for SummaryTargets {
    fn default() -> Self {
        Self {
            tail_window: DEFAULT_TAIL_WINDOW,
            tail_power: 1.5,
            cell_m_max: 12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmpiricalSummary {
    pub replications: u64,
    pub n0: Histogram,
    pub b: Histogram,
    pub m_tilde: Histogram,
    pub i_b: Histogram,
    pub j: Histogram,
    pub omega: MeanEstimate,
    pub omega_hat: MeanEstimate,
    pub t_tilde: MeanEstimate,
    pub w_min: MeanEstimate,
    pub w_median: MeanEstimate,
    pub w_max: MeanEstimate,
    pub w_all: MeanEstimate,
    pub omega_sorted: Vec<f64>,
    pub omega_hat_sorted: Vec<f64>,
    /// Slope of `ln P̂(Ω > x)`.
    pub omega_fit: Result<TailFit, StatsError>,
    /// Slope of `ln(P̂(Ω > x)·x^{3/2})`.
    pub omega_fit_corrected: Result<TailFit, StatsError>,
    pub tail_window: (f64, f64),
    pub cells: BTreeMap<(u64, u64), Histogram>,
    pub violations: u64,
    pub first_violation: Option<(u64, &'static str)>,
}

impl EmpiricalSummary {
    pub fn ccdf_omega(&self, x: f64) -> f64 {
        ccdf_sorted(&self.omega_sorted, x)
    }

    pub fn ccdf_omega_hat(&self, x: f64) -> f64 {
        ccdf_sorted(&self.omega_hat_sorted, x)
    }

    /// Empirical quantile of `Ω` (order statistic `⌊level·n⌋`).
    pub fn omega_quantile(&self, level: f64) -> f64 {
        let n = self.omega_sorted.len();
        self.omega_sorted[((level * n as f64) as usize).min(n - 1)]
    }

    /// `P̂(Ω > x)` on `grid`, checked non-increasing.
    pub fn omega_ccdf_on(&self, grid: &[f64]) -> Vec<f64> {
        let out: Vec<f64> = grid.iter().map(|&x| self.ccdf_omega(x)).collect();
        debug_assert!(out.windows(2).all(|w| w[1] <= w[0]) || !grid.windows(2).all(|w| w[0] < w[1]));
        out
    }
}

/// Summarize a record sequence in one pass.
pub fn summarize<'a, I>(records: I, targets: &SummaryTargets) -> Result<EmpiricalSummary, StatsError>
where
    I: IntoIterator<Item = &'a TaggedBatchRecord>,
{
    let mut acc = TaggedAccumulator::new(targets.cell_m_max);
    for r in records {
        acc.push(r);
    }
    acc.finish(targets)
}

/// Equal-width bin counts of `data` over `[lo, hi)`; values outside are
/// dropped.
pub fn bin_counts(data: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut out = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &x in data {
        if x >= lo && x < hi {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            out[k] += 1;
        }
    }
    out
}
