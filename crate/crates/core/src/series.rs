//! Exact truncated distributions by power-series coefficient extraction.
//!
//! Everything here is built from the coefficients of `M*(z)`, obtained from
//! the quadratic equation `ρM*² − (1+ρ−qz)M* + (1−q)z = 0` by the recurrence
//! `(1+ρ) m_k = ρ Σ_{i=1}^{k−1} m_i m_{k−i} + q m_{k−1} + (1−q)[k=1]`.
//! From those, `Y(z) = z/(1+ρ−ρM*(z))` is the PGF of the jobs served in a
//! residual busy period started by a single job, and its powers `Y^k` give
//! the conditional law of `M̃` given `N₀ + B = k`.
//!
//! The residual-count law `M̃` is computed twice, by composition `φ(Y(z))`
//! and by the closed-form coefficient sums `b_k` of `√δ_q(z)`, so each
//! route checks the other.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, exp, log, pow, sqrt};
use thiserror::Error;

use crate::asymptotics;
use crate::params::{ModelParams, SpectralConstants};
use crate::pmf::DiscretePmf;
use crate::sum::{compensated_sum, NeumaierSum, SplitSum};
use crate::transforms::DomainError;

/// Default bound on the probability mass a truncated PMF may leave out.
pub const DEFAULT_TAIL_BOUND: f64 = 1e-10;

/// The identity `(1+ρ) Σ_k b_k = 1 − ρ − q` must hold this tightly for the
/// closed-form `M̃` route to be trusted.
pub const IDENTITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("truncation too small for {what}: remainder {remainder:e} exceeds bound {bound:e}{}",
        dominant.map(|d| format!(" (dominated by {d})")).unwrap_or_default())]
    TruncationTooSmall {
        what: &'static str,
        remainder: f64,
        bound: f64,
        dominant: Option<&'static str>,
    },
    #[error("precision loss: (1+rho)*sum(b_k) - (1-rho-q) = {residual:e} exceeds {tolerance:e}")]
    PrecisionLoss { residual: f64, tolerance: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Truncation orders for the series tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Largest job count `m` (for `M`, `M̃`, and `J ≤ M̃`).
    pub m_max: usize,
    /// Largest `k = N₀ + B`.
    pub k_max: usize,
    /// Largest batch size `b`.
    pub b_max: usize,
    pub tail_bound: f64,
}

impl Truncation {
    /// Smallest orders whose envelopes leave less than `tail_bound / 4` in
    /// each neglected tail: `ζ_q⁻`-geometric for counts, `(ρ+q)^k` for
    /// `N₀ + B`, `q^b` for `B`.
    pub fn adaptive(p: &ModelParams, tail_bound: f64) -> Self {
        let budget = tail_bound / 4.0;
        let c = SpectralConstants::new(p);
        let zeta = c.zeta_minus;
        let prefactor = asymptotics::m_tail(p).prefactor.max(asymptotics::mtilde_tail(p).prefactor);
        // Both laws approach the exact PMFs from above past the first few
        // points; the factor 2 covers the region where they do not.
        let geometric_sum = zeta / (zeta - 1.0);
        let mut m_max = 1usize;
        loop {
            let m = m_max as f64;
            let envelope = 2.0 * prefactor * pow(m, -1.5) * exp(-m * log(zeta)) * geometric_sum;
            if envelope <= budget {
                break;
            }
            m_max += 1;
        }
        let lam = p.rho() + p.q();
        let k_max = ceil(log(budget) / log(lam)).max(1.0) as usize;
        let b_max = (ceil(log(budget) / log(p.q())).max(1.0) as usize).min(k_max);
        Self {
            m_max,
            k_max,
            b_max,
            tail_bound,
        }
    }
}

fn check_tail(what: &'static str, pmf: &DiscretePmf, bound: f64) -> Result<(), SeriesError> {
    if pmf.tail_mass > bound {
        return Err(SeriesError::TruncationTooSmall {
            what,
            remainder: pmf.tail_mass,
            bound,
            dominant: None,
        });
    }
    Ok(())
}

/// `P(B = b) = (1−q) q^{b−1}` for `b = 1..=b_max`.
pub fn batch_pmf(p: &ModelParams, b_max: usize) -> DiscretePmf {
    let q = p.q();
    let mut mass = Vec::with_capacity(b_max);
    let mut w = 1.0 - q;
    for _ in 0..b_max {
        mass.push(w);
        w *= q;
    }
    DiscretePmf::new("B", 1, mass)
}

/// Stationary law of the number of jobs `N₀` found by an arriving batch,
/// from expanding `η(z) = (1−ρ*)(1−qz)/(1−(ρ+q)z)`:
/// `P(N₀ = 0) = 1 − ρ*`, `P(N₀ = n) = (1−ρ*) ρ (ρ+q)^{n−1}` for `n ≥ 1`.
pub fn n0_pmf(p: &ModelParams, n_max: usize) -> DiscretePmf {
    let lam = p.rho() + p.q();
    let empty = 1.0 - p.rho_star();
    let mut mass = Vec::with_capacity(n_max + 1);
    mass.push(empty);
    let mut w = empty * p.rho();
    for _ in 1..=n_max {
        mass.push(w);
        w *= lam;
    }
    DiscretePmf::new("N0", 0, mass)
}

/// `P(N₀ + B = k) = (1−ρ−q)(ρ+q)^{k−1}`, the coefficients of `φ`.
pub fn n0_plus_batch_pmf(p: &ModelParams, k_max: usize) -> DiscretePmf {
    let lam = p.rho() + p.q();
    let mut mass = Vec::with_capacity(k_max);
    let mut w = p.slack();
    for _ in 0..k_max {
        mass.push(w);
        w *= lam;
    }
    DiscretePmf::new("N0+B", 1, mass)
}

/// Coefficients `m_0..=m_max` of `M*(z)` (with `m_0 = 0`).
fn m_coefficients(p: &ModelParams, m_max: usize) -> Vec<f64> {
    let (rho, q) = (p.rho(), p.q());
    let mut m = vec![0.0; m_max + 1];
    for k in 1..=m_max {
        let mut conv = NeumaierSum::new();
        for i in 1..k {
            conv += m[i] * m[k - i];
        }
        let first = if k == 1 { 1.0 - q } else { 0.0 };
        m[k] = (rho * conv.sum() + q * m[k - 1] + first) / (1.0 + rho);
    }
    m
}

/// Law of the number `M` of jobs served in a busy period, on `1..=m_max`.
pub fn m_pmf(p: &ModelParams, m_max: usize, tail_bound: f64) -> Result<DiscretePmf, SeriesError> {
    if m_max < 1 {
        return Err(SeriesError::TruncationTooSmall {
            what: "P(M=m)",
            remainder: 1.0,
            bound: tail_bound,
            dominant: None,
        });
    }
    let m = m_coefficients(p, m_max);
    let pmf = DiscretePmf::new("M", 1, m[1..].to_vec());
    check_tail("P(M=m)", &pmf, tail_bound)?;
    Ok(pmf)
}

/// Coefficients `0..=m_max` of `Y(z) = z·G(z)` with `G = 1/(1+ρ−ρM*)`.
///
/// `G` follows from series division; every term of the recurrence is
/// positive, so nothing cancels.
pub fn residual_unit_coefficients(p: &ModelParams, m_max: usize) -> Vec<f64> {
    let rho = p.rho();
    let m = m_coefficients(p, m_max);
    let mut g = vec![0.0; m_max + 1];
    g[0] = 1.0 / (1.0 + rho);
    for k in 1..=m_max {
        let mut acc = NeumaierSum::new();
        for i in 1..=k {
            acc += m[i] * g[k - i];
        }
        g[k] = rho * acc.sum() / (1.0 + rho);
    }
    let mut y = vec![0.0; m_max + 1];
    y[1..].copy_from_slice(&g[..m_max]);
    y
}

/// `g_k(m) = [z^m] Y(z)^k`, the conditional law `P_{n,b}(M̃ = m)` for
/// `n + b = k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub k_max: usize,
    pub m_max: usize,
    /// `rows[k-1][m]` for `k = 1..=k_max`, `m = 0..=m_max`.
    rows: Vec<Vec<f64>>,
}

impl CoefficientTable {
    pub fn get(&self, k: usize, m: usize) -> f64 {
        if k == 0 || k > self.k_max || m > self.m_max {
            return 0.0;
        }
        self.rows[k - 1][m]
    }

    /// Row `k` as a slice indexed by `m`.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k - 1]
    }

    /// `1 − Σ_m g_k(m)`: the conditional mass beyond `m_max`.
    pub fn row_remainder(&self, k: usize) -> f64 {
        1.0 - compensated_sum(self.row(k).iter().copied())
    }
}

/// Build `g_k(m)` for `k ≤ k_max`, `m ≤ m_max`, row `k` from row `k − 1`.
///
/// The remainder of row `k_max` (the largest one) must stay under
/// `tail_bound`.
pub fn conditional_mtilde_table(
    p: &ModelParams,
    k_max: usize,
    m_max: usize,
    tail_bound: f64,
) -> Result<CoefficientTable, SeriesError> {
    if k_max < 1 || m_max < k_max {
        return Err(SeriesError::TruncationTooSmall {
            what: "g_k(m) table",
            remainder: 1.0,
            bound: tail_bound,
            dominant: Some(if k_max < 1 { "k" } else { "m" }),
        });
    }
    let y = residual_unit_coefficients(p, m_max);
    let mut rows = Vec::with_capacity(k_max);
    rows.push(y.clone());
    for k in 2..=k_max {
        let prev: &Vec<f64> = rows.last().expect("row k-1 exists");
        let mut row = vec![0.0; m_max + 1];
        // prev[j] = 0 for j < k-1 and y[i] = 0 for i < 1; all terms positive.
        for m in k..=m_max {
            let mut acc = 0.0;
            for i in 1..=(m - (k - 1)) {
                acc += y[i] * prev[m - i];
            }
            row[m] = acc;
        }
        rows.push(row);
    }
    let table = CoefficientTable { k_max, m_max, rows };
    let remainder = table.row_remainder(k_max);
    if remainder > tail_bound {
        return Err(SeriesError::TruncationTooSmall {
            what: "g_k(m) table",
            remainder,
            bound: tail_bound,
            dominant: Some("m"),
        });
    }
    Ok(table)
}

/// Taylor coefficients `a_0..=a_n` of `√(1−x)`, by the ratio recurrence
/// `a_k = a_{k−1} (2k−3)/(2k)`.
pub fn sqrt_coefficients(n: usize) -> Vec<f64> {
    let mut a = Vec::with_capacity(n + 1);
    a.push(1.0);
    for k in 1..=n {
        let kf = k as f64;
        let prev = a[k - 1];
        a.push(prev * (2.0 * kf - 3.0) / (2.0 * kf));
    }
    a
}

/// Output of the closed-form `M̃` route.
#[derive(Debug, Clone, PartialEq)]
pub struct CorollaryMtilde {
    pub pmf: DiscretePmf,
    /// `b_0..=b_L`.
    pub b: Vec<f64>,
    /// `(1+ρ) Σ_{k≤L} b_k − (1−ρ−q)`.
    pub identity_residual: f64,
    /// Set when `L` hit [`INNER_TAIL_CAP`] and `Σ_{ℓ>L} b_ℓ` was taken from
    /// the identity instead of being neglected. The identity then checks
    /// nothing, and `identity_residual` is minus that remainder.
    pub closed_by_identity: bool,
}

/// Largest number of `b_ℓ` beyond `m_max` the closed-form route computes.
pub const INNER_TAIL_CAP: usize = 2_000_000;

/// `b_k = ζ⁻^{−k} Σ_{ℓ=0}^k a_ℓ a_{k−ℓ} w^ℓ` with `w = (qζ⁻/(1+ρ))² = ζ⁻/ζ⁺`,
/// the coefficients of `√δ_q(z)/(1+ρ)`, for `k = 0..=n`.
///
/// Since `|a_ℓ| ≤ 1`, the inner terms past `ℓ = Λ` add at most
/// `w^{Λ+1}/(1−w)`; `Λ` is chosen to make that below 1e-30.
pub fn sqrt_delta_coefficients(p: &ModelParams, n: usize) -> Vec<f64> {
    let zeta = p.zeta_minus();
    let ratio = p.q() * zeta / (1.0 + p.rho());
    let w = ratio * ratio;
    let inner = if w > 0.0 && w < 1.0 {
        (ceil((log(1e-30) + log(1.0 - w)) / log(w)).max(1.0) as usize).min(n)
    } else {
        n
    };
    let a = sqrt_coefficients(n);
    let mut wpow = Vec::with_capacity(inner + 1);
    let mut acc = 1.0;
    for _ in 0..=inner {
        wpow.push(acc);
        acc *= w;
    }
    let mut b = Vec::with_capacity(n + 1);
    let mut scale = 1.0;
    for k in 0..=n {
        let mut s = SplitSum::default();
        for l in 0..=k.min(inner) {
            s.push(a[l] * a[k - l] * wpow[l]);
        }
        b.push(scale * s.sum());
        scale /= zeta;
    }
    b
}

/// `P(M̃ = m) = −(1−q−ρ)(1+ρ)/(2ρ(ρ+q)) Σ_{ℓ>m} b_ℓ` for `m = 1..=m_max`.
///
/// The inner tail is summed up to `L`, the first index where the envelope
/// `|b_ℓ| ≤ (2 − √(1−w)) ζ⁻^{−ℓ}` puts the neglected remainder below
/// `1e-18·ζ⁻^{−m_max}`, but at most `m_max + INNER_TAIL_CAP` (reached only
/// for `ζ⁻` within about 1e-5 of one).
pub fn mtilde_pmf_corollary(p: &ModelParams, m_max: usize, tail_bound: f64) -> Result<CorollaryMtilde, SeriesError> {
    if m_max < 1 {
        return Err(SeriesError::TruncationTooSmall {
            what: "P(M~=m) (closed form)",
            remainder: 1.0,
            bound: tail_bound,
            dominant: None,
        });
    }
    let (rho, q) = (p.rho(), p.q());
    let zeta = p.zeta_minus();
    let w = zeta / p.zeta_plus();
    let envelope = (2.0 - sqrt(1.0 - w)) / (zeta - 1.0);
    let extra = ceil((log(envelope) + 18.0 * core::f64::consts::LN_10) / log(zeta)).max(1.0);
    let closed_by_identity = extra > INNER_TAIL_CAP as f64;
    let l_max = m_max + if closed_by_identity { INNER_TAIL_CAP } else { extra as usize };
    let b = sqrt_delta_coefficients(p, l_max);

    let mut total = SplitSum::default();
    for &bk in &b {
        total.push(bk);
    }
    let identity_residual = (1.0 + rho) * total.sum() - p.slack();
    let remainder = if closed_by_identity {
        // must still respect the envelope, or the b_k are wrong
        let bound = envelope * exp(-(l_max as f64) * log(zeta)) * (1.0 + rho);
        if !(libm::fabs(identity_residual) <= bound + IDENTITY_TOLERANCE) {
            return Err(SeriesError::PrecisionLoss {
                residual: identity_residual,
                tolerance: bound + IDENTITY_TOLERANCE,
            });
        }
        -identity_residual / (1.0 + rho)
    } else {
        if !(libm::fabs(identity_residual) <= IDENTITY_TOLERANCE) {
            return Err(SeriesError::PrecisionLoss {
                residual: identity_residual,
                tolerance: IDENTITY_TOLERANCE,
            });
        }
        0.0
    };

    let scale = -p.slack() * (1.0 + rho) / (2.0 * rho * (rho + q));
    let mut mass = vec![0.0; m_max];
    let mut suffix = NeumaierSum::new();
    suffix += remainder;
    for l in (2..=l_max).rev() {
        suffix += b[l];
        let m = l - 1;
        if m <= m_max {
            mass[m - 1] = scale * suffix.sum();
        }
    }
    let pmf = DiscretePmf::new("M~ (closed form)", 1, mass);
    check_tail("P(M~=m) (closed form)", &pmf, tail_bound)?;
    Ok(CorollaryMtilde {
        pmf,
        b,
        identity_residual,
        closed_by_identity,
    })
}

/// `P(M̃ = m)` as the coefficients of `φ(Y(z))`, by series substitution
/// into `φ(y) = (1−ρ−q)y/(1−(ρ+q)y)`.
pub fn mtilde_pmf_composition(p: &ModelParams, m_max: usize, tail_bound: f64) -> Result<DiscretePmf, SeriesError> {
    if m_max < 1 {
        return Err(SeriesError::TruncationTooSmall {
            what: "P(M~=m) (composition)",
            remainder: 1.0,
            bound: tail_bound,
            dominant: None,
        });
    }
    let y = residual_unit_coefficients(p, m_max);
    let lam = p.rho() + p.q();
    let c = p.slack();
    // S = cY + λ Y S
    let mut s = vec![0.0; m_max + 1];
    for m in 1..=m_max {
        let mut acc = NeumaierSum::new();
        for i in 1..m {
            acc += y[i] * s[m - i];
        }
        s[m] = c * y[m] + lam * acc.sum();
    }
    let pmf = DiscretePmf::new("M~ (composition)", 1, s[1..].to_vec());
    check_tail("P(M~=m) (composition)", &pmf, tail_bound)?;
    Ok(pmf)
}

/// Law of the largest of `b` distinct ranks drawn uniformly from `{1..m}`:
/// `P(J = j) = C(j−1, b−1)/C(m, b)` for `b ≤ j ≤ m`.
///
/// Built in log space from `P(J = m) = b/m` through the ratio
/// `P(J = j−1)/P(J = j) = (j−b)/(j−1)`, which avoids both the huge
/// binomials and the rounding of `ln Γ` at large arguments.
pub fn j_conditional_pmf(b: u64, m: u64) -> Result<DiscretePmf, DomainError> {
    if b < 1 || b > m {
        return Err(DomainError {
            op: "j_conditional_pmf(b)",
            value: b as f64,
            lower: 1.0,
            upper: m as f64,
            close: "]",
        });
    }
    let len = (m - b + 1) as usize;
    let mut mass = vec![0.0; len];
    let mut ln_p = NeumaierSum::new();
    ln_p += log(b as f64 / m as f64);
    mass[len - 1] = exp(ln_p.sum());
    for j in (b + 1..=m).rev() {
        ln_p += log((j - b) as f64 / (j - 1) as f64);
        mass[(j - 1 - b) as usize] = exp(ln_p.sum());
    }
    Ok(DiscretePmf::new(format!("J|b={b},m={m}"), b, mass))
}

/// Unconditional law of `J`, deconditioned over `B`, `N₀` and `M̃`:
///
/// `P(J=j) = Σ_b P(B=b) Σ_n P(N₀=n) Σ_{m≥j} g_{n+b}(m) C(j−1,b−1)/C(m,b)`.
///
/// For each `b` the inner sum over `m` is evaluated by the backward
/// recurrence `T_b(j) = (b/j) h_b(j) + ((j−b+1)/j) T_b(j+1)`, where
/// `h_b(m) = P(B=b) Σ_n P(N₀=n) g_{n+b}(m)`; every quantity is a
/// probability, so nothing overflows.
pub fn j_pmf(p: &ModelParams, trunc: &Truncation) -> Result<DiscretePmf, SeriesError> {
    let table = conditional_mtilde_table(p, trunc.k_max, trunc.m_max, f64::INFINITY)?;
    j_pmf_from_table(p, &table, trunc)
}

/// [`j_pmf`] reusing an already built table.
pub fn j_pmf_from_table(p: &ModelParams, table: &CoefficientTable, trunc: &Truncation) -> Result<DiscretePmf, SeriesError> {
    let (k_max, m_max) = (table.k_max, table.m_max);
    let b_max = trunc.b_max.min(k_max);
    let batch = batch_pmf(p, b_max);
    let n0 = n0_pmf(p, k_max);

    let mut h = vec![vec![0.0; m_max + 1]; b_max + 1];
    for k in 1..=k_max {
        let row = table.row(k);
        for b in 1..=b_max.min(k) {
            let w = batch.prob(b as u64) * n0.prob((k - b) as u64);
            for (hm, &g) in h[b].iter_mut().zip(row.iter()).skip(k) {
                *hm += w * g;
            }
        }
    }

    let mut per_j = vec![NeumaierSum::new(); m_max + 1];
    for b in 1..=b_max {
        let bf = b as f64;
        let mut t = 0.0;
        for j in (b..=m_max).rev() {
            let jf = j as f64;
            t = (bf / jf) * h[b][j] + ((jf - bf + 1.0) / jf) * t;
            per_j[j] += t;
        }
    }
    let mass: Vec<f64> = per_j[1..].iter().map(NeumaierSum::sum).collect();
    let pmf = DiscretePmf::new("J", 1, mass);

    if pmf.tail_mass > trunc.tail_bound {
        let lam = p.rho() + p.q();
        let phi = n0_plus_batch_pmf(p, k_max);
        let mtilde_tail = compensated_sum(
            (1..=k_max).map(|k| phi.prob(k as u64) * table.row_remainder(k)),
        );
        let candidates = [
            ("m (residual job count)", mtilde_tail),
            ("k (N0 + B)", pow(lam, k_max as f64)),
            ("b (batch size)", pow(p.q(), b_max as f64)),
        ];
        let dominant = candidates
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|c| c.0);
        return Err(SeriesError::TruncationTooSmall {
            what: "P(J=j)",
            remainder: pmf.tail_mass,
            bound: trunc.tail_bound,
            dominant,
        });
    }
    Ok(pmf)
}

/// `H_q = J*'(U*(σ_q⁺))` from a truncated `J` law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HqEstimate {
    /// `Σ_{j ≤ j_max} j P(J=j) u^{j−1}` with `u = U*(σ_q⁺)`.
    pub value: f64,
    /// The same sum over `j > j_max` evaluated with the `J` tail law.
    pub remainder_bound: f64,
    pub j_max: u64,
    /// `u/ζ_q⁻`, the limiting term ratio.
    pub ratio: f64,
}

impl HqEstimate {
    /// Partial sum plus the tail-law remainder.
    pub fn completed(&self) -> f64 {
        self.value + self.remainder_bound
    }
}

/// `Σ_{j>j_max} j^{-3/2} x^j`, summed until the terms are negligible
/// against their geometric continuation.
fn tail_law_sum(j_max: u64, x: f64) -> f64 {
    let mut acc = NeumaierSum::new();
    let mut j = j_max + 1;
    let mut xj = exp(j as f64 * log(x));
    let tail_factor = 1.0 / (1.0 - x);
    loop {
        let term = xj * pow(j as f64, -1.5);
        acc += term;
        if term * tail_factor < 1e-17 * acc.sum() || xj == 0.0 {
            break;
        }
        j += 1;
        xj *= x;
        if j - j_max > 500_000_000 {
            // geometric continuation as the final bound
            acc += term * tail_factor;
            break;
        }
    }
    acc.sum()
}

/// `H_q = Σ_j j P(J=j) U*(σ_q⁺)^{j−1}`, with the truncation remainder
/// bounded through the `K_q j^{-5/2} ζ^{-j}` tail law (which lies above the
/// exact PMF in the tail).
///
/// Fails with `TruncationTooSmall` when that remainder exceeds
/// `max_remainder`.
pub fn h_q(p: &ModelParams, j: &DiscretePmf, max_remainder: f64) -> Result<HqEstimate, SeriesError> {
    let c = SpectralConstants::new(p);
    let ln_u = log(c.u_star);
    let value = compensated_sum(j.iter().filter(|&(_, pj)| pj > 0.0).map(|(k, pj)| {
        let kf = k as f64;
        kf * exp(log(pj) + (kf - 1.0) * ln_u)
    }));
    let ratio = c.hq_ratio();
    let j_max = j.max_index();
    let remainder_bound = c.k_q / c.u_star * tail_law_sum(j_max, ratio);
    if remainder_bound > max_remainder {
        return Err(SeriesError::TruncationTooSmall {
            what: "H_q",
            remainder: remainder_bound,
            bound: max_remainder,
            dominant: Some("j (departure rank)"),
        });
    }
    Ok(HqEstimate {
        value,
        remainder_bound,
        j_max,
        ratio,
    })
}

/// `K_q` from its defining expectation
/// `κ_q ζ⁻/(ζ⁻−1) · E[B(N₀+B) r_q^{N₀+B}]`, truncated at `b_max`, `n_max`.
pub fn k_q_deconditioned(p: &ModelParams, b_max: usize, n_max: usize) -> f64 {
    let c = SpectralConstants::new(p);
    let (ln_q, ln_lam, ln_r) = (log(p.q()), log(p.rho() + p.q()), log(c.r_q));
    let ln_empty = log(1.0 - p.rho_star());
    let mut acc = NeumaierSum::new();
    // log masses taken in closed form: the products underflow long before
    // the r^{n+b}-weighted terms do
    for b in 1..=b_max {
        let ln_pb = log(1.0 - p.q()) + (b - 1) as f64 * ln_q;
        for n in 0..=n_max {
            let ln_pn = if n == 0 {
                ln_empty
            } else {
                ln_empty + log(p.rho()) + (n - 1) as f64 * ln_lam
            };
            let k = (n + b) as f64;
            acc += (b as f64) * k * exp(ln_pb + ln_pn + k * ln_r);
        }
    }
    c.kappa_q * c.zeta_minus / (c.zeta_minus - 1.0) * acc.sum()
}
