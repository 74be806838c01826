//! Closed-form tail laws `C·x^{−α}·e^{σx}` (continuous, survival function)
//! and `C·m^{−α}·γ^m` (discrete, point mass).

use core::f64::consts::{LN_10, PI};

use libm::{ceil, exp, log, pow, sqrt};
use thiserror::Error;

use crate::params::{ModelParams, SpectralConstants};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    /// `P(X > x) ~ C x^{−α} e^{σx}` with `σ < 0`.
    Continuous,
    /// `P(X = m) ~ C m^{−α} γ^m` with `γ = 1/ζ ∈ (0, 1)`.
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailAsymptote {
    pub kind: TailKind,
    pub prefactor: f64,
    pub power: f64,
    /// `σ` for continuous laws, `γ` for discrete ones.
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error("tail prefactor {value:e} is not positive")]
    NonPositivePrefactor { value: f64 },
    #[error("H_q = {value} must be positive and finite")]
    InvalidHq { value: f64 },
}

impl TailAsymptote {
    fn continuous(prefactor: f64, power: f64, rate: f64) -> Self {
        debug_assert!(prefactor > 0.0 && rate < 0.0);
        Self {
            kind: TailKind::Continuous,
            prefactor,
            power,
            rate,
        }
    }

    fn discrete(prefactor: f64, power: f64, zeta: f64) -> Self {
        debug_assert!(prefactor > 0.0 && zeta > 1.0);
        Self {
            kind: TailKind::Discrete,
            prefactor,
            power,
            rate: 1.0 / zeta,
        }
    }

    /// Log of the exponential/geometric factor per unit of `x`.
    pub fn log_decay(&self) -> f64 {
        match self.kind {
            TailKind::Continuous => self.rate,
            TailKind::Discrete => log(self.rate),
        }
    }

    /// The law at `x > 0`, evaluated in log space.
    pub fn eval(&self, x: f64) -> f64 {
        exp(log(self.prefactor) - self.power * log(x) + self.log_decay() * x)
    }

    /// Smallest integer index past `mode` where the exponential or
    /// geometric factor has dropped by 10⁶.
    pub fn far_tail_index(&self, mode: f64) -> f64 {
        let span = 6.0 * LN_10 / -self.log_decay();
        ceil(mode + span)
    }
}

/// `P(T > x)` for the busy period.
pub fn busy_tail(p: &ModelParams) -> TailAsymptote {
    let sigma = p.sigma_plus();
    let c = pow(1.0 - p.q(), 0.25) / (2.0 * sqrt(PI) * pow(p.rho(), 0.75) * -sigma);
    TailAsymptote::continuous(c, 1.5, sigma)
}

/// `P(M = m)` for the number of jobs served in a busy period.
pub fn m_tail(p: &ModelParams) -> TailAsymptote {
    let c = SpectralConstants::new(p);
    let (zm, zp) = (c.zeta_minus, c.zeta_plus);
    let pre = p.q() * sqrt((zp - zm) * zm) / (4.0 * p.rho() * sqrt(PI));
    TailAsymptote::discrete(pre, 1.5, zm)
}

/// `P(T̃ > x)` for the residual busy period seen by an arriving batch.
pub fn residual_busy_tail(p: &ModelParams) -> TailAsymptote {
    let c = SpectralConstants::new(p);
    let sigma = c.sigma_plus;
    let pre = p.slack() * sqrt(sigma - c.sigma_minus) / (4.0 * sqrt(PI) * p.rho() * sigma * sigma);
    TailAsymptote::continuous(pre, 1.5, sigma)
}

/// `P(M̃ = m)` for the number of jobs served in the residual busy period.
pub fn mtilde_tail(p: &ModelParams) -> TailAsymptote {
    let c = SpectralConstants::new(p);
    let (zm, zp) = (c.zeta_minus, c.zeta_plus);
    let (rho, q) = (p.rho(), p.q());
    let pre = p.slack() * q * sqrt((zp - zm) * zm) / (4.0 * sqrt(PI) * rho * (rho + q) * (zm - 1.0));
    TailAsymptote::discrete(pre, 1.5, zm)
}

/// `P(J = j) ~ K_q j^{−5/2} ζ^{−j}`.
pub fn j_tail(p: &ModelParams) -> TailAsymptote {
    let c = SpectralConstants::new(p);
    TailAsymptote::discrete(c.k_q, 2.5, c.zeta_minus)
}

/// Approximate `P(Ω > x)` with prefactor `H_q L_q/(2σ_q⁺√π)`.
pub fn omega_tail(p: &ModelParams, h_q: f64) -> Result<TailAsymptote, AsymptoticsError> {
    if !(h_q > 0.0 && h_q.is_finite()) {
        return Err(AsymptoticsError::InvalidHq { value: h_q });
    }
    let c = SpectralConstants::new(p);
    let pre = h_q * c.l_q / (2.0 * c.sigma_plus * sqrt(PI));
    if !(pre > 0.0) {
        return Err(AsymptoticsError::NonPositivePrefactor { value: pre });
    }
    Ok(TailAsymptote::continuous(pre, 1.5, c.sigma_plus))
}

/// Limit of `P(T̃ > x)/P(T > x)`: `(1−ρ−q)/|σ_q⁺|`.
pub fn residual_vs_full_ratio(p: &ModelParams) -> f64 {
    let r = p.slack() / -p.sigma_plus();
    debug_assert!(r > 1.0, "tail ratio {r} must exceed one");
    r
}
