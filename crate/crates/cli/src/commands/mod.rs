pub mod constants;
pub mod figures;
pub mod pmf;
pub mod simulate;
pub mod validate;

use batchps_core::series::{h_q, j_pmf};
use batchps_core::stats::Histogram;
use batchps_core::sum::compensated_sum;
use batchps_core::{HqEstimate, ModelParams, SpectralConstants};
use serde::Serialize;

use crate::config::{HqSource, Settings};
use crate::error::Result;

/// `H_q` together with where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HqReport {
    pub source: HqSource,
    /// Value used downstream.
    pub value: f64,
    /// Partial sum over the stored `J` law.
    pub partial: f64,
    /// Tail-law estimate of the neglected terms (zero for the empirical sum).
    pub remainder: f64,
    pub j_max: u64,
}

/// Default floor on the `J` terms summed for `H_q`. The tail law overstates
/// the exact terms by a factor `1 + O(1/j)`, so its remainder estimate is
/// only trustworthy once it is small.
pub const HQ_M_MAX_FLOOR: usize = 4000;

/// The floor, lowered to where `ζ_q⁻^{−j}` reaches 10⁻²⁰⁰ (past that the
/// terms turn subnormal and slow).
pub fn hq_m_max_floor(p: &ModelParams) -> usize {
    let reach = (200.0 * std::f64::consts::LN_10 / p.zeta_minus().ln()).ceil();
    HQ_M_MAX_FLOOR.min(reach as usize)
}

/// `H_q` from the exact `J` law: partial sum plus the tail-law remainder.
pub fn analytic_hq(p: &ModelParams, s: &Settings) -> Result<HqReport> {
    let mut trunc = s.truncation(p);
    trunc.m_max = match s.hq_m_max {
        Some(m) => m.max(1),
        None => trunc.m_max.max(hq_m_max_floor(p)),
    };
    let j = j_pmf(p, &trunc)?;
    Ok(report(h_q(p, &j, f64::INFINITY)?))
}

fn report(h: HqEstimate) -> HqReport {
    HqReport {
        source: HqSource::Analytic,
        value: h.completed(),
        partial: h.value,
        remainder: h.remainder_bound,
        j_max: h.j_max,
    }
}

/// `Σ_j j P̂(J=j) U*(σ_q⁺)^{j−1}` over an empirical histogram.
pub fn simulated_hq(p: &ModelParams, j: &Histogram) -> HqReport {
    let ln_u = SpectralConstants::new(p).u_star.ln();
    let top = j.max_value();
    let value = compensated_sum((1..=top).filter(|&k| j.count(k) > 0).map(|k| {
        let kf = k as f64;
        kf * (j.freq(k).ln() + (kf - 1.0) * ln_u).exp()
    }));
    HqReport {
        source: HqSource::Simulated,
        value,
        partial: value,
        remainder: 0.0,
        j_max: top,
    }
}

pub fn hq_for(p: &ModelParams, s: &Settings, j: &Histogram) -> Result<HqReport> {
    match s.hq_source {
        HqSource::Analytic => analytic_hq(p, s),
        HqSource::Simulated => Ok(simulated_hq(p, j)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamsReport {
    pub rho: f64,
    pub rho_star: f64,
    pub q: f64,
}

impl From<&ModelParams> for ParamsReport {
    fn from(p: &ModelParams) -> Self {
        Self {
            rho: p.rho(),
            rho_star: p.rho_star(),
            q: p.q(),
        }
    }
}
