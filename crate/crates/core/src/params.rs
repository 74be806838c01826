//! Model parameters and the closed-form constants derived from them.

use core::f64::consts::PI;

use libm::sqrt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} = {value} is out of range: must satisfy {bound}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        bound: &'static str,
    },
    #[error("unstable queue: rho = {rho} must be < 1 - q = {limit} (rho* = {rho_star} >= 1)")]
    Unstable { rho: f64, limit: f64, rho_star: f64 },
}

/// Batch arrival rate `ρ` (in units of the mean job service time) and
/// geometric batch-size parameter `q`, with `P(B = b) = (1 − q) q^{b−1}`.
///
/// Construction guarantees `0 < q < 1`, `ρ > 0` and `ρ < 1 − q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    rho: f64,
    q: f64,
    rho_star: f64,
}

/// Validate raw `(ρ, q)` input.
pub fn validate_params(rho: f64, q: f64) -> Result<ModelParams, ParamError> {
    ModelParams::new(rho, q)
}

impl ModelParams {
    pub fn new(rho: f64, q: f64) -> Result<Self, ParamError> {
        // written so that NaN fails every check
        if !(q > 0.0 && q < 1.0) {
            return Err(ParamError::OutOfRange {
                name: "q",
                value: q,
                bound: "0 < q < 1",
            });
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(ParamError::OutOfRange {
                name: "rho",
                value: rho,
                bound: "rho > 0",
            });
        }
        let limit = 1.0 - q;
        let rho_star = rho / limit;
        if !(rho < limit) {
            return Err(ParamError::Unstable {
                rho,
                limit,
                rho_star,
            });
        }
        Ok(Self { rho, q, rho_star })
    }

    /// Build from the load `ρ* = ρ/(1 − q)` instead of the batch rate.
    pub fn from_load(rho_star: f64, q: f64) -> Result<Self, ParamError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(ParamError::OutOfRange {
                name: "q",
                value: q,
                bound: "0 < q < 1",
            });
        }
        if !(rho_star > 0.0 && rho_star.is_finite()) {
            return Err(ParamError::OutOfRange {
                name: "rho_star",
                value: rho_star,
                bound: "rho_star > 0",
            });
        }
        if !(rho_star < 1.0) {
            return Err(ParamError::Unstable {
                rho: rho_star * (1.0 - q),
                limit: 1.0 - q,
                rho_star,
            });
        }
        Self::new(rho_star * (1.0 - q), q)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn rho_star(&self) -> f64 {
        self.rho_star
    }

    /// `1 − ρ − q`, strictly positive under stability.
    pub fn slack(&self) -> f64 {
        1.0 - self.rho - self.q
    }

    /// Mean batch size `1/(1 − q)`.
    pub fn mean_batch(&self) -> f64 {
        1.0 / (1.0 - self.q)
    }

    /// `√(1−q) − √ρ`, written as a quotient to avoid cancellation near the
    /// stability boundary.
    fn root_gap(&self) -> f64 {
        self.slack() / (sqrt(1.0 - self.q) + sqrt(self.rho))
    }

    /// `σ_q⁺ = −(√(1−q) − √ρ)²`.
    pub fn sigma_plus(&self) -> f64 {
        let g = self.root_gap();
        -g * g
    }

    /// `σ_q⁻ = −(√(1−q) + √ρ)²`.
    pub fn sigma_minus(&self) -> f64 {
        let s = sqrt(1.0 - self.q) + sqrt(self.rho);
        -s * s
    }

    /// `√(ρ(1−q))`, the recurring half-width of the branch cut.
    pub(crate) fn geo_mean(&self) -> f64 {
        sqrt(self.rho * (1.0 - self.q))
    }

    /// `ζ_q⁻ = ((√(ρ+q) − √(ρ(1−q)))/q)²`, evaluated as
    /// `((1+ρ)/(√(ρ+q) + √(ρ(1−q))))²`.
    pub fn zeta_minus(&self) -> f64 {
        let z = (1.0 + self.rho) / (sqrt(self.rho + self.q) + self.geo_mean());
        z * z
    }

    /// `ζ_q⁺ = ((√(ρ+q) + √(ρ(1−q)))/q)²`.
    pub fn zeta_plus(&self) -> f64 {
        let z = (sqrt(self.rho + self.q) + self.geo_mean()) / self.q;
        z * z
    }
}

/// Singularity locations and expansion coefficients for one [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConstants {
    /// Branch point of `T*`, `T̃*`, `U*`; the exponential decay rate.
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    /// Branch point of `M*`, `M̃*`; the geometric decay ratio is `1/ζ_q⁻`.
    pub zeta_minus: f64,
    pub zeta_plus: f64,
    /// `T̃*(σ_q⁺) = 1 + √((1−q)/ρ)`.
    pub t_q: f64,
    /// Coefficient of `(s − σ_q⁺)^{1/2}` in the expansion of `T̃*`.
    pub s_q: f64,
    /// Coefficient of `(s − σ_q⁺)^{1/2}` in the expansion of `U*`.
    pub l_q: f64,
    /// `U*(σ_q⁺)`.
    pub u_star: f64,
    /// `ζ_q⁻ − U*(σ_q⁺)` from its factored form (no cancellation).
    pub u_star_gap: f64,
    pub r_q: f64,
    pub kappa_q: f64,
    /// Prefactor of the `j^{-5/2} ζ^{-j}` tail law of `J`.
    pub k_q: f64,
}

impl SpectralConstants {
    pub fn new(p: &ModelParams) -> Self {
        let rho = p.rho();
        let q = p.q();
        let slack = p.slack();
        let sigma_plus = p.sigma_plus();
        let sigma_minus = p.sigma_minus();
        let zeta_minus = p.zeta_minus();
        let zeta_plus = p.zeta_plus();
        let g = p.geo_mean();
        let cut = sqrt(sigma_plus - sigma_minus);

        let t_q = 1.0 + sqrt((1.0 - q) / rho);
        let s_q = slack * cut / (2.0 * rho * sigma_plus);
        let l_q = sigma_plus * cut / (2.0 * (q + g) * (q + g));
        let u_star = (1.0 + rho - g) / (q + g);
        let bracket = q + g - sqrt(rho + q);
        let u_star_gap = g / (q * q * (q + g)) * bracket * bracket;

        let denom = 1.0 + rho + q * zeta_minus;
        let r_q = 2.0 * zeta_minus / denom;
        let kappa_q = q * sqrt((zeta_plus - zeta_minus) * zeta_minus) / (2.0 * sqrt(PI) * denom);
        let one_qr = 1.0 - q * r_q;
        let one_lr = 1.0 - (rho + q) * r_q;
        let k_q = kappa_q * zeta_minus / (zeta_minus - 1.0) * slack * r_q / (one_qr * one_qr)
            * (1.0 - q * (rho + q) * r_q * r_q)
            / (one_lr * one_lr);

        Self {
            sigma_plus,
            sigma_minus,
            zeta_minus,
            zeta_plus,
            t_q,
            s_q,
            l_q,
            u_star,
            u_star_gap,
            r_q,
            kappa_q,
            k_q,
        }
    }

    /// `U*(σ_q⁺)/ζ_q⁻`, the convergence ratio of the `H_q` series, from the
    /// factored gap so it stays below one in floating point.
    pub fn hq_ratio(&self) -> f64 {
        1.0 - self.u_star_gap / self.zeta_minus
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn light() -> ModelParams {
        ModelParams::new(0.21, 0.3).unwrap()
    }

    #[test]
    fn accepts_light_pair() {
        let p = validate_params(0.21, 0.3).unwrap();
        assert!((p.rho_star() - 0.3).abs() < 1e-15);
        let same = ModelParams::from_load(0.3, 0.3).unwrap();
        assert!((same.rho() - 0.21).abs() < 1e-15);
    }

    #[test]
    fn rejects_unstable_and_out_of_range() {
        assert!(matches!(validate_params(0.7, 0.3), Err(ParamError::Unstable { .. })));
        assert!(matches!(
            validate_params(0.21, 1.0),
            Err(ParamError::OutOfRange { name: "q", .. })
        ));
        assert!(matches!(
            validate_params(0.0, 0.3),
            Err(ParamError::OutOfRange { name: "rho", .. })
        ));
        assert!(matches!(
            validate_params(f64::NAN, 0.3),
            Err(ParamError::OutOfRange { .. })
        ));
        assert!(matches!(
            ModelParams::from_load(1.1, 0.3),
            Err(ParamError::Unstable { .. })
        ));
        let msg = alloc::format!("{}", validate_params(0.7, 0.3).unwrap_err());
        assert!(msg.contains("1 - q"), "{msg}");
    }

    #[test]
    fn spectral_values_for_light_pair() {
        let c = SpectralConstants::new(&light());
        assert!((c.sigma_plus + 0.143_188_419_492_767_45).abs() < 1e-15);
        assert!((c.sigma_minus + 1.676_811_580_507_232_3).abs() < 1e-14);
        assert!((c.zeta_minus - 1.215_411_088_477_528).abs() < 1e-14);
        assert!((c.zeta_plus - 13.384_588_911_522_469).abs() < 1e-12);
        assert!((c.t_q - (1.0 + libm::sqrt(0.7 / 0.21))).abs() < 1e-15);
        assert!((c.t_q - 2.825_741_858_350_554).abs() < 1e-14);
        assert!((c.u_star - 1.209_521_811_981_764_6).abs() < 1e-14);
        assert!((c.k_q - 42.988_901_099_403_26).abs() < 1e-10);
        assert!((c.r_q - 1.543_748_359_356_136).abs() < 1e-14);
        assert!((c.hq_ratio() - 0.995_154_498_299_714_7).abs() < 1e-13);
    }

    #[test]
    fn sigma_plus_is_branch_point_of_delta() {
        // Δ_q(s) = (s+1+ρ−q)² − 4ρ(1−q) vanishes at σ_q⁺ and is positive just right of it.
        let p = light();
        let delta = |s: f64| (s + 1.0 + p.rho() - p.q()).powi(2) - 4.0 * p.rho() * (1.0 - p.q());
        let (mut lo, mut hi) = (-1.0, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if delta(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((hi - p.sigma_plus()).abs() < 1e-12);
    }

    #[test]
    fn zeta_product_identity() {
        let p = light();
        let c = SpectralConstants::new(&p);
        let want = (1.21f64 * 1.21) / 0.09;
        assert!(((c.zeta_minus * c.zeta_plus) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn u_star_gap_matches_difference() {
        let c = SpectralConstants::new(&light());
        assert!((c.u_star_gap - (c.zeta_minus - c.u_star)).abs() < 1e-14);
    }
}
