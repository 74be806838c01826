//! Real-axis evaluation of transforms and generating functions.
//!
//! Every quadratic root `(A − √D)/(2ρ)` is evaluated in its rationalized
//! form `2c/(A + √D)` (with `c` the product of the roots times `ρ`), and the
//! discriminants are evaluated in factored form `(s − σ⁺)(s − σ⁻)`. The
//! residual transforms `T̃*` and `M̃*` are rationalized the same way, which
//! cancels the `s` (resp. `z − 1`) factor in their denominators exactly, so
//! `T̃*(0) = M̃*(1) = 1` without any special-cased branch.

use libm::{exp, pow, sqrt};
use thiserror::Error;

use crate::params::ModelParams;
use crate::special::bessel_i1_scaled;

/// An argument outside the real interval on which a function is analytic
/// (or defined at all).
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("{op}: argument {value} outside its domain [{lower}, {upper}{close}")]
pub struct DomainError {
    pub op: &'static str,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// `")"` for a half-open domain, `"]"` for a closed one.
    pub close: &'static str,
}

fn check(op: &'static str, value: f64, lower: f64, upper: f64, closed: bool) -> Result<(), DomainError> {
    let inside = value >= lower && if closed { value <= upper } else { value < upper };
    if inside {
        Ok(())
    } else {
        Err(DomainError {
            op,
            value,
            lower,
            upper,
            close: if closed { "]" } else { ")" },
        })
    }
}

impl ModelParams {
    /// `Δ_q(s) = (s − σ⁺)(s − σ⁻)`, nonnegative for `s ≥ σ⁺`.
    fn delta(&self, s: f64) -> f64 {
        (s - self.sigma_plus()) * (s - self.sigma_minus())
    }

    /// `δ_q(z) = (1+ρ−qz)² − 4ρ(1−q)z`, nonnegative for `z ≤ ζ⁻`.
    ///
    /// Near `z = 1` it is expanded in `u = z − 1` as
    /// `(1−ρ−q)² − u(2q(1+ρ−q) + 4ρ(1−q)) + q²u²` (every term positive for
    /// `u ≤ 0`, so `δ_q(1) = (1−ρ−q)²` holds to rounding even when `ζ⁻` is
    /// close to one); towards the branch point it is taken in the factored
    /// form `q²(ζ⁻ − z)(ζ⁺ − z)`.
    fn small_delta(&self, z: f64) -> f64 {
        let (rho, q) = (self.rho(), self.q());
        let zeta = self.zeta_minus();
        if z <= 1.0 + 0.5 * (zeta - 1.0) {
            let u = z - 1.0;
            let c = self.slack();
            let k = 2.0 * q * (1.0 + rho - q) + 4.0 * rho * (1.0 - q);
            c * c - u * k + q * q * u * u
        } else {
            q * q * (zeta - z) * (self.zeta_plus() - z)
        }
    }

    /// Batch-size PGF `B*(z) = (1−q)z/(1−qz)`.
    pub fn batch_pgf(&self, z: f64) -> Result<f64, DomainError> {
        let q = self.q();
        check("batch_pgf", z, 0.0, 1.0 / q, false)?;
        Ok((1.0 - q) * z / (1.0 - q * z))
    }

    /// PGF of the number `N₀` of jobs found by an arriving batch:
    /// `η(z) = (1−ρ*)(1−qz)/(1−(ρ+q)z)`.
    pub fn n0_pgf(&self, z: f64) -> Result<f64, DomainError> {
        let (rho, q) = (self.rho(), self.q());
        check("n0_pgf", z, 0.0, 1.0 / (rho + q), false)?;
        Ok((1.0 - self.rho_star()) * (1.0 - q * z) / (1.0 - (rho + q) * z))
    }

    /// PGF of `N₀ + B`: `φ(z) = (1−ρ−q)z/(1−(ρ+q)z)`.
    pub fn phi_pgf(&self, z: f64) -> Result<f64, DomainError> {
        let lam = self.rho() + self.q();
        check("phi_pgf", z, 0.0, 1.0 / lam, false)?;
        Ok(self.slack() * z / (1.0 - lam * z))
    }

    /// Busy-period Laplace transform `T*(s) = (s+1−q+ρ−√Δ_q(s))/(2ρ)`.
    pub fn busy_lt(&self, s: f64) -> Result<f64, DomainError> {
        check("busy_lt", s, self.sigma_plus(), f64::INFINITY, false)?;
        let a = s + 1.0 - self.q() + self.rho();
        Ok(2.0 * (1.0 - self.q()) / (a + sqrt(self.delta(s))))
    }

    /// Mean busy period `−T*'(0) = 1/(1−ρ−q)`.
    pub fn busy_mean(&self) -> f64 {
        1.0 / self.slack()
    }

    /// PGF of the number `M` of jobs served in a busy period,
    /// `M*(z) = (1+ρ−qz−√δ_q(z))/(2ρ)`.
    pub fn jobs_pgf(&self, z: f64) -> Result<f64, DomainError> {
        check("jobs_pgf", z, 0.0, self.zeta_minus(), false)?;
        let a = 1.0 + self.rho() - self.q() * z;
        Ok(2.0 * (1.0 - self.q()) * z / (a + sqrt(self.small_delta(z))))
    }

    /// Mean number of jobs per busy period, `M*'(1) = 1/((1−q)(1−ρ*))`.
    pub fn jobs_mean(&self) -> f64 {
        1.0 / ((1.0 - self.q()) * (1.0 - self.rho_star()))
    }

    /// Residual busy-period transform after a tagged batch arrival,
    /// `T̃*(s) = (1−q−ρ)[−(s+1−ρ−q) + √Δ_q(s)]/(2ρs)`, evaluated as
    /// `2(1−q−ρ)/(√Δ_q(s) + s + 1−ρ−q)`.
    pub fn residual_busy_lt(&self, s: f64) -> Result<f64, DomainError> {
        check("residual_busy_lt", s, self.sigma_plus(), f64::INFINITY, false)?;
        let c = self.slack();
        Ok(2.0 * c / (sqrt(self.delta(s)) + s + c))
    }

    /// PGF of the number `M̃` of jobs served in the residual busy period,
    /// `M̃*(z) = (1−q−ρ)[1+ρ−(q+2ρ)z − √δ_q(z)]/(2ρ(ρ+q)(z−1))`, evaluated as
    /// `2(1−q−ρ)z/(1+ρ−(q+2ρ)z + √δ_q(z))`.
    pub fn residual_jobs_pgf(&self, z: f64) -> Result<f64, DomainError> {
        check("residual_jobs_pgf", z, 0.0, self.zeta_minus(), false)?;
        let (rho, q) = (self.rho(), self.q());
        let a = 1.0 + rho - (q + 2.0 * rho) * z;
        Ok(2.0 * self.slack() * z / (a + sqrt(self.small_delta(z))))
    }

    /// Smallest root `ν(r, s)` of `ρν² − (1+s+ρ−qr)ν + (1−q)r = 0`, the joint
    /// transform `E(r^M e^{−sT})` of a busy period.
    pub fn busy_joint_transform(&self, r: f64, s: f64) -> Result<f64, DomainError> {
        check("busy_joint_transform(r)", r, 0.0, 1.0, true)?;
        check("busy_joint_transform(s)", s, 0.0, f64::INFINITY, false)?;
        let (rho, q) = (self.rho(), self.q());
        let a = 1.0 + s + rho - q * r;
        let disc = a * a - 4.0 * rho * (1.0 - q) * r;
        let nu = 2.0 * (1.0 - q) * r / (a + sqrt(disc.max(0.0)));
        check("busy_joint_transform(nu)", nu, 0.0, 1.0, true)?;
        Ok(nu)
    }

    /// `E_{n,b}(r^{M̃} e^{−sT̃}) = (r/(1+s+ρ−ρν(r,s)))^{n+b}`.
    pub fn joint_conditional_transform(&self, n: u64, b: u64, r: f64, s: f64) -> Result<f64, DomainError> {
        check("joint_conditional_transform(b)", b as f64, 1.0, f64::INFINITY, false)?;
        let nu = self.busy_joint_transform(r, s)?;
        let base = r / (1.0 + s + self.rho() - self.rho() * nu);
        Ok(pow(base, (n + b) as f64))
    }

    /// Transform of the inter-departure time under the i.i.d. hypothesis,
    /// `U*(s) = [1−q−ρ(q+ρ)(1−t)] t / R(t)` with `t = T̃*(s)` and
    /// `R(t) = (ρt+1−ρ−q)((q+ρ)t+1−ρ−q)`.
    pub fn interdeparture_lt(&self, s: f64) -> Result<f64, DomainError> {
        let t = self.residual_busy_lt(s)?;
        Ok(self.interdeparture_of(t))
    }

    /// The map `t ↦ U` with `M̃*(U) = t`, applied to `t = T̃*(s)`.
    pub(crate) fn interdeparture_of(&self, t: f64) -> f64 {
        let (rho, q) = (self.rho(), self.q());
        let c = self.slack();
        let lam = rho + q;
        let r = (rho * t + c) * (lam * t + c);
        (1.0 - q - rho * lam * (1.0 - t)) * t / r
    }

    /// Busy-period density
    /// `√((1−q)/ρ) e^{−(1+ρ−q)t} I₁(2√(ρ(1−q)) t)/t`.
    ///
    /// Evaluated as `√((1−q)/ρ) e^{σ⁺t} [e^{−x}I₁(x)]/t` with
    /// `x = 2√(ρ(1−q)) t`, which neither overflows nor underflows early.
    pub fn busy_density(&self, t: f64) -> Result<f64, DomainError> {
        check("busy_density", t, f64::MIN_POSITIVE, f64::INFINITY, false)?;
        let (rho, q) = (self.rho(), self.q());
        let x = 2.0 * self.geo_mean() * t;
        Ok(sqrt((1.0 - q) / rho) * exp(self.sigma_plus() * t) * bessel_i1_scaled(x) / t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SpectralConstants;

    fn light() -> ModelParams {
        ModelParams::new(0.21, 0.3).unwrap()
    }

    /// Naive quadratic-root forms, as printed, for comparison away from
    /// their removable singularities.
    fn naive_residual_busy(p: &ModelParams, s: f64) -> f64 {
        let (rho, q) = (p.rho(), p.q());
        let delta = (s + 1.0 + rho - q).powi(2) - 4.0 * rho * (1.0 - q);
        (1.0 - q - rho) * (-(s + 1.0 - rho - q) + delta.sqrt()) / (2.0 * rho * s)
    }

    fn naive_residual_jobs(p: &ModelParams, z: f64) -> f64 {
        let (rho, q) = (p.rho(), p.q());
        let d = (1.0 + rho - q * z).powi(2) - 4.0 * rho * z * (1.0 - q);
        (1.0 - q - rho) * (1.0 + rho - (q + 2.0 * rho) * z - d.sqrt()) / (2.0 * rho * (rho + q) * (z - 1.0))
    }

    #[test]
    fn batch_pgf_values() {
        let p = light();
        assert_eq!(p.batch_pgf(1.0).unwrap(), 1.0);
        assert_eq!(p.batch_pgf(0.0).unwrap(), 0.0);
        assert!((p.batch_pgf(0.5).unwrap() - 0.35 / 0.85).abs() < 1e-16);
        assert!(p.batch_pgf(-0.1).is_err());
        assert!(p.batch_pgf(1.0 / 0.3).is_err());
    }

    #[test]
    fn n0_and_phi() {
        let p = light();
        assert!((p.n0_pgf(0.0).unwrap() - 0.7).abs() < 1e-15);
        assert!((p.phi_pgf(1.0).unwrap() - 1.0).abs() <= 4.0 * f64::EPSILON);
        let direct = p.phi_pgf(0.5).unwrap();
        let product = p.n0_pgf(0.5).unwrap() * p.batch_pgf(0.5).unwrap();
        assert!((direct - product).abs() < 1e-14);
        assert!((direct - 0.49 * 0.5 / (1.0 - 0.51 * 0.5)).abs() < 1e-15);
        assert!(p.phi_pgf(1.0 / 0.51).is_err());
    }

    #[test]
    fn busy_lt_values() {
        let p = light();
        assert_eq!(p.busy_lt(0.0).unwrap(), 1.0);
        // (1.91 − √3.0601)/0.42
        assert!((p.busy_lt(1.0).unwrap() - 0.382_585_354_005_724_6).abs() < 1e-14);
        assert!((p.busy_mean() - 2.040_816_326_530_612).abs() < 1e-14);
        // central difference of T* at 0
        let h = 1e-5;
        let d = (p.busy_lt(h).unwrap() - p.busy_lt(-h).unwrap()) / (2.0 * h);
        assert!((-d - p.busy_mean()).abs() < 1e-8);
        assert!(p.busy_lt(p.sigma_plus() - 1e-9).is_err());
        let at_branch = p.busy_lt(p.sigma_plus()).unwrap();
        assert!((at_branch - (0.7f64 / 0.21).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn jobs_pgf_values() {
        let p = light();
        assert_eq!(p.jobs_pgf(0.0).unwrap(), 0.0);
        assert!((p.jobs_pgf(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((p.jobs_pgf(0.5).unwrap() - 0.355_181_421_574_152_4).abs() < 1e-14);
        assert!(p.jobs_pgf(p.zeta_minus()).is_err());
        let h = 1e-6;
        let d = (p.jobs_pgf(1.0 + h).unwrap() - p.jobs_pgf(1.0 - h).unwrap()) / (2.0 * h);
        assert!((d - p.jobs_mean()).abs() < 1e-7);
    }

    #[test]
    fn residual_forms_match_naive_away_from_removable_points() {
        let p = light();
        for s in [-0.1, 0.05, 0.3, 1.0, 7.0] {
            let a = p.residual_busy_lt(s).unwrap();
            assert!((a - naive_residual_busy(&p, s)).abs() < 1e-13, "s = {s}");
        }
        for z in [0.1, 0.5, 0.9, 1.1, 1.2] {
            let a = p.residual_jobs_pgf(z).unwrap();
            assert!((a - naive_residual_jobs(&p, z)).abs() < 1e-13, "z = {z}");
        }
    }

    #[test]
    fn residual_normalizations_and_branch_value() {
        let p = light();
        let c = SpectralConstants::new(&p);
        assert!((p.residual_busy_lt(0.0).unwrap() - 1.0).abs() <= 4.0 * f64::EPSILON);
        assert!((p.residual_jobs_pgf(1.0).unwrap() - 1.0).abs() <= 4.0 * f64::EPSILON);
        assert_eq!(p.residual_jobs_pgf(0.0).unwrap(), 0.0);
        // continuous through the removable points
        for eps in [1e-3, 1e-7, 1e-12] {
            assert!((p.residual_busy_lt(eps).unwrap() - 1.0).abs() < 10.0 * eps);
            assert!((p.residual_jobs_pgf(1.0 - eps).unwrap() - 1.0).abs() < 10.0 * eps);
        }
        let at_branch = p.residual_busy_lt(c.sigma_plus).unwrap();
        assert!((at_branch - c.t_q).abs() < 1e-14);
        assert!((at_branch - 2.825_741_858_350_554).abs() < 1e-13);
    }

    #[test]
    fn residual_busy_is_phi_of_joint_transform() {
        // T̃*(s) = φ(1/(1+s+ρ−ρT*(s))), and the joint transform at (n,b)=(0,1), r=1
        // is exactly that inner argument.
        let p = light();
        for s in [0.0, 0.25, 1.0, 3.0] {
            let inner = 1.0 / (1.0 + s + p.rho() - p.rho() * p.busy_lt(s).unwrap());
            let joint = p.joint_conditional_transform(0, 1, 1.0, s).unwrap();
            assert!((joint - inner).abs() < 1e-15);
            let via_phi = p.phi_pgf(joint).unwrap();
            assert!((via_phi - p.residual_busy_lt(s).unwrap()).abs() < 1e-14, "s = {s}");
        }
    }

    #[test]
    fn residual_jobs_is_phi_of_joint_transform() {
        let p = light();
        for z in [0.0, 0.3, 0.8, 1.0] {
            let joint = p.joint_conditional_transform(0, 1, z, 0.0).unwrap();
            let inner = z / (1.0 + p.rho() - p.rho() * p.jobs_pgf(z).unwrap());
            assert!((joint - inner).abs() < 1e-15);
            let via_phi = p.phi_pgf(joint).unwrap();
            assert!((via_phi - p.residual_jobs_pgf(z).unwrap()).abs() < 1e-14, "z = {z}");
        }
    }

    #[test]
    fn joint_transform_structure() {
        let p = light();
        for (n, b) in [(0, 1), (3, 2), (10, 7)] {
            assert_eq!(p.joint_conditional_transform(n, b, 1.0, 0.0).unwrap(), 1.0);
        }
        let a = p.joint_conditional_transform(2, 3, 0.6, 0.4).unwrap();
        let b = p.joint_conditional_transform(0, 5, 0.6, 0.4).unwrap();
        assert_eq!(a, b);
        assert!(p.joint_conditional_transform(1, 0, 0.5, 0.0).is_err());
        assert!(p.joint_conditional_transform(1, 1, 1.5, 0.0).is_err());
        // ν(1, s) = T*(s) and ν(r, 0) = M*(r)
        assert!((p.busy_joint_transform(1.0, 0.7).unwrap() - p.busy_lt(0.7).unwrap()).abs() < 1e-15);
        assert!((p.busy_joint_transform(0.4, 0.0).unwrap() - p.jobs_pgf(0.4).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn interdeparture_values() {
        let p = light();
        let c = SpectralConstants::new(&p);
        assert!((p.interdeparture_lt(0.0).unwrap() - 1.0).abs() < 1e-15);
        let at_branch = p.interdeparture_lt(c.sigma_plus).unwrap();
        assert!((at_branch - c.u_star).abs() < 1e-13);
        assert!((at_branch - 1.209_521_811_981_764_6).abs() < 1e-13);
        assert!(c.u_star < c.zeta_minus);
        // U* inverts M̃*: M̃*(U*(s)) = T̃*(s)
        for s in [0.0, 0.02, 0.5, 2.0] {
            let u = p.interdeparture_lt(s).unwrap();
            let back = p.residual_jobs_pgf(u).unwrap();
            assert!((back - p.residual_busy_lt(s).unwrap()).abs() < 1e-13, "s = {s}");
        }
    }

    #[test]
    fn busy_density_small_time_limit() {
        let p = light();
        assert!((p.busy_density(1e-10).unwrap() - 0.7).abs() < 1e-9);
        assert!(p.busy_density(0.0).is_err());
        assert!(p.busy_density(-1.0).is_err());
        // far enough out that unscaled I₁ would overflow
        assert!(p.busy_density(5000.0).unwrap() >= 0.0);
    }

    #[test]
    fn busy_density_approaches_tail_law() {
        // density ~ (1−q)^{1/4}/ρ^{3/4} · e^{σt}/(2√π t^{3/2})
        let p = light();
        let law = |t: f64| {
            0.7f64.powf(0.25) / 0.21f64.powf(0.75) * (p.sigma_plus() * t).exp()
                / (2.0 * core::f64::consts::PI.sqrt() * t.powf(1.5))
        };
        let scale = 1.0 / p.sigma_plus().abs();
        let mut last = f64::INFINITY;
        for k in [10.0, 50.0, 200.0] {
            let t = k * scale;
            let err = (p.busy_density(t).unwrap() / law(t) - 1.0).abs();
            assert!(err < last);
            last = err;
        }
        assert!(last < 5e-3);
    }
}
