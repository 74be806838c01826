//! Special functions needed by the busy-period density and the binomial
//! weights of the departure-rank law.

use crate::sum::NeumaierSum;

/// Below this argument `I₁` is summed from its ascending series; above it
/// the asymptotic expansion is used. The two branches agree to ~1e-14 here.
pub const I1_CROSSOVER: f64 = 15.0;

/// Exponentially scaled modified Bessel function `e^{-|x|} I₁(x)`.
///
/// Finite for every finite `x`, which lets the busy-period density be
/// evaluated at times where `I₁` itself overflows.
pub fn bessel_i1_scaled(x: f64) -> f64 {
    if x < 0.0 {
        return -bessel_i1_scaled(-x);
    }
    if x <= I1_CROSSOVER {
        ascending_i1(x) * libm::exp(-x)
    } else {
        asymptotic_i1_scaled(x)
    }
}

/// Modified Bessel function of the first kind of order one.
pub fn bessel_i1(x: f64) -> f64 {
    let ax = libm::fabs(x);
    if ax <= I1_CROSSOVER {
        return if x < 0.0 { -ascending_i1(ax) } else { ascending_i1(ax) };
    }
    // e^x overflows past ~709.78; split the exponential to push that out a little.
    let half = libm::exp(ax / 2.0);
    let v = asymptotic_i1_scaled(ax) * half * half;
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// `Σ_k (x/2)^{2k+1} / (k! (k+1)!)`; every term is positive.
fn ascending_i1(x: f64) -> f64 {
    let y = 0.25 * x * x;
    let mut term = 0.5 * x;
    let mut acc = NeumaierSum::new();
    acc += term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= y / (k * (k + 1.0));
        acc += term;
        if term <= 1e-17 * acc.sum() {
            break;
        }
    }
    acc.sum()
}

/// `e^{-x} I₁(x) ~ (2πx)^{-1/2} Σ_k (-1)^k a_k / x^k`, truncated at the
/// smallest term. The leading terms are `1 − 3/(8x) − 15/(128x²) − …`.
fn asymptotic_i1_scaled(x: f64) -> f64 {
    const MU: f64 = 4.0; // 4ν² for ν = 1
    let mut acc = NeumaierSum::new();
    let mut term = 1.0;
    acc += term;
    let mut k = 1.0;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = -term * (MU - odd * odd) / (k * 8.0 * x);
        if libm::fabs(next) >= libm::fabs(term) || libm::fabs(next) < 1e-17 {
            if libm::fabs(next) < libm::fabs(term) {
                acc += next;
            }
            break;
        }
        acc += next;
        term = next;
        k += 1.0;
    }
    acc.sum() / libm::sqrt(2.0 * core::f64::consts::PI * x)
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln C(n, k)` computed from log-gamma differences; `-∞` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    let (n, k) = (n as f64, k as f64);
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from 30-digit mpmath evaluations.
    const I1_REF: [(f64, f64); 7] = [
        (0.1, 0.050_062_526_047_092_695),
        (1.0, 0.565_159_103_992_485_03),
        (2.5, 2.516_716_245_288_698_4),
        (5.0, 24.335_642_142_450_527),
        (10.0, 2_670.988_303_701_254_7),
        (20.0, 42_454_973.385_127_77),
        (50.0, 2.903_078_590_103_556_8e20),
    ];

    const I1_SCALED_REF: [(f64, f64); 4] = [
        (15.0, 0.100_374_175_045_166_66),
        (20.0, 0.087_506_222_183_288_665),
        (200.0, 0.028_156_503_394_832_918),
        (1000.0, 0.012_610_930_256_928_63),
    ];

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn matches_reference_values() {
        for (x, want) in I1_REF {
            assert!(rel(bessel_i1(x), want) < 1e-14, "I1({x})");
            assert!(rel(bessel_i1(-x), -want) < 1e-14);
        }
        for (x, want) in I1_SCALED_REF {
            assert!(rel(bessel_i1_scaled(x), want) < 1e-14, "I1e({x})");
        }
    }

    #[test]
    fn branches_agree_at_crossover() {
        for x in [14.0, I1_CROSSOVER, 16.0] {
            let series = ascending_i1(x) * libm::exp(-x);
            let asym = asymptotic_i1_scaled(x);
            assert!(rel(series, asym) < 1e-12, "x = {x}: {series} vs {asym}");
        }
    }

    #[test]
    fn small_argument_is_linear() {
        assert!(rel(bessel_i1(1e-8), 5e-9) < 1e-15);
        assert_eq!(bessel_i1(0.0), 0.0);
    }

    #[test]
    fn log_binomials() {
        assert!((ln_binomial(4, 2) - libm::log(6.0)).abs() < 1e-14);
        assert!((ln_binomial(60, 30) - libm::log(118_264_581_564_861_424.0)).abs() < 1e-12);
        assert_eq!(ln_binomial(5, 0), 0.0);
        assert_eq!(ln_binomial(3, 4), f64::NEG_INFINITY);
    }
}
