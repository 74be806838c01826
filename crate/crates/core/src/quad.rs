//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Used as the independent check on the busy-period density (normalization,
//! mean, tail probabilities) and for binned densities in the simulator
//! checks.

use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

use crate::sum::NeumaierSum;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
    pub converged: bool,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, libm::fabs((kronrod - gauss) * h))
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrate `f` over `[a, b]`, bisecting the worst segment until the
/// summed error estimate is below `max(abs_tol, rel_tol·|I|)` or
/// `max_intervals` segments exist.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_intervals: usize) -> QuadResult {
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    loop {
        let mut value = NeumaierSum::new();
        let mut error = 0.0;
        for s in heap.iter() {
            value += s.value;
            error += s.error;
        }
        let total = value.sum();
        let done = error <= abs_tol.max(rel_tol * libm::fabs(total));
        if done || heap.len() >= max_intervals {
            return QuadResult {
                value: total,
                abs_error: error,
                intervals: heap.len(),
                converged: done,
            };
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le) = gk15(&f, worst.a, mid);
        let (rv, re) = gk15(&f, mid, worst.b);
        heap.push(Segment { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, error: re });
    }
}

/// Integrate over `[a, ∞)` through the substitution `t = a + u/(1 − u)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64, max_intervals: usize) -> QuadResult {
    let g = |u: f64| {
        let w = 1.0 - u;
        let t = a + u / w;
        let v = f(t) / (w * w);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, abs_tol, rel_tol, max_intervals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-14, 0.0, 10);
        assert!((r.value - 0.0).abs() < 1e-14);
        assert!(r.converged);
    }

    #[test]
    fn exponential_to_infinity() {
        let r = integrate_to_infinity(|t| libm::exp(-0.3 * t), 0.0, 1e-13, 1e-13, 2000);
        assert!((r.value - 1.0 / 0.3).abs() < 1e-11, "{r:?}");
    }

    #[test]
    fn peaked_integrand() {
        let r = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-12, 2000);
        let want = 2.0 * 100.0 * libm::atan(100.0);
        assert!((r.value - want).abs() < 1e-9 * want, "{r:?}");
    }
}
